#pragma once

// Closed-form operating point of the detector: the heating-limited SNR,
// the modulated (lock-in) SNR, demodulated signal and shot-noise currents,
// sensitivities and a phase-noise budget.

#include <string>
#include <vector>

#include "mzdetect/atom_optics.hpp"
#include "mzdetect/constants.hpp"
#include "mzdetect/detection.hpp"

namespace mzd {

/// 2 J1(m) when the EOM sidebands beat against the LO instead of the carrier.
inline constexpr double kDefaultModulationPenalty = 0.51;

/// Per-port demodulated signal and shot-noise currents of the simulated
/// chain relative to the textbook rms expressions. A 50/50 recombiner sends
/// half of each beam to a port; with the sqrt(2) cos lock-in and 2 e I shot
/// density both quantities come out twice the textbook values, so the SNR
/// is unchanged.
inline constexpr double kLockInReadoutScale = 2.0;

struct DesignPoint {
  double detuning = 0.0;               // half-linewidths
  double target_optical_depth = 0.01;  // k
  double absorbed_power = 0.0;         // W
  double transmitted_probe_power = 0.0;  // W, after the atoms
  double lo_power = 1e-3;              // W
  double bandwidth = 1e3;              // Hz
  double modulation_depth = 0.0;       // m
  double fractional_signal = 1.0;      // dn/n
  double phase_signal = 0.0;           // rad

  void validate() const;
};

/// Builds a self-consistent point: detuning from k, transmitted power from
/// the absorbed power, phase signal = (Delta / 2) k dn/n.
DesignPoint make_design_point(const AtomCloud& cloud, double wavelength, double optical_depth,
                              double absorbed_power, double lo_power, double bandwidth,
                              double modulation_depth, double fractional_signal = 1.0);

struct CurrentPair {
  double signal = 0.0;       // A rms
  double shot_noise = 0.0;   // A rms in the bandwidth
};

struct NoiseBudget {
  // All as equivalent phase noise, rad/sqrt(Hz), for the balanced pair.
  double shot = 0.0;
  double detector = 0.0;  // NEP of both photodiodes
  double locking = 0.0;   // residual floor of the path-length lock
  double total = 0.0;
  std::string dominant;
};

/// Figures of merit at one quantum efficiency.
struct DesignFigures {
  double quantum_efficiency = 1.0;
  double snr_max = 0.0;
  double snr_modulated = 0.0;
  double phase_sensitivity = 0.0;           // rad/sqrt(Hz)
  double column_density_sensitivity = 0.0;  // (dn/n)/sqrt(Hz)
};

struct DesignReport {
  DesignPoint point;
  double wavelength = kRb87D2Wavelength;
  double photon_energy = 0.0;
  double optical_thickness = 0.0;  // n sigma_0 on resonance

  // Headline figures: the heating-limited bound and phase sensitivity for a
  // perfect detector, the lock-in figures for the configured detector.
  double snr_max = 0.0;
  double snr_modulated = 0.0;
  double signal_current = 0.0;      // A, one port, phi - gamma = phase_signal
  double shot_noise_current = 0.0;  // A, one port
  double phase_sensitivity = 0.0;
  double column_density_sensitivity = 0.0;
  double full_cloud_phase = 0.0;
  double heating_rate = 0.0;        // photons/atom/s
  double modulation_penalty = 0.0;  // 2 J1(m)
  double minimum_detectable_fraction = 0.0;

  DesignFigures ideal;
  DesignFigures detector;
  NoiseBudget noise_budget;
  double locking_floor = 0.0;
  bool locking_limited = false;
  double achievable_snr = 0.0;
  double loss_factor = 1.0;
  std::vector<std::string> warnings;
};

struct DesignRequest {
  AtomCloud cloud;
  double wavelength = kRb87D2Wavelength;
  double target_optical_depth = 0.01;
  double bandwidth = 1e3;
  double lo_power = 1e-3;
  double modulation_penalty = kDefaultModulationPenalty;
  double modulation_depth = -1.0;  // < 0: solve from modulation_penalty
  double fractional_signal = 1.0;
  double scattering_rate = 0.0;    // photons/s; 0: one photon per atom per lifetime
  double locking_floor = 2e-4;     // rad/sqrt(Hz)
  DetectorSpec detector;

  void validate() const;
};

/// 2 J1(m).
double modulation_penalty(double depth);

/// Smallest m with 2 J1(m) = penalty; penalty in [0, max 2 J1 ~ 1.1638].
double solve_modulation_depth(double penalty);

/// (1/2) sqrt(eta P_ab n sigma0 / (h nu B)) dn/n.
double snr_max(const DesignPoint& point, const AtomCloud& cloud, const DetectorSpec& detector,
               double wavelength = kRb87D2Wavelength);

/// Delta = sqrt(n sigma0 / k - 1).
double detuning_for_depth(double target_optical_depth, const AtomCloud& cloud,
                          double wavelength = kRb87D2Wavelength);

/// P_ab / (1 - exp(-k)).
double transmitted_power(double absorbed_power, double optical_depth);

/// J1(m) sqrt(eta P_ab n sigma0 / (h nu B)) dn/n, after checking that the
/// point's transmitted power and phase signal agree with its absorbed power,
/// optical depth and detuning.
double snr_modulated(const DesignPoint& point, const AtomCloud& cloud,
                     const DetectorSpec& detector, double wavelength = kRb87D2Wavelength);

/// 2 J1(m) sqrt(eta P_Pt / (h nu B)) dphi.
double snr_modulated_phase_form(const DesignPoint& point, const DetectorSpec& detector,
                                double wavelength = kRb87D2Wavelength);

/// Textbook rms currents at one port:
///   i_S = alpha eta e / (sqrt2 h nu) sqrt(P_LO P_Pt) J1(m) sin(phi - gamma)
///   i_shot = (alpha e / sqrt2) sqrt(eta P_LO B / (2 h nu)).
CurrentPair signal_and_noise_currents(const DesignPoint& point, const DetectorSpec& detector,
                                      double phase_offset, double wavelength = kRb87D2Wavelength);

/// The same for the balanced pair as realised by the simulated chain:
/// signal 2 x readout x i_S, independent shot noise sqrt2 x readout x i_shot.
CurrentPair balanced_readout_currents(const DesignPoint& point, const DetectorSpec& detector,
                                      double phase_offset, double wavelength = kRb87D2Wavelength);

/// Full-cloud phase over SNR_max sqrt(B).
double phase_sensitivity(const DesignPoint& point, const AtomCloud& cloud,
                         const DetectorSpec& detector, double wavelength = kRb87D2Wavelength);

NoiseBudget noise_budget(const DesignPoint& point, const DetectorSpec& detector,
                         double locking_floor, double wavelength = kRb87D2Wavelength);

/// Multiplies every SNR entry by loss_factor in (0, 1].
DesignReport imperfection_scaling(const DesignReport& report, double loss_factor);

/// Re-evaluates bandwidth-dependent entries for a new bandwidth.
DesignReport rescale_bandwidth(const DesignReport& report, double bandwidth);

/// Regime checks: optically thin, far detuned, small phase signal.
std::vector<std::string> regime_warnings(const DesignPoint& point);

DesignReport design(const DesignRequest& request);

}  // namespace mzd
