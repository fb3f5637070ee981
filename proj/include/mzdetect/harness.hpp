#pragma once

// Scripted Monte-Carlo experiments on the simulated chain: LO noise versus
// power, fringe-scan calibration, SNR versus probe power and the locked
// interferometer's residual phase noise.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mzdetect/servo.hpp"
#include "mzdetect/signal_chain.hpp"

namespace mzd {

struct FitSummary {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> parameters;
  std::vector<double> uncertainties;

  double parameter(const std::string& name) const;
  double uncertainty(const std::string& name) const;
};

struct ExperimentResult {
  std::string name;
  std::string sweep_variable;
  std::string sweep_unit;
  Eigen::VectorXd sweep_values;
  std::string measured_unit;
  Eigen::VectorXd measured;
  Eigen::VectorXd standard_error;
  /// Further per-point columns (model curves, diagnostics), in output order.
  std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
  FitSummary fit;
  /// Scalar results (calibration, densities, ...), in output order.
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::uint64_t> seeds;
  std::vector<bool> flagged;
  std::vector<std::string> warnings;
  bool lock_lost = false;

  const Eigen::VectorXd& column(const std::string& name) const;
  double scalar(const std::string& name) const;
};

struct HarnessConfig {
  ChainSettings chain;
  double lo_power = 1e-3;              // W at the recombiner
  double probe_power = 2.5587e-12;     // W leaving the atoms
  double duration = 1.0;               // s per replicate
  int replicates = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  double control_rate = 1e6;           // Hz, phase program update rate
  double scan_start = 0.0;             // rad
  double scan_range = 2.0 * kTwoPi;    // rad
  double loss_factor = 0.77;
  ServoConfig servo;
  VibrationSpectrum vibration = VibrationSpectrum::laboratory();

  void validate() const;
};

/// Per LO power: LO-only runs, standard deviation of the settled lock-in
/// output per replicate, rms over replicates; log-log slope fit.
ExperimentResult run_noise_vs_power(const std::vector<double>& lo_powers,
                                    const HarnessConfig& config);

/// One replicate: operating phase ramped over `scan_range` during the run,
/// sine fit of the settled lock-in output against gamma.
ExperimentResult run_fringe_scan(double scan_range, const HarnessConfig& config);

/// Per probe power: fringe scans, SNR = fitted amplitude / residual rms,
/// averaged over replicates; log-log slope fit, with the ideal small-signal
/// curve at 1 rad and the same curve scaled by the loss factor.
ExperimentResult run_snr_vs_power(const std::vector<double>& probe_powers,
                                  const HarnessConfig& config);

/// Closed-loop run with vibrations: phase noise density of the lock-in
/// output referred through the fringe slope, and the resulting SNR ceiling.
ExperimentResult run_locked_sensitivity(double duration, const HarnessConfig& config);

/// Chain settings for the worked design point (detuning, modulation depth).
ChainSettings default_chain_settings();

}  // namespace mzd
