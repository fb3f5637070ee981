#pragma once

// Path-length disturbance of the interferometer and the piezo lock that
// holds the phase gamma at its setpoint.

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mzdetect/constants.hpp"
#include "mzdetect/random.hpp"

namespace mzd {

struct VibrationTone {
  double frequency = 0.0;      // Hz
  double rms_amplitude = 0.0;  // rad
};

struct VibrationSpectrum {
  std::vector<VibrationTone> tones;
  double broadband_density = 0.0;  // rad/sqrt(Hz), flat up to the cutoff
  double broadband_cutoff = 0.0;   // Hz

  void validate() const;
  double highest_frequency() const;
  bool empty() const;

  static VibrationSpectrum none() { return {}; }
  /// Mains/fan lines plus a broadband acoustic floor below 1 kHz.
  static VibrationSpectrum laboratory();
};

struct ServoConfig {
  double proportional_gain = 9.0;
  double integral_gain = 0.25 * kTwoPi * 10e3 * 100.0;  // 1/s
  double piezo_range = 20.0;    // rad of optical phase
  double loop_rate = 1e6;       // Hz
  double residual_floor = 2e-4; // rad/sqrt(Hz)
  double floor_bandwidth = 50e3;  // Hz, the floor is white up to here
  double piezo_bandwidth = 10e3;  // Hz, first-order actuator corner
  double setpoint = 0.0;        // rad, mid-fringe for the probe readout

  void validate() const;

  /// Lock acquisition window excluded from the in-lock fraction: 10 / f_piezo.
  double acquisition_time() const { return 10.0 / piezo_bandwidth; }

  /// Ki = w_p (1 + Kp)^2 / 4 puts the two loop poles on top of each other.
  static ServoConfig critically_damped(double proportional_gain, double piezo_bandwidth,
                                       double loop_rate);
};

struct LockResult {
  Eigen::VectorXd locked_phase;  // rad
  std::vector<bool> in_lock;
  double sample_rate = 0.0;
  bool lock_failure = false;
  std::size_t acquisition_samples = 0;  // leading samples ignored by fraction_in_lock

  double fraction_in_lock() const;
};

/// One realisation of the disturbance, starting from `static_phase`.
/// Tones get random phases; the broadband part is shaped in the frequency domain.
Eigen::VectorXd open_loop_phase(const VibrationSpectrum& spectrum, double duration,
                                double sample_rate, std::uint64_t seed,
                                double static_phase = 0.0);

/// Sample-by-sample PI loop. The loop updates at config.loop_rate and holds
/// its actuator between updates when the series is sampled faster.
class ServoLoop {
 public:
  ServoLoop(const ServoConfig& config, double sample_rate, std::uint64_t seed);

  /// Locked phase for the next open-loop sample, residual floor included.
  double step(double open_phase);
  bool in_lock() const { return in_lock_; }
  double actuator() const { return actuator_; }

 private:
  ServoConfig config_;
  int stride_;
  int countdown_ = 0;
  int floor_stride_;
  int floor_countdown_ = 0;
  double alpha_;
  double period_;
  double floor_sigma_;
  double integrator_ = 0.0;
  double actuator_ = 0.0;
  double floor_value_ = 0.0;
  bool in_lock_ = true;
  GaussianSource gauss_;
};

LockResult close_loop(const Eigen::VectorXd& open_phase, double sample_rate,
                      const ServoConfig& config, std::uint64_t seed);

/// Linearised disturbance-to-residual transfer S = 1 / (1 + P C) of the
/// discrete loop, P = a z^-1 / (1 - (1 - a) z^-1), C = Kp + Ki T / (1 - z^-1).
std::complex<double> loop_sensitivity(const ServoConfig& config, double frequency);

/// Peak-to-peak fringe signal over phase noise in bandwidth B: 2 / (density sqrt(B)).
double snr_ceiling(double phase_noise_density, double bandwidth);

}  // namespace mzd
