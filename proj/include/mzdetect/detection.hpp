#pragma once

// Photodiode model: optical power in, photocurrent out, with shot noise
// (Gaussian approximation), white NEP noise, 1/f electronic noise and laser
// intensity noise that is common to every detector fed by the same laser.

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mzdetect/random.hpp"

namespace mzd {

struct DetectorSpec {
  double quantum_efficiency = 0.72;
  double nep = 7e-12;  // W/sqrt(Hz)
  double gain = 1.0;   // aggregate readout gain alpha, A/A
  double one_over_f_corner = 500e3;  // Hz
  double shot_noise_band_low = 0.5e6;   // Hz
  double shot_noise_band_high = 10e6;   // Hz
  double power_range_low = 70e-6;  // W
  double power_range_high = 3e-3;  // W

  void validate() const;

  /// Mean photocurrent per watt, alpha eta e / (h nu).
  double responsivity(double wavelength) const;
};

struct NoiseConfig {
  bool shot = true;
  bool nep = true;
  bool flicker = true;
  bool intensity = true;

  double intensity_noise_rin = 1e-7;  // relative intensity noise density, 1/sqrt(Hz)
  double rin_tone_frequency = 0.0;    // Hz; 0 disables the injected tone
  double rin_tone_dbc = -std::numeric_limits<double>::infinity();
  std::uint64_t rin_seed = 0x5eedu;   // shared by every detector on the laser
  double common_mode_rejection = 50.0;  // dB
  double flicker_low_frequency = 10.0;  // Hz, lowest octave of the 1/f bank

  static NoiseConfig none() {
    NoiseConfig n;
    n.shot = n.nep = n.flicker = n.intensity = false;
    return n;
  }
  static NoiseConfig shot_only() {
    NoiseConfig n = none();
    n.shot = true;
    return n;
  }

  void validate() const;
};

struct TimeSeries {
  Eigen::VectorXd samples;
  double sample_rate = 0.0;  // Hz

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct PhotocurrentTrace {
  Eigen::VectorXd samples;  // A
  double sample_rate = 0.0;  // Hz
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Relative laser intensity fluctuation r(t): white RIN plus an optional tone.
/// Every detector fed by the same laser sees the same realisation.
class IntensityNoiseSource {
 public:
  IntensityNoiseSource(const NoiseConfig& noise, double sample_rate);

  void generate(std::span<double> out);

 private:
  double sigma_ = 0.0;
  double tone_amplitude_ = 0.0;
  double tone_step_ = 0.0;
  std::uint64_t index_ = 0;
  bool enabled_ = false;
  GaussianSource gauss_;
};

/// 1/f noise as a bank of octave-spaced first-order (Lorentzian) sources whose
/// sum has one-sided density `level * corner / f` between the lowest octave
/// and the corner. Low octaves are updated at a reduced rate and held.
class FlickerNoise {
 public:
  FlickerNoise(double level, double corner, double low_frequency, double sample_rate,
               std::uint64_t seed);

  double next();
  std::size_t source_count() const { return sources_.size(); }

 private:
  struct Source {
    std::uint64_t stride;
    std::uint64_t countdown;
    double pole;
    double drive;
    double value;
  };
  std::vector<Source> sources_;
  GaussianSource gauss_;
};

/// Streaming photodetector. Deterministic given its construction arguments
/// and the sequence of blocks fed to it.
class Detector {
 public:
  Detector(const DetectorSpec& spec, const NoiseConfig& noise, double wavelength,
           double sample_rate, std::uint64_t seed);

  /// `rin` holds r(t) for the block or is empty when intensity noise is off.
  void process(std::span<const double> power, std::span<const double> rin,
               std::span<double> current);

  double responsivity() const { return responsivity_; }
  double white_noise_density() const;  // NEP floor, A^2/Hz

 private:
  DetectorSpec spec_;
  NoiseConfig noise_;
  double sample_rate_;
  double responsivity_;
  double shot_scale_;  // variance per sample per ampere of mean current
  double nep_variance_;
  GaussianSource gauss_;
  std::optional<FlickerNoise> flicker_;
};

/// Whole-trace form of Detector::process. The intensity noise realisation is
/// drawn from noise.rin_seed, so two detectors sharing a NoiseConfig see
/// correlated RIN while their shot and electronic noise stay independent.
PhotocurrentTrace photocurrent(const TimeSeries& power, const DetectorSpec& spec,
                               const NoiseConfig& noise, double wavelength, std::uint64_t seed);

/// Fraction of common-mode amplitude leaking through a balanced pair.
double common_mode_leakage(double rejection_db);

/// out = (1 + e/2) a - (1 - e/2) b with e the common-mode leakage: common
/// components are suppressed by `rejection_db`, anticorrelated ones double.
void balanced_subtract(std::span<const double> a, std::span<const double> b, double rejection_db,
                       std::span<double> out);

PhotocurrentTrace balanced_subtract(const PhotocurrentTrace& a, const PhotocurrentTrace& b,
                                    double rejection_db);

}  // namespace mzd
