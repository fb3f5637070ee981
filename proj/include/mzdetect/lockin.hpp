#pragma once

// Software lock-in: mix with sqrt(2) cos(w_ref t + phase), low-pass to the
// detection bandwidth, decimate. A tone A cos(w_ref t + theta) comes out as
// the dc level (A / sqrt 2) cos(theta - phase), i.e. its rms value.

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <span>
#include <vector>

#include "mzdetect/detection.hpp"

namespace mzd {

struct LockInConfig {
  double reference_frequency = 2.5e6;  // Hz
  double reference_phase = 0.0;        // rad
  double bandwidth = 1e3;  // Hz, one-sided equivalent noise bandwidth of the low-pass
  int filter_order = 4;
  int output_sample_decimation = 1;

  void validate() const;
  void validate(double sample_rate) const;

  /// Output samples discarded before rms estimates: 10 / B.
  double settling_time() const { return 10.0 / bandwidth; }
};

/// Butterworth low-pass (bilinear, cascaded second-order sections) whose
/// cutoff is tuned so the one-sided equivalent noise bandwidth equals the
/// requested value at the given sample rate. Unity dc gain.
class LowPassFilter {
 public:
  LowPassFilter(int order, double noise_bandwidth, double sample_rate);

  double operator()(double x);
  void reset();

  int order() const { return order_; }
  double cutoff_frequency() const { return cutoff_; }  // -3 dB, Hz
  double noise_bandwidth() const;                      // Hz, from the realised coefficients
  double magnitude(double frequency) const;            // |H(f)|

 private:
  struct Section {
    std::array<double, 3> b;
    std::array<double, 2> a;  // a1, a2 (a0 = 1)
    double dc = 1.0;          // 1 + a1 + a2
    double s1 = 0.0, s2 = 0.0;
  };
  void design(double cutoff);

  int order_;
  double sample_rate_;
  double cutoff_ = 0.0;
  std::vector<Section> sections_;
};

struct DemodulatedTrace {
  Eigen::VectorXd in_phase;    // A
  Eigen::VectorXd quadrature;  // A, diagnostic
  double sample_rate = 0.0;    // Hz, after decimation
  double settling_time = 0.0;  // s

  double time(Eigen::Index i) const { return static_cast<double>(i) / sample_rate; }
  Eigen::Index settled_begin() const;
};

/// Streaming lock-in. Feed input blocks in order; decimated outputs accumulate.
class LockIn {
 public:
  LockIn(const LockInConfig& config, double sample_rate);

  void process(std::span<const double> input);
  DemodulatedTrace finish() &&;

  double output_rate() const { return sample_rate_ / config_.output_sample_decimation; }

 private:
  LockInConfig config_;
  double sample_rate_;
  double cycles_per_sample_;
  LowPassFilter filter_i_, filter_q_;
  std::uint64_t index_ = 0;
  std::complex<double> phasor_;
  std::vector<double> out_i_, out_q_;
};

DemodulatedTrace demodulate(const PhotocurrentTrace& trace, const LockInConfig& config);

/// Standard deviation of the settled in-phase output.
double noise_floor(const DemodulatedTrace& demodulated);
double noise_floor(const PhotocurrentTrace& trace, const LockInConfig& config);

/// Mean of the settled in-phase output.
double settled_mean(const DemodulatedTrace& demodulated);

}  // namespace mzd
