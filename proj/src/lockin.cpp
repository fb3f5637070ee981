#include "mzdetect/lockin.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mzdetect/constants.hpp"
#include "mzdetect/errors.hpp"

namespace mzd {

void LockInConfig::validate() const {
  using detail::require;
  require<InvalidConfig>(bandwidth > 0.0, "lock-in bandwidth must be > 0");
  require<InvalidConfig>(bandwidth < reference_frequency,
                         "lock-in bandwidth must be below the reference frequency");
  require<InvalidConfig>(filter_order >= 1, "lock-in filter order must be >= 1");
  require<InvalidConfig>(output_sample_decimation >= 1, "output decimation must be >= 1");
}

void LockInConfig::validate(double sample_rate) const {
  validate();
  detail::require<InvalidConfig>(reference_frequency < sample_rate / 2.0,
                                 "reference frequency must be below the Nyquist frequency");
}

LowPassFilter::LowPassFilter(int order, double noise_bandwidth, double sample_rate)
    : order_(order), sample_rate_(sample_rate) {
  detail::require<InvalidConfig>(order >= 1, "filter order must be >= 1");
  detail::require<InvalidConfig>(noise_bandwidth > 0.0 && noise_bandwidth < sample_rate / 4.0,
                                 "filter bandwidth must lie in (0, fs/4)");
  // Analog Butterworth: ENBW / f_3dB = (pi / 2n) / sin(pi / 2n). Start there and
  // correct for the bilinear warping with a few fixed-point steps.
  const double x = kPi / (2.0 * order);
  double cutoff = noise_bandwidth * std::sin(x) / x;
  for (int iter = 0; iter < 6; ++iter) {
    design(cutoff);
    const double realised = this->noise_bandwidth();
    const double next = cutoff * noise_bandwidth / realised;
    if (std::abs(next - cutoff) <= 1e-13 * cutoff) break;
    detail::require<InvalidConfig>(next < 0.45 * sample_rate,
                                   "filter bandwidth too close to Nyquist");
    cutoff = next;
  }
  design(cutoff);
}

void LowPassFilter::design(double cutoff) {
  cutoff_ = cutoff;
  sections_.clear();
  const double fs2 = 2.0 * sample_rate_;
  const double warped = fs2 * std::tan(kPi * cutoff / sample_rate_);
  auto to_z = [&](std::complex<double> s) { return (1.0 + s / fs2) / (1.0 - s / fs2); };

  // Numerators are built from the rounded denominators, so the dc gain is 1.
  for (int k = 0; k < order_ / 2; ++k) {
    const double angle = kPi * (2.0 * k + order_ + 1) / (2.0 * order_);
    const std::complex<double> pole = to_z(warped * std::polar(1.0, angle));
    Section s;
    s.a = {-2.0 * pole.real(), std::norm(pole)};
    s.dc = 1.0 + s.a[0] + s.a[1];  // exact: both sums cancel
    s.b = {s.dc / 4.0, s.dc / 2.0, s.dc / 4.0};
    sections_.push_back(s);
  }
  if (order_ % 2 == 1) {
    const double pole = to_z(std::complex<double>(-warped, 0.0)).real();
    Section s;
    s.a = {-pole, 0.0};
    s.dc = 1.0 + s.a[0];
    s.b = {s.dc / 2.0, s.dc / 2.0, 0.0};
    sections_.push_back(s);
  }
}

double LowPassFilter::operator()(double x) {
  for (Section& s : sections_) {
    const double y = s.b[0] * x + s.s1;
    s.s1 = s.b[1] * x - s.a[0] * y + s.s2;
    s.s2 = s.b[2] * x - s.a[1] * y;
    x = y;
  }
  return x;
}

void LowPassFilter::reset() {
  for (Section& s : sections_) s.s1 = s.s2 = 0.0;
}

double LowPassFilter::noise_bandwidth() const {
  // Integral of |H|^2 over [0, fs/2] with f = fc tan(u), which flattens the passband edge.
  auto integrand = [this](double u) {
    const double c = std::cos(u);
    const double h = magnitude(cutoff_ * std::tan(u));
    return h * h * cutoff_ / (c * c);
  };
  const double top = std::atan(0.5 * sample_rate_ / cutoff_);
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, top, 10, 1e-10);
}

double LowPassFilter::magnitude(double frequency) const {
  // Denominators expanded about z = 1 to avoid cancellation for poles near the unit circle.
  const double w = kTwoPi * frequency / sample_rate_;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const double half = std::sin(0.5 * w);
  const std::complex<double> z1m1(-2.0 * half * half, -std::sin(w));  // z^-1 - 1
  const std::complex<double> z2m1 = z1m1 * (z1 + 1.0);                // z^-2 - 1
  std::complex<double> h = 1.0;
  for (const Section& s : sections_) {
    const std::complex<double> den = s.dc + s.a[0] * z1m1 + s.a[1] * z2m1;
    h *= (s.b[0] + s.b[1] * z1 + s.b[2] * z1 * z1) / den;
  }
  return std::abs(h);
}

Eigen::Index DemodulatedTrace::settled_begin() const {
  return static_cast<Eigen::Index>(std::ceil(settling_time * sample_rate));
}

LockIn::LockIn(const LockInConfig& config, double sample_rate)
    : config_(config),
      sample_rate_(sample_rate),
      cycles_per_sample_(config.reference_frequency / sample_rate),
      filter_i_(config.filter_order, config.bandwidth, sample_rate),
      filter_q_(config.filter_order, config.bandwidth, sample_rate) {
  config_.validate(sample_rate);
}

void LockIn::process(std::span<const double> input) {
  constexpr double kRoot2 = std::numbers::sqrt2;
  const auto decimation = static_cast<std::uint64_t>(config_.output_sample_decimation);
  const std::complex<double> step = std::polar(1.0, kTwoPi * cycles_per_sample_);
  for (std::size_t k = 0; k < input.size(); ++k, ++index_) {
    if (index_ % 1024 == 0) {
      double cycles = static_cast<double>(index_) * cycles_per_sample_;
      cycles -= std::floor(cycles);
      phasor_ = std::polar(1.0, kTwoPi * cycles + config_.reference_phase);
    } else {
      phasor_ *= step;
    }
    const std::complex<double> phasor = phasor_;
    const double x = kRoot2 * input[k];
    const double i = filter_i_(x * phasor.real());
    const double q = filter_q_(-x * phasor.imag());
    if (index_ % decimation == 0) {
      out_i_.push_back(i);
      out_q_.push_back(q);
    }
  }
}

DemodulatedTrace LockIn::finish() && {
  DemodulatedTrace out;
  out.in_phase = Eigen::Map<const Eigen::VectorXd>(out_i_.data(), static_cast<Eigen::Index>(out_i_.size()));
  out.quadrature = Eigen::Map<const Eigen::VectorXd>(out_q_.data(), static_cast<Eigen::Index>(out_q_.size()));
  out.sample_rate = output_rate();
  out.settling_time = config_.settling_time();
  return out;
}

DemodulatedTrace demodulate(const PhotocurrentTrace& trace, const LockInConfig& config) {
  LockIn lockin(config, trace.sample_rate);
  lockin.process(std::span(trace.samples.data(), trace.samples.size()));
  return std::move(lockin).finish();
}

namespace {

Eigen::VectorXd settled_samples(const DemodulatedTrace& d) {
  const Eigen::Index begin = d.settled_begin();
  const Eigen::Index needed = begin + static_cast<Eigen::Index>(std::ceil(d.settling_time * d.sample_rate));
  if (d.in_phase.size() < std::max<Eigen::Index>(needed, begin + 2)) {
    throw InsufficientData("demodulated trace is shorter than 20 filter time constants (20/B)");
  }
  return d.in_phase.tail(d.in_phase.size() - begin);
}

}  // namespace

double noise_floor(const DemodulatedTrace& demodulated) {
  const Eigen::VectorXd x = settled_samples(demodulated);
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
}

double noise_floor(const PhotocurrentTrace& trace, const LockInConfig& config) {
  return noise_floor(demodulate(trace, config));
}

double settled_mean(const DemodulatedTrace& demodulated) {
  return settled_samples(demodulated).mean();
}

}  // namespace mzd
