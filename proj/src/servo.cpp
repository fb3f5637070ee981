#include "mzdetect/servo.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/FFT>

#include "mzdetect/errors.hpp"

namespace mzd {

void VibrationSpectrum::validate() const {
  for (const VibrationTone& t : tones) {
    detail::require<InvalidConfig>(t.frequency > 0.0, "vibration tone frequency must be > 0");
    detail::require<InvalidConfig>(t.rms_amplitude >= 0.0, "vibration amplitude must be >= 0");
  }
  detail::require<InvalidConfig>(broadband_density >= 0.0, "broadband density must be >= 0");
  detail::require<InvalidConfig>(broadband_density == 0.0 || broadband_cutoff > 0.0,
                                 "broadband noise needs a positive cutoff");
}

double VibrationSpectrum::highest_frequency() const {
  double f = broadband_density > 0.0 ? broadband_cutoff : 0.0;
  for (const VibrationTone& t : tones) f = std::max(f, t.frequency);
  return f;
}

bool VibrationSpectrum::empty() const {
  return broadband_density == 0.0 &&
         std::all_of(tones.begin(), tones.end(),
                     [](const VibrationTone& t) { return t.rms_amplitude == 0.0; });
}

VibrationSpectrum VibrationSpectrum::laboratory() {
  VibrationSpectrum s;
  s.tones = {{50.0, 0.05}, {120.0, 0.02}};
  s.broadband_density = 1e-3;
  s.broadband_cutoff = 1e3;
  return s;
}

void ServoConfig::validate() const {
  using detail::require;
  require<InvalidConfig>(proportional_gain >= 0.0 && integral_gain >= 0.0,
                         "servo gains must be >= 0");
  require<InvalidConfig>(residual_floor >= 0.0, "residual floor must be >= 0");
  require<InvalidConfig>(floor_bandwidth > 0.0, "floor bandwidth must be > 0");
  require<InvalidConfig>(piezo_range > 0.0, "piezo range must be > 0");
  require<InvalidConfig>(loop_rate > 0.0, "loop rate must be > 0");
  require<InvalidConfig>(piezo_bandwidth > 0.0, "piezo bandwidth must be > 0");
}

ServoConfig ServoConfig::critically_damped(double proportional_gain, double piezo_bandwidth,
                                           double loop_rate) {
  ServoConfig c;
  c.proportional_gain = proportional_gain;
  c.piezo_bandwidth = piezo_bandwidth;
  c.loop_rate = loop_rate;
  const double wp = kTwoPi * piezo_bandwidth;
  c.integral_gain = wp * (1.0 + proportional_gain) * (1.0 + proportional_gain) / 4.0;
  return c;
}

double LockResult::fraction_in_lock() const {
  const auto skip = std::min(in_lock.size(), acquisition_samples);
  if (skip == in_lock.size()) return 1.0;
  return static_cast<double>(std::count(in_lock.begin() + static_cast<std::ptrdiff_t>(skip), in_lock.end(), true)) /
         static_cast<double>(in_lock.size() - skip);
}

namespace {

// Smallest 2^a 3^b 5^c >= n, which kissfft transforms quickly.
Eigen::Index smooth_size(Eigen::Index n) {
  Eigen::Index best = 1;
  while (best < n) best *= 2;
  for (Eigen::Index p5 = 1; p5 < best; p5 *= 5)
    for (Eigen::Index p3 = p5; p3 < best; p3 *= 3) {
      Eigen::Index v = p3;
      while (v < n) v *= 2;
      best = std::min(best, v);
    }
  return best;
}

}  // namespace

Eigen::VectorXd open_loop_phase(const VibrationSpectrum& spectrum, double duration,
                                double sample_rate, std::uint64_t seed, double static_phase) {
  spectrum.validate();
  detail::require<InvalidConfig>(sample_rate > 0.0 && duration > 0.0,
                                 "duration and sample rate must be > 0");
  detail::require<InvalidConfig>(sample_rate > 2.0 * spectrum.highest_frequency(),
                                 "vibration spectrum exceeds the Nyquist frequency");
  const auto n = static_cast<Eigen::Index>(std::llround(duration * sample_rate));
  Eigen::VectorXd phase = Eigen::VectorXd::Constant(n, static_phase);
  GaussianSource gauss(seed);

  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  for (const VibrationTone& t : spectrum.tones) {
    const double offset = uniform(gauss.engine());
    const double peak = std::sqrt(2.0) * t.rms_amplitude;
    const double step = t.frequency / sample_rate;
    for (Eigen::Index i = 0; i < n; ++i) {
      double cycles = static_cast<double>(i) * step;
      cycles -= std::floor(cycles);
      phase(i) += peak * std::cos(kTwoPi * cycles + offset);
    }
  }

  if (spectrum.broadband_density > 0.0) {
    const Eigen::Index m = smooth_size(n);
    const double bin = sample_rate / static_cast<double>(m);
    const auto last = std::min<Eigen::Index>(
        m / 2 - 1, static_cast<Eigen::Index>(std::floor(spectrum.broadband_cutoff / bin)));
    // E|X_k|^2 = D^2 fs m / 2 gives one-sided density D after the 1/m inverse.
    const double sigma = spectrum.broadband_density * std::sqrt(sample_rate * m / 4.0);
    Eigen::VectorXcd spectrum_bins = Eigen::VectorXcd::Zero(m);
    for (Eigen::Index k = 1; k <= last; ++k) {
      const std::complex<double> x(sigma * gauss(), sigma * gauss());
      spectrum_bins(k) = x;
      spectrum_bins(m - k) = std::conj(x);
    }
    Eigen::FFT<double> fft;
    Eigen::VectorXcd time(m);
    fft.inv(time, spectrum_bins);
    phase += time.head(n).real();
  }
  return phase;
}

ServoLoop::ServoLoop(const ServoConfig& config, double sample_rate, std::uint64_t seed)
    : config_(config), gauss_(seed) {
  config_.validate();
  detail::require<InvalidConfig>(config_.loop_rate <= sample_rate * (1.0 + 1e-12),
                                 "servo loop rate must not exceed the sample rate");
  stride_ = std::max(1, static_cast<int>(std::lround(sample_rate / config_.loop_rate)));
  period_ = static_cast<double>(stride_) / sample_rate;
  alpha_ = 1.0 - std::exp(-kTwoPi * config_.piezo_bandwidth * period_);
  // Held white noise: one-sided density sigma^2 * 2 / rate at low frequency.
  floor_stride_ = std::max(
      1, static_cast<int>(std::lround(config_.loop_rate / (2.0 * config_.floor_bandwidth))));
  const double floor_rate = 1.0 / (period_ * floor_stride_);
  floor_sigma_ = config_.residual_floor * std::sqrt(floor_rate / 2.0);
}

double ServoLoop::step(double open_phase) {
  // The phase seen during this sample uses the actuator from the previous update.
  const double out = open_phase + actuator_ + floor_value_;
  if (countdown_ == 0) {
    countdown_ = stride_;
    const double locked = open_phase + actuator_;
    const double deviation = locked - config_.setpoint;
    const double error = std::sin(deviation);
    const double range = config_.piezo_range;
    integrator_ = std::clamp(integrator_ + config_.integral_gain * error * period_, -range, range);
    const double command = -(config_.proportional_gain * error + integrator_);
    const double wrapped = std::remainder(deviation, kTwoPi);
    in_lock_ = std::abs(command) <= range && std::abs(wrapped) < kPi / 2.0;
    actuator_ += alpha_ * (std::clamp(command, -range, range) - actuator_);
    if (floor_countdown_ == 0) {
      floor_countdown_ = floor_stride_;
      if (floor_sigma_ > 0.0) floor_value_ = floor_sigma_ * gauss_();
    }
    --floor_countdown_;
  }
  --countdown_;
  return out;
}

LockResult close_loop(const Eigen::VectorXd& open_phase, double sample_rate,
                      const ServoConfig& config, std::uint64_t seed) {
  ServoLoop loop(config, sample_rate, seed);
  LockResult r;
  r.sample_rate = sample_rate;
  r.locked_phase.resize(open_phase.size());
  r.in_lock.resize(static_cast<std::size_t>(open_phase.size()));
  r.acquisition_samples = static_cast<std::size_t>(std::ceil(config.acquisition_time() * sample_rate));
  for (Eigen::Index i = 0; i < open_phase.size(); ++i) {
    r.locked_phase(i) = loop.step(open_phase(i));
    r.in_lock[static_cast<std::size_t>(i)] = loop.in_lock();
  }
  const bool disturbed =
      open_phase.size() > 0 &&
      (open_phase.array() != config.setpoint).any();
  const bool no_gain = config.proportional_gain == 0.0 && config.integral_gain == 0.0;
  r.lock_failure = (no_gain && disturbed) || r.fraction_in_lock() < 1.0;
  return r;
}

std::complex<double> loop_sensitivity(const ServoConfig& config, double frequency) {
  config.validate();
  const double t = 1.0 / config.loop_rate;
  const double a = 1.0 - std::exp(-kTwoPi * config.piezo_bandwidth * t);
  const std::complex<double> zi = std::polar(1.0, -kTwoPi * frequency * t);
  const std::complex<double> plant = a * zi / (1.0 - (1.0 - a) * zi);
  const std::complex<double> controller =
      config.proportional_gain + config.integral_gain * t / (1.0 - zi);
  return 1.0 / (1.0 + plant * controller);
}

double snr_ceiling(double phase_noise_density, double bandwidth) {
  detail::require<InvalidInput>(phase_noise_density > 0.0 && bandwidth > 0.0,
                                "density and bandwidth must be > 0");
  return 2.0 / (phase_noise_density * std::sqrt(bandwidth));
}

}  // namespace mzd
