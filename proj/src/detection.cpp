#include "mzdetect/detection.hpp"

#include <cmath>
#include <numbers>

#include "mzdetect/atom_optics.hpp"
#include "mzdetect/constants.hpp"
#include "mzdetect/errors.hpp"

namespace mzd {

void DetectorSpec::validate() const {
  using detail::require;
  require<InvalidInput>(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0,
                        "quantum_efficiency must lie in (0, 1]");
  require<InvalidInput>(nep >= 0.0, "nep must be >= 0");
  require<InvalidInput>(gain > 0.0, "detector gain must be > 0");
  require<InvalidInput>(one_over_f_corner >= 0.0, "1/f corner must be >= 0");
  require<InvalidInput>(shot_noise_band_low <= shot_noise_band_high,
                        "shot-noise band must be ordered");
  require<InvalidInput>(power_range_low <= power_range_high, "power range must be ordered");
}

double DetectorSpec::responsivity(double wavelength) const {
  return gain * quantum_efficiency * kElementaryCharge / photon_energy(wavelength);
}

void NoiseConfig::validate() const {
  using detail::require;
  require<InvalidInput>(intensity_noise_rin >= 0.0, "intensity_noise_rin must be >= 0");
  require<InvalidInput>(common_mode_rejection >= 0.0, "common_mode_rejection must be >= 0 dB");
  require<InvalidInput>(rin_tone_frequency >= 0.0, "rin tone frequency must be >= 0");
  require<InvalidInput>(flicker_low_frequency > 0.0, "flicker low frequency must be > 0");
}

IntensityNoiseSource::IntensityNoiseSource(const NoiseConfig& noise, double sample_rate)
    : gauss_(noise.rin_seed) {
  enabled_ = noise.intensity;
  sigma_ = noise.intensity_noise_rin * std::sqrt(sample_rate / 2.0);
  if (noise.rin_tone_frequency > 0.0 && std::isfinite(noise.rin_tone_dbc)) {
    tone_amplitude_ = std::pow(10.0, noise.rin_tone_dbc / 20.0);
    tone_step_ = noise.rin_tone_frequency / sample_rate;
  }
}

void IntensityNoiseSource::generate(std::span<double> out) {
  for (double& r : out) {
    double v = 0.0;
    if (enabled_) {
      v = sigma_ * gauss_();
      if (tone_amplitude_ > 0.0) {
        const double cycles = static_cast<double>(index_) * tone_step_;
        v += tone_amplitude_ * std::cos(kTwoPi * (cycles - std::floor(cycles)));
      }
    }
    ++index_;
    r = v;
  }
}

FlickerNoise::FlickerNoise(double level, double corner, double low_frequency, double sample_rate,
                           std::uint64_t seed)
    : gauss_(seed) {
  // Sum of Lorentzians A / (f_k (1 + (f/f_k)^2)) over octaves ~ (A pi / (2 ln 2)) / f.
  const double amplitude = level * corner * 2.0 * std::numbers::ln2 / kPi;
  for (double f = low_frequency; f <= corner && f < sample_rate / 4.0; f *= 2.0) {
    Source s{};
    s.stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(sample_rate / (16.0 * f)));
    const double rate = sample_rate / static_cast<double>(s.stride);
    s.pole = std::exp(-kTwoPi * f / rate);
    const double drive_variance = amplitude * rate * (1.0 - s.pole) * (1.0 - s.pole) / (2.0 * f);
    s.drive = std::sqrt(drive_variance);
    s.value = std::sqrt(drive_variance / (1.0 - s.pole * s.pole)) * gauss_();
    s.countdown = s.stride;
    sources_.push_back(s);
  }
}

double FlickerNoise::next() {
  double sum = 0.0;
  for (Source& s : sources_) {
    if (--s.countdown == 0) {
      s.countdown = s.stride;
      s.value = s.pole * s.value + s.drive * gauss_();
    }
    sum += s.value;
  }
  return sum;
}

Detector::Detector(const DetectorSpec& spec, const NoiseConfig& noise, double wavelength,
                   double sample_rate, std::uint64_t seed)
    : spec_(spec), noise_(noise), sample_rate_(sample_rate), gauss_(seed) {
  spec_.validate();
  noise_.validate();
  detail::require<InvalidInput>(sample_rate > 0.0, "sample rate must be > 0");
  responsivity_ = spec_.responsivity(wavelength);
  // One-sided density 2 e I_mean -> per-sample variance e I_mean f_s (gain applied once more
  // because the mean current already carries one factor of alpha).
  shot_scale_ = spec_.gain * kElementaryCharge * sample_rate;
  nep_variance_ = white_noise_density() * sample_rate / 2.0;
  if (noise_.flicker && spec_.one_over_f_corner > 0.0 && white_noise_density() > 0.0) {
    flicker_.emplace(white_noise_density(), spec_.one_over_f_corner, noise_.flicker_low_frequency,
                     sample_rate, derive_seed(seed, 0xf1c4));
  }
}

double Detector::white_noise_density() const {
  const double density = responsivity_ * spec_.nep;
  return density * density;
}

void Detector::process(std::span<const double> power, std::span<const double> rin,
                       std::span<double> current) {
  detail::require<InvalidInput>(current.size() == power.size(), "output block size mismatch");
  detail::require<InvalidInput>(rin.empty() || rin.size() == power.size(),
                                "intensity-noise block size mismatch");
  const bool shot = noise_.shot;
  const double nep_var = noise_.nep ? nep_variance_ : 0.0;
  const bool any_white = shot || nep_var > 0.0;
  const bool use_rin = noise_.intensity && !rin.empty();

  for (std::size_t i = 0; i < power.size(); ++i) {
    const double p = power[i];
    if (!(p >= 0.0)) throw InvalidInput("optical power samples must be >= 0");
    const double mean = responsivity_ * p;
    double value = use_rin ? mean * (1.0 + rin[i]) : mean;
    if (any_white) {
      const double variance = (shot ? shot_scale_ * mean : 0.0) + nep_var;
      value += std::sqrt(variance) * gauss_();
    }
    if (flicker_) value += flicker_->next();
    current[i] = value;
  }
}

PhotocurrentTrace photocurrent(const TimeSeries& power, const DetectorSpec& spec,
                               const NoiseConfig& noise, double wavelength, std::uint64_t seed) {
  Detector detector(spec, noise, wavelength, power.sample_rate, seed);
  PhotocurrentTrace trace;
  trace.sample_rate = power.sample_rate;
  trace.seed = seed;
  trace.samples.resize(power.samples.size());

  std::vector<double> rin;
  if (noise.intensity) {
    rin.resize(static_cast<std::size_t>(power.samples.size()));
    IntensityNoiseSource(noise, power.sample_rate).generate(rin);
  }
  detector.process(std::span(power.samples.data(), power.samples.size()), rin,
                   std::span(trace.samples.data(), trace.samples.size()));

  if (power.samples.size() > 0) {
    const double mean_power = power.samples.mean();
    if (mean_power < spec.power_range_low || mean_power > spec.power_range_high) {
      trace.warnings.push_back("mean optical power " + std::to_string(mean_power) +
                               " W is outside the detector's shot-noise-limited range");
    }
  }
  return trace;
}

double common_mode_leakage(double rejection_db) {
  detail::require<InvalidInput>(rejection_db >= 0.0, "rejection must be >= 0 dB");
  return std::isinf(rejection_db) ? 0.0 : std::pow(10.0, -rejection_db / 20.0);
}

void balanced_subtract(std::span<const double> a, std::span<const double> b, double rejection_db,
                       std::span<double> out) {
  detail::require<InvalidInput>(a.size() == b.size() && out.size() == a.size(),
                                "balanced inputs must have equal length");
  const double leak = common_mode_leakage(rejection_db);
  const double ga = 1.0 + leak / 2.0, gb = 1.0 - leak / 2.0;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = ga * a[i] - gb * b[i];
}

PhotocurrentTrace balanced_subtract(const PhotocurrentTrace& a, const PhotocurrentTrace& b,
                                    double rejection_db) {
  detail::require<InvalidInput>(a.sample_rate == b.sample_rate,
                                "balanced inputs must share a sample rate");
  detail::require<InvalidInput>(a.samples.size() == b.samples.size(),
                                "balanced inputs must have equal length");
  PhotocurrentTrace out;
  out.sample_rate = a.sample_rate;
  out.seed = a.seed;
  out.samples.resize(a.samples.size());
  balanced_subtract(std::span(a.samples.data(), a.samples.size()),
                    std::span(b.samples.data(), b.samples.size()), rejection_db,
                    std::span(out.samples.data(), out.samples.size()));
  out.warnings = a.warnings;
  out.warnings.insert(out.warnings.end(), b.warnings.begin(), b.warnings.end());
  return out;
}

}  // namespace mzd
