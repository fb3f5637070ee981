#include "mzdetect/signal_chain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mzdetect/errors.hpp"

namespace mzd {

namespace {

constexpr std::size_t kBlock = 4096;

std::complex<double> first_harmonic(const SpectralField& f) {
  std::complex<double> c1 = 0.0;
  for (int n = -f.max_order(); n < f.max_order(); ++n)
    c1 += f.amplitude(n + 1) * std::conj(f.amplitude(n));
  return c1;
}

}  // namespace

void ChainSettings::validate() const {
  if (atoms_present) cloud.validate();
  probe.validate();
  interferometer.validate();
  detector_a.validate();
  detector_b.validate();
  noise.validate();
  using detail::require;
  require<InvalidConfig>(modulation_depth >= 0.0, "modulation depth must be >= 0");
  require<InvalidConfig>(modulation_frequency > 0.0, "modulation frequency must be > 0");
  require<InvalidConfig>(sideband_cutoff >= 1, "sideband cutoff must be >= 1");
  require<InvalidConfig>(sample_rate > 0.0, "sample rate must be > 0");
  lockin.validate(sample_rate);
  const int order = significant_sideband_order(modulation_depth, sideband_cutoff);
  require<InvalidConfig>(sample_rate > 2.0 * order * modulation_frequency,
                         "sample rate is below twice the highest significant sideband beat (" +
                             std::to_string(order) + " x modulation frequency)");
}

int significant_sideband_order(double depth, int cutoff, double threshold) {
  int order = 1;
  for (int n = 1; n <= cutoff; ++n) {
    const double j = bessel_j(n, depth);
    if (j * j > threshold) order = n;
  }
  return order;
}

void configure_powers(ChainSettings& s, double lo_power, double probe_power) {
  detail::require<InvalidInput>(lo_power >= 0.0 && probe_power >= 0.0, "powers must be >= 0");
  const InterferometerSpec& ifo = s.interferometer;
  ifo.validate();
  detail::require<InfeasibleDesign>(lo_power == 0.0 || ifo.lo_arm_loss > 0.0,
                                    "LO arm transmits no light");
  const double rho = ifo.splitter_ratio;
  double laser = lo_power > 0.0 ? lo_power / ((1.0 - rho) * ifo.lo_arm_loss) : 0.0;

  double k = 0.0;
  if (s.atoms_present) k = optical_response(s.cloud, s.probe).optical_depth;
  const double kept = 1.0 - modulation_tail_power(s.modulation_depth, s.sideband_cutoff);
  double attenuation = 0.0;
  if (probe_power > 0.0) {
    if (laser == 0.0) laser = probe_power / (rho * std::exp(-k) * kept);
    attenuation = probe_power / (rho * laser * std::exp(-k) * kept);
    if (attenuation > 1.0 + 1e-12) {
      throw InfeasibleDesign("probe power " + std::to_string(probe_power) +
                             " W needs more light than the laser sends into the probe arm");
    }
    attenuation = std::min(attenuation, 1.0);
  }
  s.probe.input_power = laser;
  s.interferometer.probe_attenuation = attenuation;
}

SignalChain::SignalChain(const ChainSettings& settings) : settings_(settings) {
  settings_.validate();
  response_ = settings_.atoms_present ? optical_response(settings_.cloud, settings_.probe)
                                      : OpticalResponse::vacuum();
  const double w = kTwoPi * settings_.modulation_frequency;
  const int grid = settings_.sideband_cutoff;
  const auto laser = SpectralField::carrier(settings_.probe.input_power, grid, w);
  arms_ = propagate_arms(laser, SpectralField::vacuum(grid, w), settings_.interferometer,
                         response_, settings_.modulation_depth, grid);

  // Find a whole number of modulation periods spanning an integer sample count.
  const double ratio = settings_.modulation_frequency / settings_.sample_rate;
  for (int q = 1; q <= 4096; ++q) {
    const double cycles = ratio * q;
    if (std::abs(cycles - std::round(cycles)) < 1e-9 * q) {
      period_samples_ = q;
      break;
    }
  }
  if (period_samples_ > 0) {
    const auto [a0, b0] = ports(0.0);
    const auto [a1, b1] = ports(kPi / 2.0);
    const auto [a2, b2] = ports(kPi);
    for (PortTable* t : {&table_a_, &table_b_}) {
      t->c.resize(period_samples_);
      t->dc.resize(period_samples_);
      t->ds.resize(period_samples_);
    }
    for (int i = 0; i < period_samples_; ++i) {
      double cycles = ratio * i;
      cycles -= std::floor(cycles);
      const double theta = kTwoPi * cycles;
      auto fill = [&](PortTable& t, const OutputPort& p0, const OutputPort& p1,
                      const OutputPort& p2) {
        const double v0 = p0.power_at(theta), v1 = p1.power_at(theta), v2 = p2.power_at(theta);
        t.c[i] = 0.5 * (v0 + v2);
        t.dc[i] = 0.5 * (v0 - v2);
        t.ds[i] = v1 - t.c[i];
      };
      fill(table_a_, a0, a1, a2);
      fill(table_b_, b0, b1, b2);
    }
  }
}

std::pair<OutputPort, OutputPort> SignalChain::ports(double gamma) const {
  return recombine(arms_, settings_.interferometer, gamma);
}

double SignalChain::expected_port_demodulated(int port, double gamma) const {
  const auto [a, b] = ports(gamma);
  const OutputPort& p = port == 0 ? a : b;
  const DetectorSpec& det = port == 0 ? settings_.detector_a : settings_.detector_b;
  const std::complex<double> c1 = first_harmonic(p.matched) + first_harmonic(p.orthogonal);
  return det.responsivity(settings_.probe.wavelength) * std::numbers::sqrt2 *
         std::real(c1 * std::polar(1.0, -settings_.lockin.reference_phase));
}

double SignalChain::expected_demodulated(double gamma) const {
  const double leak = common_mode_leakage(settings_.noise.common_mode_rejection);
  return (1.0 + leak / 2.0) * expected_port_demodulated(0, gamma) -
         (1.0 - leak / 2.0) * expected_port_demodulated(1, gamma);
}

double SignalChain::mean_port_power(int port, double gamma) const {
  const auto [a, b] = ports(gamma);
  return port == 0 ? a.power() : b.power();
}

double SignalChain::expected_white_noise(double gamma) const {
  const double leak = common_mode_leakage(settings_.noise.common_mode_rejection);
  const double wl = settings_.probe.wavelength;
  double variance = 0.0;
  for (int port = 0; port < 2; ++port) {
    const DetectorSpec& d = port == 0 ? settings_.detector_a : settings_.detector_b;
    const double weight = port == 0 ? 1.0 + leak / 2.0 : 1.0 - leak / 2.0;
    const double current = d.responsivity(wl) * mean_port_power(port, gamma);
    double density = 0.0;  // one-sided, A^2/Hz
    if (settings_.noise.shot) density += 2.0 * d.gain * kElementaryCharge * current;
    if (settings_.noise.nep) density += std::pow(d.responsivity(wl) * d.nep, 2);
    variance += weight * weight * density * settings_.lockin.bandwidth;
  }
  return std::sqrt(variance);
}

ChainOutput SignalChain::run(const ChainRun& run) const {
  detail::require<InvalidConfig>(run.duration > 0.0, "run duration must be > 0");
  detail::require<InvalidConfig>(run.control_rate > 0.0 && run.control_rate <= settings_.sample_rate,
                                 "control rate must lie in (0, sample rate]");
  const double fs = settings_.sample_rate;
  const auto total = static_cast<std::uint64_t>(std::llround(run.duration * fs));
  const auto stride = static_cast<std::uint64_t>(std::max(1.0, std::round(fs / run.control_rate)));
  const double wl = settings_.probe.wavelength;

  Detector det_a(settings_.detector_a, settings_.noise, wl, fs, derive_seed(run.seed, 1));
  Detector det_b(settings_.detector_b, settings_.noise, wl, fs, derive_seed(run.seed, 2));
  NoiseConfig shared = settings_.noise;
  shared.rin_seed = derive_seed(run.seed, 3, settings_.noise.rin_seed);
  IntensityNoiseSource rin_source(shared, fs);
  LockIn lockin(settings_.lockin, fs);

  ChainOutput out;
  out.sample_rate = fs;
  const auto keep_raw = static_cast<std::uint64_t>(std::max<Eigen::Index>(0, run.raw_samples));
  out.raw_balanced.resize(static_cast<Eigen::Index>(std::min(keep_raw, total)));

  std::vector<double> pa(kBlock), pb(kBlock), ia(kBlock), ib(kBlock), bal(kBlock), rin;
  if (settings_.noise.intensity) rin.resize(kBlock);
  const double leak = common_mode_leakage(settings_.noise.common_mode_rejection);
  const double ratio = settings_.modulation_frequency / fs;

  double gamma = 0.0, cg = 1.0, sg = 0.0;
  double mean_a = 0.0, mean_b = 0.0;
  std::uint64_t n = 0;
  while (n < total) {
    const std::size_t len = static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, total - n));
    for (std::size_t i = 0; i < len; ++i) {
      const std::uint64_t idx = n + i;
      if (idx % stride == 0) {
        gamma = run.gamma ? run.gamma(idx / stride) : settings_.interferometer.operating_phase;
        cg = std::cos(gamma);
        sg = std::sin(gamma);
      }
      if (period_samples_ > 0) {
        const auto k = static_cast<std::size_t>(idx % static_cast<std::uint64_t>(period_samples_));
        pa[i] = table_a_.c[k] + cg * table_a_.dc[k] + sg * table_a_.ds[k];
        pb[i] = table_b_.c[k] + cg * table_b_.dc[k] + sg * table_b_.ds[k];
      } else {
        double cycles = static_cast<double>(idx) * ratio;
        cycles -= std::floor(cycles);
        const auto [a, b] = ports(gamma);
        pa[i] = a.power_at(kTwoPi * cycles);
        pb[i] = b.power_at(kTwoPi * cycles);
      }
      // Round-off can leave a dark port a hair below zero.
      pa[i] = std::max(pa[i], 0.0);
      pb[i] = std::max(pb[i], 0.0);
      mean_a += pa[i];
      mean_b += pb[i];
    }
    const std::span<double> rin_block =
        rin.empty() ? std::span<double>() : std::span<double>(rin.data(), len);
    if (!rin.empty()) rin_source.generate(rin_block);
    det_a.process({pa.data(), len}, rin_block, {ia.data(), len});
    det_b.process({pb.data(), len}, rin_block, {ib.data(), len});
    for (std::size_t i = 0; i < len; ++i)
      bal[i] = (1.0 + leak / 2.0) * ia[i] - (1.0 - leak / 2.0) * ib[i];
    for (std::size_t i = 0; i < len && n + i < keep_raw; ++i)
      out.raw_balanced(static_cast<Eigen::Index>(n + i)) = bal[i];
    lockin.process({bal.data(), len});
    n += len;
  }
  out.demodulated = std::move(lockin).finish();

  mean_a /= static_cast<double>(total);
  mean_b /= static_cast<double>(total);
  auto check = [&](double p, const DetectorSpec& d, const char* name) {
    if (p < d.power_range_low || p > d.power_range_high) {
      out.warnings.push_back(std::string("detector ") + name + ": mean power " +
                             std::to_string(p) + " W is outside the shot-noise-limited range");
    }
  };
  check(mean_a, settings_.detector_a, "a");
  check(mean_b, settings_.detector_b, "b");
  return out;
}

}  // namespace mzd
