#include "mzdetect/harness.hpp"

#include <algorithm>
#include <cmath>

#include "mzdetect/designer.hpp"
#include "mzdetect/errors.hpp"
#include "mzdetect/fitting.hpp"
#include "mzdetect/parallel.hpp"

namespace mzd {

double FitSummary::parameter(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return parameters[i];
  throw InvalidInput("fit has no parameter '" + name + "'");
}

double FitSummary::uncertainty(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return uncertainties[i];
  throw InvalidInput("fit has no parameter '" + name + "'");
}

const Eigen::VectorXd& ExperimentResult::column(const std::string& name) const {
  for (const auto& [key, values] : columns)
    if (key == name) return values;
  throw InvalidInput("result has no column '" + name + "'");
}

double ExperimentResult::scalar(const std::string& name) const {
  for (const auto& [key, value] : scalars)
    if (key == name) return value;
  throw InvalidInput("result has no scalar '" + name + "'");
}

void HarnessConfig::validate() const {
  using detail::require;
  chain.validate();
  require<InvalidConfig>(duration > 0.0, "duration must be > 0");
  require<InvalidConfig>(replicates >= 1, "replicates must be >= 1");
  require<InvalidConfig>(threads >= 1, "threads must be >= 1");
  require<InvalidConfig>(lo_power >= 0.0 && probe_power >= 0.0, "powers must be >= 0");
  require<InvalidConfig>(control_rate > 0.0 && control_rate <= chain.sample_rate,
                         "control rate must lie in (0, sample rate]");
  require<InvalidConfig>(loss_factor > 0.0 && loss_factor <= 1.0, "loss_factor must lie in (0, 1]");
  servo.validate();
  vibration.validate();
}

ChainSettings default_chain_settings() {
  ChainSettings s;
  s.probe.detuning = detuning_for_depth(0.01, s.cloud, s.probe.wavelength);
  s.modulation_depth = solve_modulation_depth(kDefaultModulationPenalty);
  s.lockin.reference_frequency = s.modulation_frequency;
  s.lockin.reference_phase = -kPi / 2.0;
  s.lockin.output_sample_decimation = 2500;
  // Probe-path loss and visibility whose product (0.77) is the aggregate
  // imperfection between the ideal small-signal SNR and the chain.
  s.interferometer.probe_arm_loss = 0.9;
  s.interferometer.mode_matching_visibility = 0.77 / std::sqrt(0.9);
  return s;
}

namespace {

FitSummary power_law_summary(const PowerLawFit& f) {
  return {"log10(y) = intercept + slope * log10(x)",
          {"slope", "intercept"},
          {f.slope, f.intercept},
          {f.slope_error, f.intercept_error}};
}

struct FringeData {
  Eigen::VectorXd gamma;
  Eigen::VectorXd demodulated;
  SineFit fit;
  std::vector<std::string> warnings;
};

FringeData fringe_replicate(const SignalChain& chain, const HarnessConfig& cfg, double range,
                            std::uint64_t seed) {
  const double ticks = cfg.duration * cfg.control_rate;
  ChainRun run;
  run.duration = cfg.duration;
  run.seed = seed;
  run.control_rate = cfg.control_rate;
  const double start = cfg.scan_start;
  run.gamma = [=](std::uint64_t k) { return start + range * static_cast<double>(k) / ticks; };
  ChainOutput out = chain.run(run);

  const DemodulatedTrace& d = out.demodulated;
  const Eigen::Index begin = d.settled_begin();
  detail::require<InsufficientData>(d.in_phase.size() - begin >= 16,
                                    "fringe scan too short after filter settling");
  FringeData f;
  const Eigen::Index n = d.in_phase.size() - begin;
  f.gamma.resize(n);
  // Output sample i holds the filtered value at time i / rate.
  for (Eigen::Index i = 0; i < n; ++i)
    f.gamma(i) = start + range * d.time(begin + i) / cfg.duration;
  f.demodulated = d.in_phase.tail(n);
  f.fit = fit_sine(f.gamma, f.demodulated, kTwoPi, true);
  f.warnings = std::move(out.warnings);
  return f;
}

// Fringe of the noiseless chain: E(gamma) = K sin(phi - gamma) + C.
double analytic_fringe_amplitude(const SignalChain& chain) {
  const double e0 = chain.expected_demodulated(0.0);
  const double e1 = chain.expected_demodulated(kPi / 2.0);
  const double e2 = chain.expected_demodulated(kPi);
  const double c = 0.5 * (e0 + e2);
  return std::hypot(e0 - c, e1 - c);
}

void append_unique(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& w : from)
    if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
}

}  // namespace

ExperimentResult run_noise_vs_power(const std::vector<double>& lo_powers,
                                    const HarnessConfig& cfg) {
  cfg.validate();
  detail::require<InvalidInput>(!lo_powers.empty(), "need at least one LO power");
  const std::size_t points = lo_powers.size();
  const auto reps = static_cast<std::size_t>(cfg.replicates);

  std::vector<SignalChain> chains;
  for (double p : lo_powers) {
    detail::require<InvalidInput>(p > 0.0, "LO powers must be > 0");
    ChainSettings s = cfg.chain;
    configure_powers(s, p, 0.0);
    chains.emplace_back(s);
  }

  Eigen::MatrixXd variances(reps, points);
  std::vector<std::vector<std::string>> warnings(points * reps);
  parallel_for(points * reps, cfg.threads, [&](std::size_t job) {
    const std::size_t i = job / reps, j = job % reps;
    ChainRun run;
    run.duration = cfg.duration;
    run.seed = derive_seed(cfg.seed, i, j);
    run.control_rate = cfg.control_rate;
    ChainOutput out = chains[i].run(run);
    const double sd = noise_floor(out.demodulated);
    variances(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = sd * sd;
    warnings[job] = std::move(out.warnings);
  });

  ExperimentResult r;
  r.name = "noise_vs_power";
  r.sweep_variable = "lo_power";
  r.sweep_unit = "W";
  r.measured_unit = "A";
  r.sweep_values = Eigen::Map<const Eigen::VectorXd>(lo_powers.data(), static_cast<Eigen::Index>(points));
  r.measured.resize(points);
  r.standard_error.resize(points);
  Eigen::VectorXd predicted(points), analytic(points);
  r.flagged.assign(points, false);
  DesignPoint unit;
  unit.bandwidth = cfg.chain.lockin.bandwidth;
  for (std::size_t i = 0; i < points; ++i) {
    const Estimate e = rms_from_variances(variances.col(static_cast<Eigen::Index>(i)));
    r.measured(i) = e.value;
    r.standard_error(i) = e.standard_error;
    unit.lo_power = lo_powers[i];
    predicted(i) = balanced_readout_currents(unit, cfg.chain.detector_a, 0.0,
                                             cfg.chain.probe.wavelength)
                       .shot_noise;
    analytic(i) = chains[i].expected_white_noise(cfg.chain.interferometer.operating_phase);
    for (std::size_t j = 0; j < reps; ++j) {
      if (!warnings[i * reps + j].empty()) r.flagged[i] = true;
      append_unique(r.warnings, warnings[i * reps + j]);
    }
  }
  r.columns = {{"shot_noise_prediction", predicted}, {"white_noise_prediction", analytic}};
  if (points >= 3) r.fit = power_law_summary(fit_power_law(r.sweep_values, r.measured));
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < reps; ++j) r.seeds.push_back(derive_seed(cfg.seed, i, j));
  return r;
}

ExperimentResult run_fringe_scan(double scan_range, const HarnessConfig& cfg) {
  cfg.validate();
  detail::require<InvalidInput>(scan_range > 0.0, "scan range must be > 0");
  ChainSettings s = cfg.chain;
  configure_powers(s, cfg.lo_power, cfg.probe_power);
  const SignalChain chain(s);
  const std::uint64_t seed = derive_seed(cfg.seed, 0, 0);
  FringeData f = fringe_replicate(chain, cfg, scan_range, seed);

  ExperimentResult r;
  r.name = "fringe_scan";
  r.sweep_variable = "gamma";
  r.sweep_unit = "rad";
  r.measured_unit = "A";
  r.sweep_values = f.gamma;
  r.measured = f.demodulated;
  r.standard_error = Eigen::VectorXd::Constant(f.gamma.size(), f.fit.residual_rms);
  Eigen::VectorXd fitted(f.gamma.size()), expected(f.gamma.size());
  for (Eigen::Index i = 0; i < f.gamma.size(); ++i) {
    fitted(i) = f.fit(f.gamma(i));
    expected(i) = chain.expected_demodulated(f.gamma(i));
  }
  r.columns = {{"fit", fitted}, {"expected", expected}};
  r.fit = {"A sin(2 pi (gamma - gamma0) / period) + C",
           {"amplitude", "gamma0", "offset", "period"},
           {f.fit.amplitude, f.fit.phase, f.fit.offset, f.fit.period},
           {f.fit.amplitude_error, f.fit.phase_error, f.fit.offset_error, f.fit.period_error}};
  const double bw = s.lockin.bandwidth;
  r.scalars = {
      {"calibration_A_per_rad", f.fit.amplitude},
      {"expected_amplitude", analytic_fringe_amplitude(chain)},
      {"residual_rms", f.fit.residual_rms},
      {"phase_noise_density", f.fit.amplitude > 0.0
                                  ? f.fit.residual_rms / (f.fit.amplitude * std::sqrt(bw))
                                  : 0.0},
  };
  r.seeds = {seed};
  r.flagged.assign(static_cast<std::size_t>(f.gamma.size()), false);
  r.warnings = f.warnings;
  if (scan_range < kTwoPi)
    r.warnings.push_back("scan covers less than one fringe: the sine fit is poorly constrained");
  return r;
}

ExperimentResult run_snr_vs_power(const std::vector<double>& probe_powers,
                                  const HarnessConfig& cfg) {
  cfg.validate();
  detail::require<InvalidInput>(!probe_powers.empty(), "need at least one probe power");
  const std::size_t points = probe_powers.size();
  const auto reps = static_cast<std::size_t>(cfg.replicates);

  std::vector<SignalChain> chains;
  for (double p : probe_powers) {
    detail::require<InvalidInput>(p >= 0.0, "probe powers must be >= 0");
    ChainSettings s = cfg.chain;
    configure_powers(s, cfg.lo_power, p);
    chains.emplace_back(s);
  }

  Eigen::MatrixXd snr = Eigen::MatrixXd::Zero(reps, points);
  std::vector<std::vector<std::string>> warnings(points * reps);
  parallel_for(points * reps, cfg.threads, [&](std::size_t job) {
    const std::size_t i = job / reps, j = job % reps;
    if (probe_powers[i] == 0.0) return;
    FringeData f = fringe_replicate(chains[i], cfg, cfg.scan_range, derive_seed(cfg.seed, i, j));
    snr(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
        f.fit.residual_rms > 0.0 ? f.fit.amplitude / f.fit.residual_rms : 0.0;
    warnings[job] = std::move(f.warnings);
  });

  ExperimentResult r;
  r.name = "snr_vs_power";
  r.sweep_variable = "probe_power";
  r.sweep_unit = "W";
  r.measured_unit = "1";
  r.sweep_values = Eigen::Map<const Eigen::VectorXd>(probe_powers.data(), static_cast<Eigen::Index>(points));
  r.measured.resize(points);
  r.standard_error.resize(points);
  r.flagged.assign(points, false);
  Eigen::VectorXd ideal(points), scaled(points), analytic(points);
  const double h_nu = photon_energy(cfg.chain.probe.wavelength);
  const double eta = cfg.chain.detector_a.quantum_efficiency;
  const double bw = cfg.chain.lockin.bandwidth;
  const double penalty = modulation_penalty(cfg.chain.modulation_depth);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < points; ++i) {
    const auto col = snr.col(static_cast<Eigen::Index>(i));
    if (reps >= 2) {
      const Estimate e = mean_estimate(col);
      r.measured(i) = e.value;
      r.standard_error(i) = e.standard_error;
    } else {
      r.measured(i) = col(0);
      r.standard_error(i) = 0.0;
    }
    ideal(i) = penalty * std::sqrt(eta * probe_powers[i] / (h_nu * bw));
    scaled(i) = cfg.loss_factor * ideal(i);
    const double noise = chains[i].expected_white_noise(cfg.scan_start);
    analytic(i) = noise > 0.0 ? analytic_fringe_amplitude(chains[i]) / noise : 0.0;
    if (r.measured(i) > 0.0) ratios.push_back(ideal(i) / r.measured(i));
    for (std::size_t j = 0; j < reps; ++j) {
      if (!warnings[i * reps + j].empty()) r.flagged[i] = true;
      append_unique(r.warnings, warnings[i * reps + j]);
    }
  }
  r.columns = {{"ideal", ideal}, {"loss_scaled", scaled}, {"chain_analytic", analytic}};

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < points; ++i)
    if (probe_powers[i] > 0.0 && r.measured(i) > 0.0) {
      xs.push_back(probe_powers[i]);
      ys.push_back(r.measured(i));
    }
  if (xs.size() >= 3) {
    r.fit = power_law_summary(
        fit_power_law(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                      Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()))));
  }
  if (!ratios.empty()) {
    const Eigen::Map<const Eigen::VectorXd> v(ratios.data(), static_cast<Eigen::Index>(ratios.size()));
    r.scalars.emplace_back("ideal_to_measured", v.mean());
    if (ratios.size() >= 2) r.scalars.emplace_back("ideal_to_measured_error", mean_estimate(v).standard_error);
  }
  r.scalars.emplace_back("loss_factor", cfg.loss_factor);
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < reps; ++j) r.seeds.push_back(derive_seed(cfg.seed, i, j));
  return r;
}

ExperimentResult run_locked_sensitivity(double duration, const HarnessConfig& cfg) {
  cfg.validate();
  detail::require<InvalidInput>(duration > 0.0, "duration must be > 0");
  ChainSettings s = cfg.chain;
  configure_powers(s, cfg.lo_power, cfg.probe_power);
  const SignalChain chain(s);
  const ServoConfig& servo = cfg.servo;
  const std::uint64_t seed = derive_seed(cfg.seed, 0, 0);

  const Eigen::VectorXd open =
      open_loop_phase(cfg.vibration, duration, servo.loop_rate, derive_seed(seed, 10), servo.setpoint);
  const LockResult lock = close_loop(open, servo.loop_rate, servo, derive_seed(seed, 11));

  ChainRun run;
  run.duration = duration;
  run.seed = seed;
  run.control_rate = servo.loop_rate;
  const Eigen::Index last = lock.locked_phase.size() - 1;
  run.gamma = [&](std::uint64_t k) {
    return lock.locked_phase(std::min<Eigen::Index>(static_cast<Eigen::Index>(k), last));
  };
  ChainOutput out = chain.run(run);

  const double bw = s.lockin.bandwidth;
  const double h = 1e-6;
  const double slope = (chain.expected_demodulated(servo.setpoint + h) -
                        chain.expected_demodulated(servo.setpoint - h)) /
                       (2.0 * h);
  const DemodulatedTrace& d = out.demodulated;
  const double noise = noise_floor(d);
  const double density = noise / (std::abs(slope) * std::sqrt(bw));
  const double settled_time = d.time(d.in_phase.size()) - d.settling_time;
  const double density_error = density / (2.0 * std::sqrt(bw * settled_time));

  // Residual of the lock alone, through a filter of the same noise bandwidth.
  LowPassFilter lp(s.lockin.filter_order, bw, servo.loop_rate);
  const double mean_phase = lock.locked_phase.mean();
  const auto settle = static_cast<Eigen::Index>(std::ceil(s.lockin.settling_time() * servo.loop_rate));
  double sum = 0.0, sum2 = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < lock.locked_phase.size(); ++i) {
    const double y = lp(lock.locked_phase(i) - mean_phase);
    if (i >= settle) {
      sum += y;
      sum2 += y * y;
      ++count;
    }
  }
  detail::require<InsufficientData>(count > 1, "locked run shorter than the filter settling time");
  const double servo_var = (sum2 - sum * sum / count) / static_cast<double>(count - 1);
  const double servo_density = std::sqrt(servo_var / bw);
  const double shot_density = chain.expected_white_noise(servo.setpoint) / (std::abs(slope) * std::sqrt(bw));

  ExperimentResult r;
  r.name = "locked_sensitivity";
  r.sweep_variable = "time";
  r.sweep_unit = "s";
  r.measured_unit = "rad";
  const Eigen::Index n = d.in_phase.size();
  r.sweep_values.resize(n);
  r.measured.resize(n);
  Eigen::VectorXd locked(n), demod = d.in_phase;
  const double step = servo.loop_rate / d.sample_rate;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.sweep_values(i) = d.time(i);
    r.measured(i) = (d.in_phase(i) - chain.expected_demodulated(servo.setpoint)) / slope;
    locked(i) = lock.locked_phase(std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(i * step)), last));
  }
  r.standard_error = Eigen::VectorXd::Constant(n, noise / std::abs(slope));
  r.columns = {{"locked_phase", locked}, {"demodulated", demod}};
  r.fit = {"white phase noise", {"phase_noise_density"}, {density}, {density_error}};
  r.scalars = {{"phase_noise_density", density},
               {"phase_noise_density_error", density_error},
               {"servo_phase_density", servo_density},
               {"shot_phase_density", shot_density},
               {"fringe_slope_A_per_rad", slope},
               {"snr_ceiling", snr_ceiling(servo_density > 0.0 ? servo_density : density, bw)},
               {"fraction_in_lock", lock.fraction_in_lock()}};
  r.seeds = {seed};
  r.flagged.assign(static_cast<std::size_t>(n), false);
  r.warnings = out.warnings;
  if (lock.lock_failure) {
    r.lock_lost = true;
    r.warnings.push_back("interferometer lock lost during the run");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(i * step)), last);
      r.flagged[static_cast<std::size_t>(i)] = !lock.in_lock[static_cast<std::size_t>(k)];
    }
  }
  return r;
}

}  // namespace mzd
