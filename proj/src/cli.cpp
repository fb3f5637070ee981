#include "mzdetect/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "mzdetect/config.hpp"
#include "mzdetect/designer.hpp"
#include "mzdetect/errors.hpp"
#include "mzdetect/harness.hpp"
#include "mzdetect/io.hpp"
#include "mzdetect/signal_chain.hpp"

namespace mzd {

namespace {

constexpr std::array kExperiments = {"noise_vs_power", "fringe_scan", "snr_vs_power",
                                     "locked_sensitivity"};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

using Files = std::vector<std::pair<std::string, std::string>>;

RunConfig resolve(const Options& o) {
  RunConfig c = o.config_path.empty() ? parse_config(nlohmann::json::object())
                                      : load_config(o.config_path);
  if (o.seed) {
    c.harness.seed = *o.seed;
    c.seed_given = true;
  }
  if (o.out_dir) c.output_dir = *o.out_dir;
  if (o.threads) c.harness.threads = *o.threads;
  c.validate();
  return c;
}

// Output location does not affect results, so it stays out of the provenance.
nlohmann::json provenance_config(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  return j;
}

void write_all(const RunConfig& c, const Files& files) {
  for (const auto& [name, content] : files)
    write_file_atomic((std::filesystem::path(c.output_dir) / name).string(), content);
}

int cmd_design(const RunConfig& c, std::ostream& out) {
  const DesignReport report = design(design_request(c));
  const Provenance p{"design", c.harness.seed, provenance_config(c)};
  const std::string table = design_table(report);
  write_all(c, {{"design.json", dump_json(design_json(report, p))}, {"design.txt", table}});
  out << table;
  return kExitOk;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  ChainSettings s = c.harness.chain;
  configure_powers(s, c.harness.lo_power, c.harness.probe_power);
  const SignalChain chain(s);
  ChainRun run;
  run.duration = c.simulate_duration;
  run.seed = c.harness.seed;
  run.control_rate = c.harness.control_rate;
  run.raw_samples = c.raw_samples;
  const ChainOutput result = chain.run(run);
  const DemodulatedTrace& d = result.demodulated;

  Eigen::VectorXd t(d.in_phase.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = d.time(i);
  Eigen::VectorXd raw_t = Eigen::VectorXd::LinSpaced(result.raw_balanced.size(), 0.0,
                                                      static_cast<double>(result.raw_balanced.size() - 1)) /
                          result.sample_rate;

  const Provenance p{"simulate", c.harness.seed, provenance_config(c)};
  const double gamma = s.interferometer.operating_phase;
  const Eigen::Index begin = d.settled_begin();
  const Eigen::Index settled = d.in_phase.size() - begin;
  nlohmann::json summary = {{"command", p.command}, {"seed", p.seed}, {"config", p.config}};
  summary["expected_demodulated_a"] = chain.expected_demodulated(gamma);
  summary["expected_white_noise_a"] = chain.expected_white_noise(gamma);
  if (settled >= 2) {
    const auto tail = d.in_phase.tail(settled);
    const double mean = tail.mean();
    summary["settled_mean_a"] = mean;
    summary["settled_std_a"] = std::sqrt((tail.array() - mean).square().sum() / static_cast<double>(settled - 1));
    summary["settled_samples"] = settled;
  }
  summary["output_sample_rate_hz"] = d.sample_rate;
  summary["warnings"] = result.warnings;

  write_all(c, {{"demodulated.csv", trace_csv(t, d.in_phase, p)},
                {"raw_balanced.csv", trace_csv(raw_t, result.raw_balanced, p)},
                {"simulate.json", dump_json(summary)}});
  out << "expected demodulated current " << format_number(chain.expected_demodulated(gamma)) << " A\n";
  if (summary.contains("settled_mean_a"))
    out << "settled mean " << format_number(summary["settled_mean_a"].get<double>()) << " A, std "
        << format_number(summary["settled_std_a"].get<double>()) << " A\n";
  for (const auto& w : result.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_experiment(const std::string& name, const RunConfig& c, std::ostream& out) {
  ExperimentResult r;
  if (name == "noise_vs_power")
    r = run_noise_vs_power(c.lo_powers, c.harness);
  else if (name == "fringe_scan")
    r = run_fringe_scan(c.harness.scan_range, c.harness);
  else if (name == "snr_vs_power")
    r = run_snr_vs_power(c.probe_powers, c.harness);
  else
    r = run_locked_sensitivity(c.locked_duration, c.harness);

  const Provenance p{"experiment " + name, c.harness.seed, provenance_config(c)};
  write_all(c, {{name + ".csv", experiment_csv(r, p)}, {name + ".json", dump_json(experiment_json(r, p))}});
  for (std::size_t i = 0; i < r.fit.names.size(); ++i)
    out << r.fit.names[i] << " = " << format_number(r.fit.parameters[i]) << " +/- "
        << format_number(r.fit.uncertainties[i]) << "\n";
  for (const auto& [key, value] : r.scalars) out << key << " = " << format_number(value) << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  return r.lock_lost ? kExitLockFailure : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-colour interferometric atom detector: design and simulation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration file");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; },
                                            "base random seed");
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { o.out_dir = v; },
                                          "output directory");
    sub->add_option_function<int>("--threads", [&](const int& v) { o.threads = v; },
                                  "worker threads for sweeps")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* design_cmd = app.add_subcommand("design", "closed-form operating point report");
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "time-domain chain, CSV traces");
  CLI::App* experiment_cmd = app.add_subcommand("experiment", "scripted Monte-Carlo experiment");
  std::string experiment;
  experiment_cmd->add_option("name", experiment, "noise_vs_power | fringe_scan | snr_vs_power | locked_sensitivity")
      ->required();
  for (CLI::App* sub : {design_cmd, simulate_cmd, experiment_cmd}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (experiment_cmd->parsed() &&
      std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end()) {
    err << "error: unknown experiment '" << experiment << "'; valid names:";
    for (const char* n : kExperiments) err << " " << n;
    err << "\n";
    return kExitConfigError;
  }

  try {
    const RunConfig c = resolve(o);
    if (design_cmd->parsed()) return cmd_design(c, out);
    if (simulate_cmd->parsed()) return cmd_simulate(c, out);
    return cmd_experiment(experiment, c, out);
  } catch (const InvalidConfig& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InsufficientData& e) {
    err << "insufficient data: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InfeasibleDesign& e) {
    err << "infeasible design: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace mzd
