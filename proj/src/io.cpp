#include "mzdetect/io.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mzdetect/errors.hpp"

namespace mzd {

using nlohmann::json;

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string dump_json(const json& document) { return document.dump(2) + "\n"; }

std::string csv_preamble(const Provenance& p) {
  std::string out = "# mzdetect " + p.command + "\n";
  out += "# seed: " + std::to_string(p.seed) + "\n";
  out += "# config: " + p.config.dump() + "\n";
  return out;
}

std::string trace_csv(const Eigen::VectorXd& time, const Eigen::VectorXd& current,
                      const Provenance& p) {
  detail::require<InvalidInput>(time.size() == current.size(), "trace columns differ in length");
  std::string out = csv_preamble(p);
  out += "time_s,current_A\n";
  out.reserve(out.size() + static_cast<std::size_t>(time.size()) * 34);
  for (Eigen::Index i = 0; i < time.size(); ++i) {
    out += format_number(time(i));
    out += ',';
    out += format_number(current(i));
    out += '\n';
  }
  return out;
}

Trace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<double> t, c;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      detail::require<InvalidInput>(line == "time_s,current_A", "unexpected trace header '" + line + "'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    detail::require<InvalidInput>(comma != std::string::npos, "malformed trace row '" + line + "'");
    try {
      std::size_t used = 0;
      t.push_back(std::stod(line.substr(0, comma), &used));
      c.push_back(std::stod(line.substr(comma + 1), &used));
    } catch (const std::exception&) {
      throw InvalidInput("malformed trace row '" + line + "'");
    }
  }
  detail::require<InvalidInput>(header, "trace has no header row");
  Trace tr;
  tr.time = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  tr.current = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  return tr;
}

namespace {

std::string with_unit(const std::string& name, const std::string& unit) {
  if (unit.empty() || unit == "1") return name;
  return name + "_" + unit;
}

json fit_json(const FitSummary& f) {
  json params = json::object();
  for (std::size_t i = 0; i < f.names.size(); ++i)
    params[f.names[i]] = {{"value", f.parameters[i]}, {"uncertainty", f.uncertainties[i]}};
  return {{"model", f.model}, {"parameters", params}};
}

json figures_json(const DesignFigures& f) {
  return {{"quantum_efficiency", f.quantum_efficiency},
          {"snr_max", f.snr_max},
          {"snr_modulated", f.snr_modulated},
          {"phase_sensitivity_rad_per_rthz", f.phase_sensitivity},
          {"column_density_sensitivity_per_rthz", f.column_density_sensitivity}};
}

}  // namespace

std::string experiment_csv(const ExperimentResult& r, const Provenance& p) {
  std::string out = csv_preamble(p);
  out += "# experiment: " + r.name + "\n";
  out += with_unit(r.sweep_variable, r.sweep_unit) + "," + with_unit("mean", r.measured_unit) + "," +
         with_unit("stderr", r.measured_unit);
  for (const auto& [name, values] : r.columns) out += "," + name;
  out += ",flagged\n";
  for (Eigen::Index i = 0; i < r.sweep_values.size(); ++i) {
    out += format_number(r.sweep_values(i)) + "," + format_number(r.measured(i)) + "," +
           format_number(r.standard_error(i));
    for (const auto& [name, values] : r.columns) out += "," + format_number(values(i));
    const auto k = static_cast<std::size_t>(i);
    out += (k < r.flagged.size() && r.flagged[k]) ? ",1\n" : ",0\n";
  }
  return out;
}

json experiment_json(const ExperimentResult& r, const Provenance& p) {
  json scalars = json::object();
  for (const auto& [name, value] : r.scalars) scalars[name] = value;
  std::size_t flagged = 0;
  for (bool f : r.flagged) flagged += f ? 1 : 0;
  return {{"command", p.command},
          {"experiment", r.name},
          {"seed", p.seed},
          {"config", p.config},
          {"sweep_variable", r.sweep_variable},
          {"sweep_unit", r.sweep_unit},
          {"measured_unit", r.measured_unit},
          {"points", r.sweep_values.size()},
          {"flagged_points", flagged},
          {"fit", fit_json(r.fit)},
          {"scalars", scalars},
          {"lock_lost", r.lock_lost},
          {"warnings", r.warnings},
          {"replicate_seeds", r.seeds}};
}

json design_json(const DesignReport& r, const Provenance& p) {
  const DesignPoint& pt = r.point;
  const NoiseBudget& nb = r.noise_budget;
  return {
      {"command", p.command},
      {"seed", p.seed},
      {"config", p.config},
      {"point",
       {{"detuning_half_linewidths", pt.detuning},
        {"optical_depth", pt.target_optical_depth},
        {"absorbed_power_w", pt.absorbed_power},
        {"transmitted_probe_power_w", pt.transmitted_probe_power},
        {"lo_power_w", pt.lo_power},
        {"bandwidth_hz", pt.bandwidth},
        {"modulation_depth_rad", pt.modulation_depth},
        {"fractional_signal", pt.fractional_signal},
        {"phase_signal_rad", pt.phase_signal}}},
      {"wavelength_m", r.wavelength},
      {"photon_energy_j", r.photon_energy},
      {"optical_thickness", r.optical_thickness},
      {"snr_max", r.snr_max},
      {"snr_modulated", r.snr_modulated},
      {"signal_current_a", r.signal_current},
      {"shot_noise_current_a", r.shot_noise_current},
      {"phase_sensitivity_rad_per_rthz", r.phase_sensitivity},
      {"column_density_sensitivity_per_rthz", r.column_density_sensitivity},
      {"full_cloud_phase_rad", r.full_cloud_phase},
      {"heating_rate_photons_per_atom_s", r.heating_rate},
      {"modulation_penalty", r.modulation_penalty},
      {"minimum_detectable_fraction", r.minimum_detectable_fraction},
      {"ideal_detector", figures_json(r.ideal)},
      {"configured_detector", figures_json(r.detector)},
      {"noise_budget_rad_per_rthz",
       {{"shot", nb.shot},
        {"detector", nb.detector},
        {"locking", nb.locking},
        {"total", nb.total},
        {"dominant", nb.dominant}}},
      {"locking_floor_rad_per_rthz", r.locking_floor},
      {"locking_limited", r.locking_limited},
      {"achievable_snr", r.achievable_snr},
      {"loss_factor", r.loss_factor},
      {"warnings", r.warnings}};
}

std::string design_table(const DesignReport& r) {
  std::ostringstream os;
  auto row = [&](const std::string& name, double value, const std::string& unit) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-36s %14.6g  %s\n", name.c_str(), value, unit.c_str());
    os << buf;
  };
  os << "Operating point\n";
  row("detuning", r.point.detuning, "half-linewidths");
  row("optical depth k", r.point.target_optical_depth, "");
  row("absorbed power P_ab", r.point.absorbed_power, "W");
  row("probe power after atoms P_Pt", r.point.transmitted_probe_power, "W");
  row("LO power", r.point.lo_power, "W");
  row("bandwidth", r.point.bandwidth, "Hz");
  row("modulation depth m", r.point.modulation_depth, "rad");
  row("optical thickness n sigma0", r.optical_thickness, "");
  row("full-cloud phase", r.full_cloud_phase, "rad");
  row("heating rate", r.heating_rate, "photons/atom/s");
  os << "\nFigures of merit\n";
  row("SNR_max (eta = 1)", r.snr_max, "");
  row("phase sensitivity (eta = 1)", r.phase_sensitivity, "rad/sqrt(Hz)");
  row("modulation penalty 2 J1(m)", r.modulation_penalty, "");
  row("SNR modulated (detector eta)", r.snr_modulated, "");
  row("column-density sensitivity", r.column_density_sensitivity, "1/sqrt(Hz)");
  row("minimum detectable fraction", r.minimum_detectable_fraction, "");
  row("signal current i_S", r.signal_current, "A");
  row("shot-noise current i_shot", r.shot_noise_current, "A");
  os << "\nPhase-noise budget (rad/sqrt(Hz))\n";
  row("shot", r.noise_budget.shot, "");
  row("detector NEP", r.noise_budget.detector, "");
  row("locking floor", r.noise_budget.locking, "");
  row("total", r.noise_budget.total, "");
  os << "dominant: " << r.noise_budget.dominant << "\n";
  os << "locking-limited: " << (r.locking_limited ? "yes" : "no") << "\n";
  row("achievable SNR", r.achievable_snr, "");
  if (!r.warnings.empty()) {
    os << "\nWarnings\n";
    for (const auto& w : r.warnings) os << "- " << w << "\n";
  }
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

}  // namespace mzd
