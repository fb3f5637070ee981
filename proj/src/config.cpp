#include "mzdetect/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mzdetect/errors.hpp"

namespace mzd {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("must be an object");
  }

  ~Section() = default;

  bool has(const std::string& key) {
    used_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }

  template <typename T>
  void read(const std::string& key, T& into) {
    if (!has(key)) return;
    into = as<T>(node_.at(key), key);
  }

  template <typename T>
  std::optional<T> optional(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as<T>(node_.at(key), key);
  }

  bool present(const std::string& key) const { return node_.contains(key); }

  Section child(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    if (!node_.contains(key)) return Section(empty, path_ + key + ".");
    return Section(node_.at(key), path_ + key + ".");
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return node_.at(key);
  }

  std::string path(const std::string& key) const { return path_ + key; }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.count(key)) fail("unknown key '" + path_ + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidConfig("config " + (path_.empty() ? std::string("root") : path_) + ": " + what);
  }

 private:
  template <typename T>
  T as(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail("'" + key + "' must be true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail("'" + key + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        if (v.get<std::int64_t>() < 0) fail("'" + key + "' must be >= 0");
        return static_cast<T>(v.get<std::int64_t>());
      } else {
        return static_cast<T>(v.get<std::int64_t>());
      }
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) fail("'" + key + "' must be an array of numbers");
      std::vector<double> out;
      for (const json& e : v) {
        if (!e.is_number()) fail("'" + key + "' must be an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    } else {
      if (!v.is_number()) fail("'" + key + "' must be a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) fail("'" + key + "' must be finite");
      return d;
    }
  }

  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] =
        lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return v;
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: break;
  }
  return "z";
}

void read_detector(Section s, DetectorSpec& d) {
  s.read("quantum_efficiency", d.quantum_efficiency);
  s.read("nep_w_per_rthz", d.nep);
  s.read("gain", d.gain);
  s.read("one_over_f_corner_hz", d.one_over_f_corner);
  s.read("shot_noise_band_low_hz", d.shot_noise_band_low);
  s.read("shot_noise_band_high_hz", d.shot_noise_band_high);
  s.read("power_range_low_w", d.power_range_low);
  s.read("power_range_high_w", d.power_range_high);
  s.finish();
}

json detector_json(const DetectorSpec& d) {
  return {{"quantum_efficiency", d.quantum_efficiency},
          {"nep_w_per_rthz", d.nep},
          {"gain", d.gain},
          {"one_over_f_corner_hz", d.one_over_f_corner},
          {"shot_noise_band_low_hz", d.shot_noise_band_low},
          {"shot_noise_band_high_hz", d.shot_noise_band_high},
          {"power_range_low_w", d.power_range_low},
          {"power_range_high_w", d.power_range_high}};
}

template <typename Fn>
void as_config_error(Fn&& fn) {
  try {
    fn();
  } catch (const InvalidInput& e) {
    throw InvalidConfig(e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  using detail::require;
  as_config_error([&] { harness.validate(); });
  require<InvalidConfig>(target_optical_depth > 0.0 && target_optical_depth < 1.0,
                         "target_optical_depth must lie in (0, 1)");
  require<InvalidConfig>(modulation_penalty > 0.0, "modulation_penalty must be > 0");
  require<InvalidConfig>(scattering_rate >= 0.0, "scattering rate must be >= 0");
  require<InvalidConfig>(simulate_duration > 0.0, "simulation duration must be > 0");
  require<InvalidConfig>(raw_samples >= 0, "raw_samples must be >= 0");
  require<InvalidConfig>(locked_duration > 0.0, "locked duration must be > 0");
  require<InvalidConfig>(!lo_powers.empty() && !probe_powers.empty(), "power sweeps must not be empty");
  for (double p : lo_powers) require<InvalidConfig>(p > 0.0, "LO sweep powers must be > 0");
  for (double p : probe_powers) require<InvalidConfig>(p >= 0.0, "probe sweep powers must be >= 0");
  require<InvalidConfig>(!output_dir.empty(), "output_dir must not be empty");
}

DesignRequest design_request(const RunConfig& c) {
  const ChainSettings& s = c.harness.chain;
  DesignRequest r;
  r.cloud = s.cloud;
  r.wavelength = s.probe.wavelength;
  r.target_optical_depth = c.target_optical_depth;
  r.bandwidth = s.lockin.bandwidth;
  r.lo_power = c.harness.lo_power;
  r.modulation_penalty = c.modulation_penalty;
  r.modulation_depth = s.modulation_depth;
  r.fractional_signal = c.fractional_signal;
  r.scattering_rate = c.scattering_rate;
  r.locking_floor = c.harness.servo.residual_floor;
  r.detector = s.detector_a;
  return r;
}

RunConfig parse_config(const json& doc) {
  RunConfig c;
  HarnessConfig& h = c.harness;
  h.chain = default_chain_settings();
  ChainSettings& s = h.chain;
  Section root(doc, "");

  if (auto seed = root.optional<std::uint64_t>("seed")) {
    h.seed = *seed;
    c.seed_given = true;
  }
  root.read("threads", h.threads);
  root.read("output_dir", c.output_dir);

  {
    Section d = root.child("design");
    d.read("target_optical_depth", c.target_optical_depth);
    d.read("modulation_penalty", c.modulation_penalty);
    d.read("fractional_signal", c.fractional_signal);
    d.read("scattering_rate_photons_per_s", c.scattering_rate);
    d.finish();
  }
  {
    Section d = root.child("cloud");
    d.read("atom_count", s.cloud.atom_count);
    d.read("extent_x_m", s.cloud.extent_x);
    d.read("extent_y_m", s.cloud.extent_y);
    d.read("extent_z_m", s.cloud.extent_z);
    if (auto axis = d.optional<std::string>("probe_axis")) {
      if (*axis != "x" && *axis != "y" && *axis != "z") d.fail("'probe_axis' must be x, y or z");
      s.cloud.probe_axis = parse_axis(*axis);
    }
    d.read("lifetime_s", s.cloud.lifetime);
    d.read("atoms_present", s.atoms_present);
    d.finish();
  }
  std::optional<double> detuning;
  {
    Section d = root.child("probe");
    d.read("wavelength_m", s.probe.wavelength);
    detuning = d.optional<double>("detuning_half_linewidths");
    d.finish();
  }
  {
    Section d = root.child("interferometer");
    auto& ifo = s.interferometer;
    d.read("splitter_ratio", ifo.splitter_ratio);
    d.read("operating_phase_rad", ifo.operating_phase);
    d.read("probe_arm_transmission", ifo.probe_arm_loss);
    d.read("lo_arm_transmission", ifo.lo_arm_loss);
    d.read("mode_matching_visibility", ifo.mode_matching_visibility);
    d.finish();
  }
  std::optional<double> depth;
  {
    Section d = root.child("modulation");
    d.read("frequency_hz", s.modulation_frequency);
    depth = d.optional<double>("depth_rad");
    d.read("sideband_cutoff", s.sideband_cutoff);
    d.finish();
  }
  {
    Section d = root.child("detectors");
    read_detector(d.child("a"), s.detector_a);
    read_detector(d.child("b"), s.detector_b);
    d.finish();
  }
  {
    Section d = root.child("noise");
    NoiseConfig& n = s.noise;
    d.read("shot", n.shot);
    d.read("nep", n.nep);
    d.read("flicker", n.flicker);
    d.read("intensity", n.intensity);
    d.read("intensity_noise_rin_per_rthz", n.intensity_noise_rin);
    d.read("rin_tone_frequency_hz", n.rin_tone_frequency);
    if (d.present("rin_tone_dbc")) {
      if (d.raw("rin_tone_dbc").is_null())
        n.rin_tone_dbc = -std::numeric_limits<double>::infinity();
      else
        d.read("rin_tone_dbc", n.rin_tone_dbc);
    }
    d.read("rin_seed", n.rin_seed);
    d.read("common_mode_rejection_db", n.common_mode_rejection);
    d.read("flicker_low_frequency_hz", n.flicker_low_frequency);
    d.finish();
  }
  {
    Section d = root.child("lockin");
    d.read("reference_phase_rad", s.lockin.reference_phase);
    d.read("bandwidth_hz", s.lockin.bandwidth);
    d.read("filter_order", s.lockin.filter_order);
    d.read("output_decimation", s.lockin.output_sample_decimation);
    d.finish();
  }
  {
    Section d = root.child("servo");
    ServoConfig& v = h.servo;
    d.read("proportional_gain", v.proportional_gain);
    d.read("integral_gain_per_s", v.integral_gain);
    d.read("piezo_range_rad", v.piezo_range);
    d.read("loop_rate_hz", v.loop_rate);
    d.read("residual_floor_rad_per_rthz", v.residual_floor);
    d.read("floor_bandwidth_hz", v.floor_bandwidth);
    d.read("piezo_bandwidth_hz", v.piezo_bandwidth);
    d.read("setpoint_rad", v.setpoint);
    d.finish();
  }
  {
    Section d = root.child("vibration");
    if (d.has("tones")) {
      const json& tones = d.raw("tones");
      if (!tones.is_array()) d.fail("'tones' must be an array");
      h.vibration.tones.clear();
      for (std::size_t i = 0; i < tones.size(); ++i) {
        Section t(tones[i], d.path("tones") + "[" + std::to_string(i) + "].");
        VibrationTone tone;
        t.read("frequency_hz", tone.frequency);
        t.read("rms_amplitude_rad", tone.rms_amplitude);
        t.finish();
        h.vibration.tones.push_back(tone);
      }
    }
    d.read("broadband_density_rad_per_rthz", h.vibration.broadband_density);
    d.read("broadband_cutoff_hz", h.vibration.broadband_cutoff);
    d.finish();
  }
  {
    Section d = root.child("simulation");
    d.read("sample_rate_hz", s.sample_rate);
    d.read("duration_s", c.simulate_duration);
    d.read("control_rate_hz", h.control_rate);
    d.read("raw_samples", c.raw_samples);
    d.finish();
  }
  std::optional<double> probe_power;
  {
    Section d = root.child("experiment");
    d.read("lo_power_w", h.lo_power);
    probe_power = d.optional<double>("probe_power_w");
    d.read("duration_s", h.duration);
    d.read("replicates", h.replicates);
    d.read("lo_powers_w", c.lo_powers);
    d.read("probe_powers_w", c.probe_powers);
    d.read("scan_start_rad", h.scan_start);
    d.read("scan_range_rad", h.scan_range);
    d.read("loss_factor", h.loss_factor);
    d.read("locked_duration_s", c.locked_duration);
    d.finish();
  }
  root.finish();

  if (c.lo_powers.empty()) c.lo_powers = log_spaced(70e-6, 3e-3, 8);
  if (c.probe_powers.empty()) c.probe_powers = log_spaced(10e-12, 1e-9, 5);
  s.lockin.reference_frequency = s.modulation_frequency;

  // Derived quantities left open in the document.
  as_config_error([&] {
    s.cloud.validate();
    s.probe.validate();
    if (depth) {
      s.modulation_depth = *depth;
    } else {
      detail::require<InvalidConfig>(c.modulation_penalty > 0.0, "modulation_penalty must be > 0");
      s.modulation_depth = solve_modulation_depth(c.modulation_penalty);
    }
    if (detuning)
      s.probe.detuning = *detuning;
    else
      s.probe.detuning = s.cloud.atom_count > 0.0
                             ? detuning_for_depth(c.target_optical_depth, s.cloud, s.probe.wavelength)
                             : 0.0;
    if (probe_power)
      h.probe_power = *probe_power;
    else
      h.probe_power = design(design_request(c)).point.transmitted_probe_power;
  });
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw InvalidConfig("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  const HarnessConfig& h = c.harness;
  const ChainSettings& s = h.chain;
  const NoiseConfig& n = s.noise;
  json tones = json::array();
  for (const VibrationTone& t : h.vibration.tones)
    tones.push_back({{"frequency_hz", t.frequency}, {"rms_amplitude_rad", t.rms_amplitude}});
  json j;
  j["seed"] = h.seed;
  j["threads"] = h.threads;
  j["output_dir"] = c.output_dir;
  j["design"] = {{"target_optical_depth", c.target_optical_depth},
                 {"modulation_penalty", c.modulation_penalty},
                 {"fractional_signal", c.fractional_signal},
                 {"scattering_rate_photons_per_s", c.scattering_rate}};
  j["cloud"] = {{"atom_count", s.cloud.atom_count},
                {"extent_x_m", s.cloud.extent_x},
                {"extent_y_m", s.cloud.extent_y},
                {"extent_z_m", s.cloud.extent_z},
                {"probe_axis", axis_name(s.cloud.probe_axis)},
                {"lifetime_s", s.cloud.lifetime},
                {"atoms_present", s.atoms_present}};
  j["probe"] = {{"wavelength_m", s.probe.wavelength},
                {"detuning_half_linewidths", s.probe.detuning}};
  j["interferometer"] = {{"splitter_ratio", s.interferometer.splitter_ratio},
                         {"operating_phase_rad", s.interferometer.operating_phase},
                         {"probe_arm_transmission", s.interferometer.probe_arm_loss},
                         {"lo_arm_transmission", s.interferometer.lo_arm_loss},
                         {"mode_matching_visibility", s.interferometer.mode_matching_visibility}};
  j["modulation"] = {{"frequency_hz", s.modulation_frequency},
                     {"depth_rad", s.modulation_depth},
                     {"sideband_cutoff", s.sideband_cutoff}};
  j["detectors"] = {{"a", detector_json(s.detector_a)}, {"b", detector_json(s.detector_b)}};
  j["noise"] = {{"shot", n.shot},
                {"nep", n.nep},
                {"flicker", n.flicker},
                {"intensity", n.intensity},
                {"intensity_noise_rin_per_rthz", n.intensity_noise_rin},
                {"rin_tone_frequency_hz", n.rin_tone_frequency},
                {"rin_tone_dbc", std::isfinite(n.rin_tone_dbc) ? json(n.rin_tone_dbc) : json(nullptr)},
                {"rin_seed", n.rin_seed},
                {"common_mode_rejection_db", n.common_mode_rejection},
                {"flicker_low_frequency_hz", n.flicker_low_frequency}};
  j["lockin"] = {{"reference_phase_rad", s.lockin.reference_phase},
                 {"bandwidth_hz", s.lockin.bandwidth},
                 {"filter_order", s.lockin.filter_order},
                 {"output_decimation", s.lockin.output_sample_decimation}};
  j["servo"] = {{"proportional_gain", h.servo.proportional_gain},
                {"integral_gain_per_s", h.servo.integral_gain},
                {"piezo_range_rad", h.servo.piezo_range},
                {"loop_rate_hz", h.servo.loop_rate},
                {"residual_floor_rad_per_rthz", h.servo.residual_floor},
                {"floor_bandwidth_hz", h.servo.floor_bandwidth},
                {"piezo_bandwidth_hz", h.servo.piezo_bandwidth},
                {"setpoint_rad", h.servo.setpoint}};
  j["vibration"] = {{"tones", tones},
                    {"broadband_density_rad_per_rthz", h.vibration.broadband_density},
                    {"broadband_cutoff_hz", h.vibration.broadband_cutoff}};
  j["simulation"] = {{"sample_rate_hz", s.sample_rate},
                     {"duration_s", c.simulate_duration},
                     {"control_rate_hz", h.control_rate},
                     {"raw_samples", c.raw_samples}};
  j["experiment"] = {{"lo_power_w", h.lo_power},
                     {"probe_power_w", h.probe_power},
                     {"duration_s", h.duration},
                     {"replicates", h.replicates},
                     {"lo_powers_w", c.lo_powers},
                     {"probe_powers_w", c.probe_powers},
                     {"scan_start_rad", h.scan_start},
                     {"scan_range_rad", h.scan_range},
                     {"loss_factor", h.loss_factor},
                     {"locked_duration_s", c.locked_duration}};
  return j;
}

}  // namespace mzd
