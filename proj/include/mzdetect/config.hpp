#pragma once

// Run configuration: strict JSON with the unit in every dimensional key
// (power_w, bandwidth_hz, ...). Unknown keys are rejected. Absent keys take
// defaults; the resolved configuration serialises back to JSON in full.

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mzdetect/designer.hpp"
#include "mzdetect/harness.hpp"

namespace mzd {

struct RunConfig {
  HarnessConfig harness;  // chain, powers, durations, servo, vibration, seed, threads

  // Design-point inputs.
  double target_optical_depth = 0.01;
  double modulation_penalty = kDefaultModulationPenalty;
  double fractional_signal = 1.0;
  double scattering_rate = 0.0;  // photons/s; 0: one per atom per lifetime

  // simulate
  double simulate_duration = 0.1;  // s
  Eigen::Index raw_samples = 1000;

  // experiments
  std::vector<double> lo_powers;
  std::vector<double> probe_powers;
  double locked_duration = 1.0;  // s

  std::string output_dir = "out";
  bool seed_given = false;

  void validate() const;
};

/// Parses and resolves a configuration document. Throws InvalidConfig.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::string& path);

/// The resolved configuration, every field explicit.
nlohmann::json to_json(const RunConfig& config);

DesignRequest design_request(const RunConfig& config);

}  // namespace mzd
