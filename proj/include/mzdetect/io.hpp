#pragma once

// Output files: CSV at 9 significant digits with LF endings and a '#'
// provenance preamble, JSON with the resolved config and seed. Files are
// written through a temporary and renamed into place.

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mzdetect/designer.hpp"
#include "mzdetect/harness.hpp"

namespace mzd {

struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config;
};

/// 9 significant digits, shortest form ("%.9g").
std::string format_number(double value);

/// '#'-prefixed lines naming the command, seed and compact config.
std::string csv_preamble(const Provenance& provenance);

/// time_s,current_A rows.
std::string trace_csv(const Eigen::VectorXd& time, const Eigen::VectorXd& current,
                      const Provenance& provenance);

struct Trace {
  Eigen::VectorXd time;
  Eigen::VectorXd current;
};

/// Parses trace_csv output; '#' lines are skipped. Throws InvalidInput.
Trace parse_trace_csv(const std::string& text);

/// One row per sweep point: value, mean, stderr, extra columns, flag.
std::string experiment_csv(const ExperimentResult& result, const Provenance& provenance);
nlohmann::json experiment_json(const ExperimentResult& result, const Provenance& provenance);

nlohmann::json design_json(const DesignReport& report, const Provenance& provenance);
std::string design_table(const DesignReport& report);

/// Writes `content` to `path` via a sibling temporary and rename.
void write_file_atomic(const std::string& path, const std::string& content);

/// Serialises JSON with a trailing newline.
std::string dump_json(const nlohmann::json& document);

}  // namespace mzd
