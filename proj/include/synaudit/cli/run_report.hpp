#pragma once

#include "synaudit/io.hpp"

#include <nlohmann/json.hpp>

namespace synaudit::cli {

/// One evaluated configuration, stored as <run dir>/runs/<name>.json.
struct RunRecord {
  std::string name;
  std::string kind;       // "classifier" or "generator"
  std::string parameter;  // swept parameter, empty when none
  double value = 0.0;
  nlohmann::json config;
  nlohmann::json result;  // {"methods": {name: {"mean", "std", "accuracies"}}}

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

void save_run(const fs::path& run_dir, const RunRecord& run);
/// Sorted by file name. A missing runs/ directory yields no records.
std::vector<RunRecord> load_runs(const fs::path& run_dir);

struct ReportOutcome {
  int runs = 0;
  std::string summary;
  std::vector<fs::path> files;
};

/// Writes <run dir>/report/{summary.txt, accuracy.csv} and one SVG curve
/// per swept parameter. Output depends only on the run records. Throws
/// IoError when `run_dir` does not exist.
ReportOutcome write_report(const fs::path& run_dir);

}  // namespace synaudit::cli
