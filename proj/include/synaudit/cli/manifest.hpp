#pragma once

#include "synaudit/io.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace synaudit::cli {

/// Record of one command invocation. Paths are stored relative to the
/// manifest's directory.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::map<std::string, double> timings;       // step -> seconds

  /// Hashes `file` and records it relative to `base`.
  void add_input(const fs::path& base, const fs::path& file);
  void add_output(const fs::path& base, const fs::path& file);

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void save(const fs::path& path) const;
  static RunManifest load(const fs::path& path);
};

/// Problems found; empty when every named file exists and re-hashes to the
/// recorded digest.
std::vector<std::string> verify_manifest(const fs::path& path);

}  // namespace synaudit::cli
