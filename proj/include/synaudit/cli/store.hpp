#pragma once

#include "synaudit/io.hpp"
#include "synaudit/testbed/fleet.hpp"

#include <nlohmann/json.hpp>

namespace synaudit::cli {

/// SHA-256 of the compact dump; object keys are sorted, so equal documents hash equally.
std::string json_hash(const nlohmann::json& j);

/// Parses a JSON file. Syntax errors raise ConfigError naming line and column.
nlohmann::json load_json_config(const fs::path& path);

/// Exclusive flock on `path`, created if missing, released on destruction.
class FileLock {
 public:
  explicit FileLock(const fs::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void save_population(const testbed::Population& pop, const fs::path& path);
testbed::Population load_population(const fs::path& path);

struct FleetEntry {
  std::string id;
  int label = 0;
  nlohmann::json scenario;
  std::uint64_t seed = 0;
  int epochs = 0;
  double train_accuracy = 0.0;
  std::string path;  // relative to the manifest's directory
  std::string sha256;
};

struct LoadedFleet {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::shared_ptr<MiniClassifier>> models;

  std::vector<ClassifierPtr> with_label(int label) const;
  std::vector<FleetMember> as_fleet() const;
};

/// Fleet manifest: member ids, labels, scenarios, seeds and model paths.
struct FleetManifest {
  std::string key;
  std::string side;
  int count = 0;
  std::uint64_t seed = 0;
  nlohmann::json population;
  nlohmann::json spec;
  std::vector<FleetEntry> members;
  fs::path file;  // where it was loaded from or saved to

  nlohmann::json to_json() const;
  void save(const fs::path& path);
  /// Throws MissingArtifact when absent, SchemaError when malformed.
  static FleetManifest load(const fs::path& path);
  /// Loads every member, checking hashes. Throws MissingArtifact, IoError.
  LoadedFleet load_models() const;
};

/// Content-addressed fleet cache: <root>/<key>/fleet.json plus member files,
/// where key hashes everything that determines the fleet. Training holds
/// <root>/<key>.lock; readers need no lock because fleet.json is written last.
class ModelStore {
 public:
  explicit ModelStore(fs::path root);

  static std::string fleet_key(const testbed::PopulationConfig& pop, const testbed::FleetSpec& spec, int count,
                               testbed::Side side, std::uint64_t seed);

  FleetManifest fleet(const testbed::Population& pop, const testbed::FleetSpec& spec, int count, testbed::Side side,
                      std::uint64_t seed, int threads = 0, bool* reused = nullptr) const;

  const fs::path& root() const noexcept { return root_; }

 private:
  fs::path root_;
};

}  // namespace synaudit::cli
