#pragma once

#include "synaudit/testbed/population.hpp"
#include "synaudit/tuning.hpp"

#include <array>
#include <map>
#include <optional>

namespace synaudit::testbed {

enum class ScenarioKind { S1, S2, S3 };
std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& text);

/// Synthetic proportions used by S2: 0.1, 0.2, ..., 1.0.
const std::array<double, 10>& s2_grid();

struct Scenario {
  ScenarioKind kind = ScenarioKind::S1;
  double synthetic_proportion = 1.0;
  std::map<int, double> source_mix;  // source id -> weight, sums to 1

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

struct ScenarioParams {
  std::optional<double> proportion;  // S2 only; must lie on the grid
  std::vector<int> sources = {0};    // S1 and S2 use the first entry
};

/// S1: proportion 1. S2: the requested grid proportion. S3: proportion
/// uniform on [0.1, 1] and Dirichlet(1) weights over `sources`, both from
/// `seed`. Throws BadProportion.
Scenario make_scenario(ScenarioKind kind, const ScenarioParams& params, std::uint64_t seed);

struct FleetSpec {
  ScenarioKind kind = ScenarioKind::S1;
  // S2 only. Unset means synthetic members cycle through the grid.
  std::optional<double> proportion;
  std::vector<int> sources = {0};
  int train_size = 300;
  MemberTrainConfig training;
};

nlohmann::json to_json(const FleetSpec& spec);
FleetSpec fleet_spec_from_json(const nlohmann::json& j);

struct MemberRecord {
  std::string id;
  int label = 0;  // 0 real, 1 synthetic; source index for attribution fleets
  Scenario scenario;
  std::uint64_t seed = 0;
  int epochs = 0;
  double train_accuracy = 0.0;
  std::vector<std::uint64_t> example_ids;
  std::shared_ptr<MiniClassifier> model;
};

struct ReferenceBundle {
  Side side = Side::Reference;
  std::vector<MemberRecord> members;

  std::vector<int> labels() const;
  std::vector<ClassifierPtr> models_with_label(int label) const;
  std::vector<FleetMember> as_fleet() const;
  /// First `per_label` members of each label, in member order.
  ReferenceBundle balanced_prefix(int per_label) const;
};

/// k/2 real members trained on the side's real split and k/2 synthetic
/// members on scenario-mixed data from the same side. Member i draws from
/// derive_seed(seed, i); members train in parallel on `threads` workers
/// (0 = hardware concurrency). Throws InvalidConfig, InsufficientData.
ReferenceBundle train_fleet(const Population& pop, const FleetSpec& spec, int count, Side side, std::uint64_t seed,
                            int threads = 0);

/// One S1 fleet per source, `per_source` members each, labeled by the
/// source's index in the population's source list.
ReferenceBundle train_source_fleet(const Population& pop, int per_source, Side side, std::uint64_t seed,
                                   int train_size = 300, const MemberTrainConfig& training = {}, int threads = 0);

/// JSON manifest entry per member, without the model.
nlohmann::json member_manifest(const MemberRecord& m);

}  // namespace synaudit::testbed
