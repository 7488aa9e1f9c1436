#pragma once

#include "synaudit/mini_classifier.hpp"
#include "synaudit/random.hpp"
#include "synaudit/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <vector>

namespace synaudit::testbed {

struct PopulationConfig {
  int class_count = 2;
  int feature_dim = 16;
  double real_separation = 3.0;      // distance between class means, in noise sd
  double synthetic_sharpness = 2.0;  // delta
  std::vector<int> sources = {0};
  // Source offset length per unit of delta, so delta = 0 leaves no offset.
  double offset_scale = 12.0;
  int encoder_width = 32;
  int split_size = 20000;  // rows per training split (per side, per source)
  int test_size = 1000;   // held-out rows per split, for queries
  // Shift of the reference side's real data along a random direction.
  double reference_real_shift = 0.0;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;

  friend bool operator==(const PopulationConfig&, const PopulationConfig&) = default;
};

nlohmann::json to_json(const PopulationConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
PopulationConfig population_config_from_json(const nlohmann::json& j);

/// Rows of features with labels and globally unique example ids.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXi y;
  std::vector<std::uint64_t> ids;

  Eigen::Index size() const noexcept { return x.rows(); }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  std::vector<LabeledExample> examples() const;
};

enum class Side { Target, Reference };
std::string to_string(Side side);
Side parse_side(const std::string& text);

struct SideData {
  Dataset real;
  std::map<int, Dataset> synthetic;  // by source id
};

struct Population {
  PopulationConfig config;
  Eigen::MatrixXd class_means;            // class_count x feature_dim
  std::map<int, Eigen::VectorXd> offsets;  // by source id
  std::shared_ptr<const Encoder> encoder;  // shared frozen first layer
  SideData target;
  SideData reference;
  Dataset test_real;
  std::map<int, Dataset> test_synthetic;

  const SideData& side(Side s) const { return s == Side::Target ? target : reference; }
};

/// Real class k ~ N(mu_k, I). Synthetic source s, class k ~
/// N((1 + delta) mu_k + offset_s, I / (1 + delta)). All splits are drawn
/// independently from seed-derived streams.
Population gen_population(const PopulationConfig& cfg);

/// Query sets drawn without replacement from the held-out splits.
QuerySet real_queries(const Population& pop, int budget, std::uint64_t seed);
QuerySet synthetic_queries(const Population& pop, int source, int budget, std::uint64_t seed);
/// Equal share from every source.
QuerySet mixed_queries(const Population& pop, int budget, std::uint64_t seed);

}  // namespace synaudit::testbed
