#pragma once

#include "synaudit/plot.hpp"
#include "synaudit/testbed/evaluate.hpp"
#include "synaudit/testbed/fleet.hpp"
#include "synaudit/testbed/plots.hpp"
#include "synaudit/testbed/text.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>

namespace synaudit::testbed {

/// Method names accepted by run_experiment:
///   metric_syn   threshold audit with synthetic (or mixed, under S3) queries
///   metric_real  threshold audit with real queries
///   tune         tuning-based audit
///   flat_params  meta-classifier over flattened member parameters (baseline)
///   plot         raster classifier
const std::vector<std::string>& experiment_methods();

nlohmann::json to_json(const TuningConfig& cfg);
TuningConfig tuning_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PlotTrainConfig& cfg);
PlotTrainConfig plot_train_config_from_json(const nlohmann::json& j);

struct ExperimentConfig {
  PopulationConfig population;  // its seed is replaced per run
  FleetSpec fleet;
  int metric_references = 20;
  int tuning_references = 100;
  int targets = 100;
  int budget = 200;
  MetricId synthetic_metric = MetricId::Confidence;
  MetricId real_metric = MetricId::Confidence;
  TuningConfig tuning;  // its seed is replaced per run
  PlotSetConfig plots;
  int plot_references = 200;  // per label
  int plot_targets = 200;     // per label
  PlotTrainConfig plot_training;  // its seed is replaced per run
  int runs = kEvaluationRuns;
  std::uint64_t seed = 0;
  std::vector<std::string> methods = {"metric_syn", "metric_real", "tune"};
  int threads = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ExperimentResult {
  std::map<std::string, EvalSummary> methods;
  std::map<std::string, double> seconds;  // wall time per method, fleets excluded
  double fleet_seconds = 0.0;
};

nlohmann::json to_json(const ExperimentResult& r);

/// Each run builds a fresh population and disjoint reference/target fleets
/// from its run seed, then every method audits the same targets.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct GeneratorExperimentConfig {
  TextCorpusConfig corpus;
  GeneratorFleetSpec fleet;
  int references = 20;
  int targets = 100;
  int budget = 200;
  MetricId metric = MetricId::RougeL;
  int embedding_dim = 16;  // for embed_f1
  int runs = kEvaluationRuns;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const GeneratorExperimentConfig& cfg);
GeneratorExperimentConfig generator_experiment_config_from_json(const nlohmann::json& j);

EvalSummary run_generator_experiment(const GeneratorExperimentConfig& cfg);

}  // namespace synaudit::testbed
