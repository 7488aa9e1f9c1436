#pragma once

#include "synaudit/handles.hpp"
#include "synaudit/metrics.hpp"
#include "synaudit/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace synaudit {

enum class Direction { HigherIsSynthetic, LowerIsSynthetic };

std::string to_string(Direction dir);
Direction parse_direction(const std::string& text);
inline Direction flipped(Direction dir) {
  return dir == Direction::HigherIsSynthetic ? Direction::LowerIsSynthetic : Direction::HigherIsSynthetic;
}

/// Orientation of the threshold test for a metric probed with a query kind.
/// Mixed-source queries behave like synthetic ones.
Direction direction_for(MetricId metric, const QueryKind& kind);

/// Strict comparison; a statistic equal to tau is real (0).
inline int threshold_label(double statistic, double tau, Direction dir) {
  return dir == Direction::HigherIsSynthetic ? (statistic > tau ? 1 : 0) : (statistic < tau ? 1 : 0);
}

struct ThresholdCandidate {
  double tau = 0.0;
  double accuracy = 0.0;
};

/// Every candidate (midpoints of consecutive distinct values plus one
/// sentinel a unit below the minimum and one a unit above the maximum),
/// sorted by tau, with the separation accuracy each achieves.
std::vector<ThresholdCandidate> evaluate_thresholds(const std::vector<double>& syn_values,
                                                    const std::vector<double>& real_values, Direction dir);

struct FittedThreshold {
  double tau = 0.0;
  Direction direction = Direction::HigherIsSynthetic;
  double reference_accuracy = 0.0;
  MetricId metric = MetricId::Confidence;
  std::string query_fingerprint;

  friend bool operator==(const FittedThreshold&, const FittedThreshold&) = default;
};

/// Best candidate from evaluate_thresholds; ties go to the smallest tau.
/// metric and query_fingerprint are left for the caller to fill.
FittedThreshold fit_threshold(const std::vector<double>& syn_values, const std::vector<double>& real_values,
                              Direction dir);

/// SHA-256 over the canonical byte encoding of the query set (kind, then each
/// example's label, input and reference).
std::string query_fingerprint(const QuerySet& queries);

nlohmann::json to_json(const FittedThreshold& t);
FittedThreshold threshold_from_json(const nlohmann::json& j);
void save_threshold(const FittedThreshold& t, const std::filesystem::path& path);
FittedThreshold load_threshold(const std::filesystem::path& path);

/// Fits tau on reference fleets: one mean metric per member, direction from
/// (metric, query kind), fingerprint of `queries`.
FittedThreshold calibrate_classifier_threshold(const std::vector<ClassifierPtr>& synthetic_refs,
                                               const std::vector<ClassifierPtr>& real_refs,
                                               const QuerySet& queries, MetricId metric);

FittedThreshold calibrate_generator_threshold(const std::vector<GeneratorPtr>& synthetic_refs,
                                              const std::vector<GeneratorPtr>& real_refs,
                                              const QuerySet& queries, MetricId metric,
                                              const EmbeddingTable* table = nullptr);

AuditVerdict audit_classifier(const ClassifierHandle& target, const QuerySet& queries, MetricId metric,
                              const FittedThreshold& t, std::uint64_t seed = 0);

AuditVerdict audit_generator(const GeneratorHandle& target, const QuerySet& queries, MetricId metric,
                             const FittedThreshold& t, std::uint64_t seed = 0,
                             const EmbeddingTable* table = nullptr);

}  // namespace synaudit
