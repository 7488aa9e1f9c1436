#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace synaudit::testbed {

inline constexpr int kEvaluationRuns = 5;

struct EvalSummary {
  std::vector<double> accuracies;  // one per run
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

EvalSummary summarize(std::vector<double> accuracies);

/// Fraction of positions where predictions match labels.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

/// Runs `method` end to end once per run seed (derive_seed(seed, run)) and
/// scores its predictions against `target_labels`. Throws UnbalancedLabels
/// when the labels are not equally represented.
using AuditRun = std::function<std::vector<int>(std::uint64_t run_seed)>;
EvalSummary evaluate_auditor(const AuditRun& method, const std::vector<int>& target_labels,
                             int runs = kEvaluationRuns, std::uint64_t seed = 0);

}  // namespace synaudit::testbed
