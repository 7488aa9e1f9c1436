#include "synaudit/testbed/evaluate.hpp"

#include "synaudit/error.hpp"
#include "synaudit/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace synaudit::testbed {

EvalSummary summarize(std::vector<double> accuracies) {
  EvalSummary s;
  s.accuracies = std::move(accuracies);
  if (s.accuracies.empty()) return s;
  const double n = static_cast<double>(s.accuracies.size());
  s.mean = std::accumulate(s.accuracies.begin(), s.accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : s.accuracies) ss += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(ss / n);
  return s;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size())
    fail(Errc::DimensionMismatch, std::to_string(predicted.size()) + " predictions for " + std::to_string(labels.size()) + " targets");
  if (labels.empty()) fail(Errc::EmptyFleet, "no targets to score");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

EvalSummary evaluate_auditor(const AuditRun& method, const std::vector<int>& target_labels, int runs,
                             std::uint64_t seed) {
  if (runs < 1) fail(Errc::InvalidConfig, "runs must be positive");
  if (target_labels.empty()) fail(Errc::EmptyFleet, "no targets");
  std::map<int, std::size_t> counts;
  for (int l : target_labels) ++counts[l];
  if (counts.size() < 2 ||
      std::any_of(counts.begin(), counts.end(), [&](auto& kv) { return kv.second != counts.begin()->second; }))
    fail(Errc::UnbalancedLabels, "targets are not label-balanced");

  std::vector<double> acc;
  for (int r = 0; r < runs; ++r) acc.push_back(accuracy(method(derive_seed(seed, static_cast<std::uint64_t>(r))), target_labels));
  return summarize(std::move(acc));
}

}  // namespace synaudit::testbed
