#pragma once

#include "synaudit/handles.hpp"
#include "synaudit/types.hpp"

#include <filesystem>
#include <unordered_map>

namespace synaudit {

/// -sum p ln p in nats, with 0 ln 0 = 0. Works on any Eigen vector expression.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar v = p(i);
    if (v > Scalar(0)) h -= v * std::log(v);
  }
  return h;
}

inline double entropy(const Posterior& p) { return entropy(p.probs()); }

/// p[y]. Throws IndexOutOfRange for y outside [0, c).
double confidence(const Posterior& p, int y);

/// Per-example value of a classifier metric.
double metric_value(const Posterior& p, int y, MetricId metric);

/// Arithmetic mean of the per-example metric over the query set.
double mean_metric(const ClassifierHandle& target, const QuerySet& queries, MetricId metric);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

/// LCS-based ROUGE-L with beta = 1.
RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

/// Unsmoothed BLEU. n runs from 1 to min(max_n, |candidate|).
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n = 4);

/// Token to unit-norm vector. Every vector has the same width.
class EmbeddingTable {
 public:
  static constexpr double kNormTolerance = 1e-6;

  void add(const Token& token, Eigen::VectorXd vec);
  const Eigen::VectorXd& at(const Token& token) const;
  bool contains(const Token& token) const { return table_.count(token) > 0; }
  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return table_.size(); }

  /// JSON-lines {"token": ..., "vector": [...]}.
  static EmbeddingTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::unordered_map<Token, Eigen::VectorXd> table_;
  Eigen::Index dim_ = -1;
};

/// Greedy-match F1 over cosine similarities of static embeddings.
double embed_f1(const TokenSeq& candidate, const TokenSeq& reference, const EmbeddingTable& table);

/// Mean of metric(generate(x_i), reference_i). RougeL contributes its F1.
/// EmbedF1 needs `table`.
double generator_mean_score(const GeneratorHandle& target, const QuerySet& queries, MetricId metric,
                            const EmbeddingTable* table = nullptr);

/// Per-pair generator metric used by generator_mean_score.
double sequence_metric(const TokenSeq& candidate, const TokenSeq& reference, MetricId metric,
                       const EmbeddingTable* table = nullptr);

}  // namespace synaudit
