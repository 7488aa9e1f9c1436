#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace synaudit {

using Token = std::string;
using TokenSeq = std::vector<Token>;

inline constexpr double kPosteriorTolerance = 1e-6;

/// Class-probability vector returned by every classifier handle. Construction
/// validates it; an unnormalized vector is rejected, never renormalized.
class Posterior {
 public:
  explicit Posterior(Eigen::VectorXd probs);

  const Eigen::VectorXd& probs() const noexcept { return probs_; }
  Eigen::Index size() const noexcept { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_[i]; }

  /// Lowest index among the maximal entries.
  int argmax() const noexcept;

  friend bool operator==(const Posterior& a, const Posterior& b) { return a.probs_ == b.probs_; }

 private:
  Eigen::VectorXd probs_;
};

/// A feature vector (testbed mode) or a token sequence (text mode).
using ExampleInput = std::variant<Eigen::VectorXd, TokenSeq>;

struct LabeledExample {
  ExampleInput input;
  int label = 0;
  // Reference output for generator queries; empty for classifier queries.
  TokenSeq reference;

  bool is_features() const noexcept { return std::holds_alternative<Eigen::VectorXd>(input); }
  const Eigen::VectorXd& features() const { return std::get<Eigen::VectorXd>(input); }
  const TokenSeq& tokens() const { return std::get<TokenSeq>(input); }
};

struct QueryKind {
  enum class Tag { Real, Synthetic, MixedSource, Tuned };

  Tag tag = Tag::Real;
  int source = -1;  // only meaningful for Synthetic

  static QueryKind real() { return {Tag::Real, -1}; }
  static QueryKind synthetic(int source) { return {Tag::Synthetic, source}; }
  static QueryKind mixed() { return {Tag::MixedSource, -1}; }
  static QueryKind tuned() { return {Tag::Tuned, -1}; }

  bool is_synthetic_like() const noexcept { return tag == Tag::Synthetic || tag == Tag::MixedSource; }

  friend bool operator==(const QueryKind&, const QueryKind&) = default;
};

/// "real", "synthetic:<id>", "mixed", "tuned".
std::string to_string(const QueryKind& kind);
QueryKind parse_query_kind(const std::string& text);

struct QuerySet {
  std::vector<LabeledExample> examples;
  QueryKind kind;

  std::size_t budget() const noexcept { return examples.size(); }
};

enum class MetricId { Confidence, Entropy, Accuracy, RougeL, Bleu, EmbedF1 };

std::string to_string(MetricId metric);
MetricId parse_metric(const std::string& text);
bool is_classifier_metric(MetricId metric) noexcept;

struct AuditVerdict {
  int label = 0;
  double statistic = 0.0;
  std::optional<double> threshold;
  std::string method;
  std::string query_kind;
  std::uint64_t seed = 0;
  std::string target;  // target identifier, empty when anonymous

  friend bool operator==(const AuditVerdict&, const AuditVerdict&) = default;
};

}  // namespace synaudit
