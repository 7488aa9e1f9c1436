#include "synaudit/types.hpp"

#include "synaudit/error.hpp"
#include "synaudit/handles.hpp"

#include <cmath>

namespace synaudit {

Posterior::Posterior(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) fail(Errc::InvalidPosterior, "posterior needs at least two classes");
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    const double p = probs_[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(Errc::InvalidPosterior, "entry " + std::to_string(i) + " outside [0,1]: " + std::to_string(p));
    }
  }
  const double sum = probs_.sum();
  if (std::abs(sum - 1.0) > kPosteriorTolerance) {
    fail(Errc::InvalidPosterior, "entries sum to " + std::to_string(sum));
  }
}

int Posterior::argmax() const noexcept {
  int best = 0;
  for (Eigen::Index i = 1; i < probs_.size(); ++i) {
    if (probs_[i] > probs_[best]) best = static_cast<int>(i);
  }
  return best;
}

std::string to_string(const QueryKind& kind) {
  switch (kind.tag) {
    case QueryKind::Tag::Real: return "real";
    case QueryKind::Tag::Synthetic: return "synthetic:" + std::to_string(kind.source);
    case QueryKind::Tag::MixedSource: return "mixed";
    case QueryKind::Tag::Tuned: return "tuned";
  }
  return "real";
}

QueryKind parse_query_kind(const std::string& text) {
  if (text == "real") return QueryKind::real();
  if (text == "mixed") return QueryKind::mixed();
  if (text == "tuned") return QueryKind::tuned();
  if (text == "synthetic") return QueryKind::synthetic(0);
  constexpr std::string_view prefix = "synthetic:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      return QueryKind::synthetic(std::stoi(text.substr(prefix.size())));
    } catch (const std::exception&) {
    }
  }
  fail(Errc::SchemaError, "unknown query kind '" + text + "'");
}

std::string to_string(MetricId metric) {
  switch (metric) {
    case MetricId::Confidence: return "confidence";
    case MetricId::Entropy: return "entropy";
    case MetricId::Accuracy: return "accuracy";
    case MetricId::RougeL: return "rouge_l";
    case MetricId::Bleu: return "bleu";
    case MetricId::EmbedF1: return "embed_f1";
  }
  return "confidence";
}

MetricId parse_metric(const std::string& text) {
  if (text == "confidence") return MetricId::Confidence;
  if (text == "entropy") return MetricId::Entropy;
  if (text == "accuracy") return MetricId::Accuracy;
  if (text == "rouge_l" || text == "rougel" || text == "rouge-l") return MetricId::RougeL;
  if (text == "bleu") return MetricId::Bleu;
  if (text == "embed_f1" || text == "embedf1") return MetricId::EmbedF1;
  fail(Errc::SchemaError, "unknown metric '" + text + "'");
}

bool is_classifier_metric(MetricId metric) noexcept {
  return metric == MetricId::Confidence || metric == MetricId::Entropy || metric == MetricId::Accuracy;
}

// ---- handles ---------------------------------------------------------------

namespace {
[[noreturn]] void deny(const char* what) {
  fail(Errc::BlackBoxAccess, std::string(what) + " requires white-box access");
}
}  // namespace

Eigen::Index ClassifierHandle::embedding_dim() const { deny("embedding_dim"); }
Eigen::VectorXd ClassifierHandle::embed(const Eigen::VectorXd&) const { deny("embed"); }
Posterior ClassifierHandle::forward_from_embedding(const Eigen::VectorXd&) const {
  deny("forward_from_embedding");
}
Eigen::VectorXd ClassifierHandle::posterior_vjp(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
  deny("posterior_vjp");
}
Eigen::VectorXd ClassifierHandle::parameters() const { deny("parameters"); }

BlackBoxClassifier::BlackBoxClassifier(ClassifierPtr inner) : inner_(std::move(inner)) {
  if (!inner_) fail(Errc::MissingArtifact, "null classifier handle");
}

void validate_query_set(const QuerySet& queries, const ClassifierHandle& target) {
  if (queries.examples.empty()) fail(Errc::EmptyQuerySet, "query set has no examples");

  const bool tuned = queries.kind.tag == QueryKind::Tag::Tuned;
  if (tuned && target.access() != Access::WhiteBox) {
    fail(Errc::KindMismatch, "tuned queries need a white-box target");
  }
  const Eigen::Index width = tuned ? target.embedding_dim() : target.input_dim();
  for (std::size_t i = 0; i < queries.examples.size(); ++i) {
    const auto& ex = queries.examples[i];
    if (!ex.is_features()) {
      fail(Errc::KindMismatch, "example " + std::to_string(i) + " is a token sequence; classifier expects features");
    }
    if (ex.features().size() != width) {
      fail(Errc::DimensionMismatch, "example " + std::to_string(i) + " has width " +
                                        std::to_string(ex.features().size()) + ", target expects " +
                                        std::to_string(width));
    }
    if (ex.label < 0 || ex.label >= target.class_count()) {
      fail(Errc::DimensionMismatch, "example " + std::to_string(i) + " label " + std::to_string(ex.label) +
                                        " outside [0," + std::to_string(target.class_count()) + ")");
    }
  }
}

}  // namespace synaudit
