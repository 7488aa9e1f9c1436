#include "synaudit/metrics.hpp"

#include "synaudit/error.hpp"
#include "synaudit/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace synaudit {

double confidence(const Posterior& p, int y) {
  if (y < 0 || y >= p.size()) {
    fail(Errc::IndexOutOfRange, "label " + std::to_string(y) + " outside [0," + std::to_string(p.size()) + ")");
  }
  return p[y];
}

double metric_value(const Posterior& p, int y, MetricId metric) {
  switch (metric) {
    case MetricId::Confidence: return confidence(p, y);
    case MetricId::Entropy: return entropy(p);
    case MetricId::Accuracy:
      if (y < 0 || y >= p.size()) fail(Errc::IndexOutOfRange, "label " + std::to_string(y));
      return p.argmax() == y ? 1.0 : 0.0;
    default:
      fail(Errc::UnsupportedMetric, to_string(metric) + " is not a classifier metric");
  }
}

double mean_metric(const ClassifierHandle& target, const QuerySet& queries, MetricId metric) {
  if (!is_classifier_metric(metric)) fail(Errc::UnsupportedMetric, to_string(metric) + " is not a classifier metric");
  validate_query_set(queries, target);
  double sum = 0.0;
  for (const auto& ex : queries.examples) sum += metric_value(target.predict(ex.features()), ex.label, metric);
  return sum / static_cast<double>(queries.examples.size());
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  // two-row DP over b
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) fail(Errc::EmptySequence, "rouge_l needs non-empty sequences");
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  RougeScore s;
  s.precision = lcs / static_cast<double>(candidate.size());
  s.recall = lcs / static_cast<double>(reference.size());
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

namespace {

std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[TokenSeq(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n) {
  if (candidate.empty() || reference.empty()) fail(Errc::EmptySequence, "bleu needs non-empty sequences");
  if (max_n < 1) fail(Errc::IndexOutOfRange, "max_n must be positive");
  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(max_n), candidate.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= top; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t clipped = 0;
    for (const auto& [gram, count] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    const double total = static_cast<double>(candidate.size() - n + 1);
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return bp * std::exp(log_sum / static_cast<double>(top));
}

// ---- embeddings ------------------------------------------------------------

void EmbeddingTable::add(const Token& token, Eigen::VectorXd vec) {
  if (dim_ >= 0 && vec.size() != dim_) fail(Errc::DimensionMismatch, "embedding for '" + token + "' has wrong width");
  if (std::abs(vec.norm() - 1.0) > kNormTolerance) fail(Errc::SchemaError, "embedding for '" + token + "' is not unit norm");
  dim_ = vec.size();
  table_[token] = std::move(vec);
}

const Eigen::VectorXd& EmbeddingTable::at(const Token& token) const {
  auto it = table_.find(token);
  if (it == table_.end()) fail(Errc::UnknownToken, "token '" + token + "' not in embedding table");
  return it->second;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      const auto values = rec.at("vector").get<std::vector<double>>();
      table.add(rec.at("token").get<std::string>(),
                Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::SchemaError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::vector<const Token*> keys;
  for (const auto& [tok, _] : table_) keys.push_back(&tok);
  std::sort(keys.begin(), keys.end(), [](auto a, auto b) { return *a < *b; });
  std::string out;
  for (const auto* tok : keys) {
    const auto& v = table_.at(*tok);
    nlohmann::json rec{{"token", *tok}, {"vector", std::vector<double>(v.data(), v.data() + v.size())}};
    out += rec.dump() + "\n";
  }
  write_file(path, out);
}

double embed_f1(const TokenSeq& candidate, const TokenSeq& reference, const EmbeddingTable& table) {
  if (candidate.empty() || reference.empty()) fail(Errc::EmptySequence, "embed_f1 needs non-empty sequences");
  const auto stack = [&](const TokenSeq& seq) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(seq.size()), std::max<Eigen::Index>(table.dim(), 0));
    for (std::size_t i = 0; i < seq.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = table.at(seq[i]).transpose();
    return m;
  };
  const Eigen::MatrixXd cand = stack(candidate);
  const Eigen::MatrixXd ref = stack(reference);
  // rows are unit norm, so inner products are cosines
  const Eigen::MatrixXd sim = cand * ref.transpose();
  const double precision = sim.rowwise().maxCoeff().mean();
  const double recall = sim.colwise().maxCoeff().mean();
  const double denom = precision + recall;
  return denom != 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

double sequence_metric(const TokenSeq& candidate, const TokenSeq& reference, MetricId metric,
                       const EmbeddingTable* table) {
  switch (metric) {
    case MetricId::RougeL: return rouge_l(candidate, reference).f1;
    case MetricId::Bleu: return bleu(candidate, reference);
    case MetricId::EmbedF1:
      if (!table) fail(Errc::UnsupportedMetric, "embed_f1 needs an embedding table");
      return embed_f1(candidate, reference, *table);
    default:
      fail(Errc::UnsupportedMetric, to_string(metric) + " is not a generator metric");
  }
}

double generator_mean_score(const GeneratorHandle& target, const QuerySet& queries, MetricId metric,
                            const EmbeddingTable* table) {
  if (is_classifier_metric(metric)) fail(Errc::UnsupportedMetric, to_string(metric) + " is not a generator metric");
  if (queries.examples.empty()) fail(Errc::EmptyQuerySet, "query set has no examples");
  double sum = 0.0;
  for (const auto& ex : queries.examples) {
    if (ex.is_features()) fail(Errc::KindMismatch, "generator queries must be token sequences");
    sum += sequence_metric(target.generate(ex.tokens()), ex.reference, metric, table);
  }
  return sum / static_cast<double>(queries.examples.size());
}

}  // namespace synaudit
