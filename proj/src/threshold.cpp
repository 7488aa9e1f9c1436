#include "synaudit/threshold.hpp"

#include "synaudit/error.hpp"
#include "synaudit/io.hpp"

#include <algorithm>
#include <bit>

namespace synaudit {

using nlohmann::json;

std::string to_string(Direction dir) {
  return dir == Direction::HigherIsSynthetic ? "higher_is_synthetic" : "lower_is_synthetic";
}

Direction parse_direction(const std::string& text) {
  if (text == "higher_is_synthetic") return Direction::HigherIsSynthetic;
  if (text == "lower_is_synthetic") return Direction::LowerIsSynthetic;
  fail(Errc::SchemaError, "unknown direction '" + text + "'");
}

Direction direction_for(MetricId metric, const QueryKind& kind) {
  const bool real = kind.tag == QueryKind::Tag::Real;
  const bool synthetic = kind.is_synthetic_like();
  const auto unsupported = [&]() -> Direction {
    fail(Errc::UnsupportedCombination, to_string(metric) + " with " + to_string(kind) + " queries");
  };
  switch (metric) {
    case MetricId::Confidence:
    case MetricId::Accuracy:
      if (synthetic) return Direction::HigherIsSynthetic;
      if (real) return Direction::LowerIsSynthetic;
      return unsupported();
    case MetricId::Entropy:
      if (synthetic) return Direction::LowerIsSynthetic;
      if (real) return Direction::HigherIsSynthetic;
      return unsupported();
    case MetricId::RougeL:
    case MetricId::Bleu:
    case MetricId::EmbedF1:
      if (real) return Direction::LowerIsSynthetic;
      return unsupported();
  }
  return unsupported();
}

std::vector<ThresholdCandidate> evaluate_thresholds(const std::vector<double>& syn_values,
                                                    const std::vector<double>& real_values, Direction dir) {
  if (syn_values.empty() || real_values.empty()) fail(Errc::EmptyFleet, "both reference fleets must be non-empty");

  std::vector<double> merged(syn_values);
  merged.insert(merged.end(), real_values.begin(), real_values.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  std::vector<double> taus;
  taus.reserve(merged.size() + 1);
  taus.push_back(merged.front() - 1.0);
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) taus.push_back(merged[i] + (merged[i + 1] - merged[i]) / 2.0);
  taus.push_back(merged.back() + 1.0);

  const double total = static_cast<double>(syn_values.size() + real_values.size());
  std::vector<ThresholdCandidate> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    std::size_t correct = 0;
    for (double v : syn_values) correct += threshold_label(v, tau, dir) == 1;
    for (double v : real_values) correct += threshold_label(v, tau, dir) == 0;
    out.push_back({tau, static_cast<double>(correct) / total});
  }
  return out;
}

FittedThreshold fit_threshold(const std::vector<double>& syn_values, const std::vector<double>& real_values,
                              Direction dir) {
  const auto sweep = evaluate_thresholds(syn_values, real_values, dir);
  auto best = sweep.front();
  for (const auto& c : sweep)
    if (c.accuracy > best.accuracy) best = c;
  FittedThreshold t;
  t.tau = best.tau;
  t.direction = dir;
  t.reference_accuracy = best.accuracy;
  return t;
}

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_tokens(std::string& out, const TokenSeq& seq) {
  put_u64(out, seq.size());
  for (const auto& tok : seq) {
    put_u64(out, tok.size());
    out += tok;
  }
}

}  // namespace

std::string query_fingerprint(const QuerySet& queries) {
  std::string bytes = to_string(queries.kind);
  put_u64(bytes, queries.examples.size());
  for (const auto& ex : queries.examples) {
    put_u64(bytes, static_cast<std::uint64_t>(static_cast<std::int64_t>(ex.label)));
    if (ex.is_features()) {
      bytes.push_back('f');
      const auto& x = ex.features();
      put_u64(bytes, static_cast<std::uint64_t>(x.size()));
      for (Eigen::Index i = 0; i < x.size(); ++i) put_u64(bytes, std::bit_cast<std::uint64_t>(x[i]));
    } else {
      bytes.push_back('t');
      put_tokens(bytes, ex.tokens());
    }
    put_tokens(bytes, ex.reference);
  }
  return sha256_hex(bytes);
}

json to_json(const FittedThreshold& t) {
  return json{{"metric", to_string(t.metric)},
              {"direction", to_string(t.direction)},
              {"tau", t.tau},
              {"reference_accuracy", t.reference_accuracy},
              {"query_fingerprint", t.query_fingerprint}};
}

FittedThreshold threshold_from_json(const json& j) {
  try {
    FittedThreshold t;
    t.metric = parse_metric(j.at("metric").get<std::string>());
    t.direction = parse_direction(j.at("direction").get<std::string>());
    t.tau = j.at("tau").get<double>();
    t.reference_accuracy = j.at("reference_accuracy").get<double>();
    t.query_fingerprint = j.at("query_fingerprint").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, std::string("bad threshold record: ") + e.what());
  }
}

void save_threshold(const FittedThreshold& t, const std::filesystem::path& path) {
  write_file(path, to_json(t).dump(2) + "\n");
}

FittedThreshold load_threshold(const std::filesystem::path& path) {
  try {
    return threshold_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
}

FittedThreshold calibrate_classifier_threshold(const std::vector<ClassifierPtr>& synthetic_refs,
                                               const std::vector<ClassifierPtr>& real_refs,
                                               const QuerySet& queries, MetricId metric) {
  if (!is_classifier_metric(metric)) fail(Errc::UnsupportedMetric, to_string(metric) + " is not a classifier metric");
  const Direction dir = direction_for(metric, queries.kind);
  const auto measure = [&](const std::vector<ClassifierPtr>& fleet) {
    std::vector<double> values;
    values.reserve(fleet.size());
    for (const auto& m : fleet) values.push_back(mean_metric(*m, queries, metric));
    return values;
  };
  auto t = fit_threshold(measure(synthetic_refs), measure(real_refs), dir);
  t.metric = metric;
  t.query_fingerprint = query_fingerprint(queries);
  return t;
}

FittedThreshold calibrate_generator_threshold(const std::vector<GeneratorPtr>& synthetic_refs,
                                              const std::vector<GeneratorPtr>& real_refs,
                                              const QuerySet& queries, MetricId metric,
                                              const EmbeddingTable* table) {
  const Direction dir = direction_for(metric, queries.kind);
  const auto measure = [&](const std::vector<GeneratorPtr>& fleet) {
    std::vector<double> values;
    values.reserve(fleet.size());
    for (const auto& g : fleet) values.push_back(generator_mean_score(*g, queries, metric, table));
    return values;
  };
  auto t = fit_threshold(measure(synthetic_refs), measure(real_refs), dir);
  t.metric = metric;
  t.query_fingerprint = query_fingerprint(queries);
  return t;
}

namespace {

void check_pairing(const QuerySet& queries, MetricId metric, const FittedThreshold& t) {
  if (t.metric != metric) {
    fail(Errc::MetricMismatch, "threshold fitted on " + to_string(t.metric) + ", audit asks for " + to_string(metric));
  }
  if (query_fingerprint(queries) != t.query_fingerprint) {
    fail(Errc::FingerprintMismatch, "query set differs from the one that fitted the threshold");
  }
}

AuditVerdict make_verdict(double statistic, MetricId metric, const QuerySet& queries, const FittedThreshold& t,
                          std::uint64_t seed) {
  AuditVerdict v;
  v.statistic = statistic;
  v.threshold = t.tau;
  v.label = threshold_label(statistic, t.tau, t.direction);
  v.method = "metric:" + to_string(metric);
  v.query_kind = to_string(queries.kind);
  v.seed = seed;
  return v;
}

}  // namespace

AuditVerdict audit_classifier(const ClassifierHandle& target, const QuerySet& queries, MetricId metric,
                              const FittedThreshold& t, std::uint64_t seed) {
  check_pairing(queries, metric, t);
  return make_verdict(mean_metric(target, queries, metric), metric, queries, t, seed);
}

AuditVerdict audit_generator(const GeneratorHandle& target, const QuerySet& queries, MetricId metric,
                             const FittedThreshold& t, std::uint64_t seed, const EmbeddingTable* table) {
  check_pairing(queries, metric, t);
  return make_verdict(generator_mean_score(target, queries, metric, table), metric, queries, t, seed);
}

}  // namespace synaudit
