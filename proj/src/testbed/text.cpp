#include "synaudit/testbed/text.hpp"

#include "synaudit/error.hpp"

#include <cstdio>
#include <numeric>

namespace synaudit::testbed {

TextCorpus make_text_corpus(const TextCorpusConfig& cfg) {
  if (cfg.vocab_size < 1 || cfg.length < 1 || cfg.size < 1) fail(Errc::InvalidConfig, "text corpus sizes must be positive");
  TextCorpus corpus;
  for (int i = 0; i < cfg.vocab_size; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%03d", i);
    corpus.vocab.emplace_back(buf);
  }
  Rng rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, cfg.vocab_size - 1);
  for (int n = 0; n < cfg.size; ++n) {
    TokenSeq seq;
    for (int i = 0; i < cfg.length; ++i) seq.push_back(corpus.vocab[static_cast<std::size_t>(pick(rng))]);
    corpus.pairs.push_back({seq, 0, seq});
  }
  return corpus;
}

QuerySet corpus_queries(const TextCorpus& corpus, int budget, std::uint64_t seed) {
  if (budget < 1) fail(Errc::EmptyQuerySet, "query budget must be positive");
  const auto n = corpus.pairs.size();
  if (static_cast<std::size_t>(budget) > n)
    fail(Errc::InsufficientData, "budget " + std::to_string(budget) + " exceeds corpus of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  QuerySet q;
  q.kind = QueryKind::real();
  for (std::size_t i = 0; i < static_cast<std::size_t>(budget); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
    q.examples.push_back(corpus.pairs[idx[i]]);
  }
  return q;
}

EmbeddingTable random_embedding_table(const std::vector<Token>& vocab, int dim, std::uint64_t seed) {
  if (dim < 1) fail(Errc::InvalidConfig, "embedding dim must be positive");
  Rng rng(seed);
  EmbeddingTable table;
  for (const auto& tok : vocab) {
    Eigen::VectorXd v = normal_vector(rng, dim);
    table.add(tok, v / v.norm());
  }
  return table;
}

NoisyCopyGenerator::NoisyCopyGenerator(double rate, std::uint64_t seed, std::vector<Token> vocab)
    : rate_(rate), seed_(seed), vocab_(std::move(vocab)) {
  if (!(rate_ >= 0.0 && rate_ <= 1.0)) fail(Errc::InvalidConfig, "noise rate must lie in [0, 1]");
  if (vocab_.empty() && rate_ > 0.0) fail(Errc::InsufficientData, "noisy copy needs a vocabulary");
}

namespace {
// FNV-1a, stable across platforms unlike std::hash.
std::uint64_t fingerprint(const TokenSeq& seq) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& tok : seq) {
    for (unsigned char c : tok) h = (h ^ c) * 0x100000001b3ULL;
    h = (h ^ 0xffu) * 0x100000001b3ULL;  // separator
  }
  return h;
}
}  // namespace

TokenSeq NoisyCopyGenerator::generate(const TokenSeq& input) const {
  if (rate_ == 0.0) return input;
  Rng rng(derive_seed(seed_, fingerprint(input)));
  std::uniform_int_distribution<std::size_t> pick(0, vocab_.size() - 1);
  TokenSeq out = input;
  for (auto& tok : out)
    if (uniform01(rng) < rate_) tok = vocab_[pick(rng)];
  return out;
}

std::vector<int> GeneratorBundle::labels() const {
  std::vector<int> out;
  for (const auto& m : members) out.push_back(m.label);
  return out;
}

std::vector<GeneratorPtr> GeneratorBundle::with_label(int label) const {
  std::vector<GeneratorPtr> out;
  for (const auto& m : members)
    if (m.label == label) out.push_back(m.generator);
  return out;
}

GeneratorBundle train_generator_fleet(const TextCorpus& corpus, const GeneratorFleetSpec& spec, int count,
                                      std::uint64_t seed) {
  if (count < 2 || count % 2 != 0) fail(Errc::InvalidConfig, "fleet size must be even and positive, got " + std::to_string(count));
  if (corpus.pairs.empty() || corpus.vocab.empty()) fail(Errc::InsufficientData, "generator fleet needs a non-empty corpus");
  const int half = count / 2;
  GeneratorBundle bundle;
  Scenario real_only;
  real_only.synthetic_proportion = 0.0;
  for (int i = 0; i < half; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "gen-real-%03d", i);
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    bundle.members.push_back({id, 0, real_only, s, spec.real_rate,
                              std::make_shared<NoisyCopyGenerator>(spec.real_rate, s, corpus.vocab)});
  }
  ScenarioParams params;
  for (int j = 0; j < half; ++j) {
    char id[32];
    std::snprintf(id, sizeof id, "gen-syn-%03d", j);
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(half + j));
    if (spec.kind == ScenarioKind::S2) params.proportion = spec.proportion.value_or(s2_grid()[static_cast<std::size_t>(j % 10)]);
    const Scenario scenario = make_scenario(spec.kind, params, derive_seed(s, 1));
    const double rate = spec.real_rate + scenario.synthetic_proportion * (spec.synthetic_rate - spec.real_rate);
    bundle.members.push_back({id, 1, scenario, s, rate, std::make_shared<NoisyCopyGenerator>(rate, s, corpus.vocab)});
  }
  return bundle;
}

}  // namespace synaudit::testbed
