#pragma once

#include "synaudit/handles.hpp"
#include "synaudit/metrics.hpp"
#include "synaudit/testbed/fleet.hpp"

namespace synaudit::testbed {

struct TextCorpusConfig {
  int vocab_size = 50;
  int length = 20;
  int size = 1000;
  std::uint64_t seed = 0;
};

/// Copy-task corpus: each pair's reference output equals its input.
struct TextCorpus {
  std::vector<Token> vocab;
  std::vector<LabeledExample> pairs;
};

TextCorpus make_text_corpus(const TextCorpusConfig& cfg);

/// Real-kind query set sampled without replacement from the corpus.
QuerySet corpus_queries(const TextCorpus& corpus, int budget, std::uint64_t seed);

/// Random unit vectors, one per vocabulary token.
EmbeddingTable random_embedding_table(const std::vector<Token>& vocab, int dim, std::uint64_t seed);

/// Copies its input, replacing each token with probability `rate` by a
/// vocabulary token. The edits depend only on (seed, input).
class NoisyCopyGenerator final : public GeneratorHandle {
 public:
  NoisyCopyGenerator(double rate, std::uint64_t seed, std::vector<Token> vocab);

  TokenSeq generate(const TokenSeq& input) const override;
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  std::uint64_t seed_;
  std::vector<Token> vocab_;
};

struct GeneratorRecord {
  std::string id;
  int label = 0;
  Scenario scenario;
  std::uint64_t seed = 0;
  double rate = 0.0;
  std::shared_ptr<const NoisyCopyGenerator> generator;
};

struct GeneratorBundle {
  std::vector<GeneratorRecord> members;

  std::vector<int> labels() const;
  std::vector<GeneratorPtr> with_label(int label) const;
};

struct GeneratorFleetSpec {
  ScenarioKind kind = ScenarioKind::S1;
  std::optional<double> proportion;  // as in FleetSpec
  double real_rate = 0.1;
  double synthetic_rate = 0.5;
};

/// count/2 real members at real_rate; count/2 synthetic members whose rate
/// moves from real_rate toward synthetic_rate with their synthetic share.
/// Throws InvalidConfig, InsufficientData.
GeneratorBundle train_generator_fleet(const TextCorpus& corpus, const GeneratorFleetSpec& spec, int count,
                                      std::uint64_t seed);

}  // namespace synaudit::testbed
