#include "fixtures.hpp"

#include "synaudit/error.hpp"
#include "synaudit/metrics.hpp"
#include "synaudit/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace synaudit;
using synaudit::testing::FnClassifier;
using synaudit::testing::vec;
using synaudit::testing::words;

namespace {

// LCS by enumerating every subsequence of `a` and checking it against `b`.
std::size_t lcs_by_enumeration(const TokenSeq& a, const TokenSeq& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto len = static_cast<std::size_t>(std::popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

// Full-table LCS, independent of the two-row version in the library.
std::size_t lcs_table(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;)
    for (std::size_t j = b.size(); j-- > 0;)
      t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
  return t[0][0];
}

// BLEU from direct n-gram counting with nested loops.
double bleu_by_counting(const TokenSeq& cand, const TokenSeq& ref, int max_n) {
  const int top = std::min<int>(max_n, static_cast<int>(cand.size()));
  double log_sum = 0.0;
  for (int n = 1; n <= top; ++n) {
    const auto same = [&](const TokenSeq& s, std::size_t i, const TokenSeq& t, std::size_t j) {
      for (int k = 0; k < n; ++k)
        if (s[i + k] != t[j + k]) return false;
      return true;
    };
    std::size_t clipped = 0;
    const std::size_t cn = cand.size() - n + 1;
    const std::size_t rn = ref.size() >= static_cast<std::size_t>(n) ? ref.size() - n + 1 : 0;
    for (std::size_t i = 0; i < cn; ++i) {
      bool first = true;
      for (std::size_t p = 0; p < i; ++p)
        if (same(cand, p, cand, i)) first = false;
      if (!first) continue;
      std::size_t in_cand = 0, in_ref = 0;
      for (std::size_t p = 0; p < cn; ++p) in_cand += same(cand, p, cand, i);
      for (std::size_t p = 0; p < rn; ++p) in_ref += same(ref, p, cand, i);
      clipped += std::min(in_cand, in_ref);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(cn));
  }
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
  return bp * std::exp(log_sum / top);
}

TokenSeq random_seq(Rng& rng, int max_len, int vocab) {
  const int len = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_len));
  TokenSeq s;
  for (int i = 0; i < len; ++i) s.push_back(std::string(1, static_cast<char>('a' + rng() % static_cast<unsigned>(vocab))));
  return s;
}

Eigen::VectorXd random_simplex(Rng& rng, int c) {
  Eigen::VectorXd p(c);
  for (int i = 0; i < c; ++i) p[i] = -std::log(1.0 - uniform01(rng));
  return p / p.sum();
}

EmbeddingTable orthonormal_table(const std::vector<std::string>& toks) {
  EmbeddingTable t;
  const auto n = static_cast<Eigen::Index>(toks.size());
  for (Eigen::Index i = 0; i < n; ++i) t.add(toks[static_cast<std::size_t>(i)], Eigen::VectorXd::Unit(n, i));
  return t;
}

class EchoGenerator final : public GeneratorHandle {
 public:
  TokenSeq generate(const TokenSeq& x) const override { return x; }
};

class ShiftGenerator final : public GeneratorHandle {
 public:
  TokenSeq generate(const TokenSeq& x) const override {
    TokenSeq out;
    for (const auto& t : x) out.push_back(t + "_");
    return out;
  }
};

// Replaces every third token from a seeded position.
class DropGenerator final : public GeneratorHandle {
 public:
  explicit DropGenerator(std::size_t phase) : phase_(phase) {}
  TokenSeq generate(const TokenSeq& x) const override {
    TokenSeq out;
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back((i + phase_) % 3 == 0 ? "zz" : x[i]);
    return out;
  }

 private:
  std::size_t phase_;
};

}  // namespace

TEST(Confidence, ReadsLabeledCoordinate) {
  EXPECT_DOUBLE_EQ(confidence(Posterior(vec({0.7, 0.3})), 0), 0.7);
  EXPECT_DOUBLE_EQ(confidence(Posterior(vec({0.25, 0.25, 0.25, 0.25})), 2), 0.25);
  EXPECT_DOUBLE_EQ(confidence(Posterior(vec({0.1, 0.2, 0.7})), 2), 0.7);
  EXPECT_THROW(confidence(Posterior(vec({0.5, 0.5})), 2), AuditError);
  EXPECT_THROW(confidence(Posterior(vec({0.5, 0.5})), -1), AuditError);
}

TEST(Entropy, AnalyticValues) {
  EXPECT_NEAR(entropy(Posterior(vec({1.0, 0.0}))), 0.0, 1e-12);
  EXPECT_NEAR(entropy(Posterior(vec({0.5, 0.5}))), std::log(2.0), 1e-12);
  EXPECT_NEAR(entropy(Posterior(vec({0.5, 0.25, 0.25}))), 1.5 * std::log(2.0), 1e-12);
}

TEST(Entropy, WorksOnFloatExpressions) {
  Eigen::Vector4f p = Eigen::Vector4f::Constant(1.0f) / 4.0f;
  EXPECT_NEAR(entropy(p.head(2) * 2.0f), std::log(2.0f), 1e-6f);
}

TEST(Entropy, BoundsAndPermutationInvariance) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int c = 2 + static_cast<int>(rng() % 6);
    Eigen::VectorXd p = random_simplex(rng, c);
    const double h = entropy(Posterior(p));
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(c)) + 1e-12);

    std::vector<int> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::VectorXd q(c);
    for (int i = 0; i < c; ++i) q[perm[static_cast<std::size_t>(i)]] = p[i];
    EXPECT_NEAR(entropy(Posterior(q)), h, 1e-12);
    const int y = static_cast<int>(rng() % static_cast<unsigned>(c));
    EXPECT_EQ(confidence(Posterior(q), perm[static_cast<std::size_t>(y)]), confidence(Posterior(p), y));
  }
  EXPECT_NEAR(entropy(Posterior(Eigen::VectorXd::Constant(5, 0.2))), std::log(5.0), 1e-12);
}

TEST(MeanMetric, SimpleMeans) {
  auto target = std::make_shared<FnClassifier>(2, 1, [](const Eigen::VectorXd& x) { return vec({x[0], 1 - x[0]}); });
  QuerySet q;
  q.examples = {{vec({0.8}), 0, {}}, {vec({0.6}), 0, {}}};
  EXPECT_NEAR(mean_metric(*target, q, MetricId::Confidence), 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(mean_metric(*target, q, MetricId::Accuracy), 1.0);
  q.examples = {{vec({0.5}), 1, {}}};
  EXPECT_DOUBLE_EQ(mean_metric(*target, q, MetricId::Accuracy), 0.0);  // tie goes to class 0
  EXPECT_THROW(mean_metric(*target, QuerySet{}, MetricId::Confidence), AuditError);
  EXPECT_THROW(mean_metric(*target, q, MetricId::RougeL), AuditError);
}

TEST(MeanMetric, MatchesPerExampleLoopAndIsLinear) {
  Rng rng(5);
  Eigen::MatrixXd w = normal_matrix(rng, 3, 4);
  auto target = std::make_shared<FnClassifier>(3, 4, [w](const Eigen::VectorXd& x) {
    Eigen::VectorXd z = w * x;
    Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return Eigen::VectorXd(e / e.sum());
  });
  QuerySet q;
  for (int i = 0; i < 10; ++i) q.examples.push_back({normal_vector(rng, 4), static_cast<int>(rng() % 3), {}});
  for (MetricId m : {MetricId::Confidence, MetricId::Entropy, MetricId::Accuracy}) {
    double sum = 0.0;
    for (const auto& ex : q.examples) {
      Eigen::VectorXd z = w * ex.features();
      Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
      Eigen::VectorXd p = e / e.sum();
      Eigen::Index best;
      p.maxCoeff(&best);
      double v = 0.0;
      if (m == MetricId::Confidence) v = p[ex.label];
      if (m == MetricId::Entropy) v = -(p.array() * p.array().log()).sum();
      if (m == MetricId::Accuracy) v = best == ex.label ? 1.0 : 0.0;
      sum += v;
    }
    EXPECT_NEAR(mean_metric(*target, q, m), sum / 10.0, 1e-12);

    QuerySet a, b;
    a.examples.assign(q.examples.begin(), q.examples.begin() + 3);
    b.examples.assign(q.examples.begin() + 3, q.examples.end());
    EXPECT_NEAR(mean_metric(*target, q, m), 0.3 * mean_metric(*target, a, m) + 0.7 * mean_metric(*target, b, m), 1e-12);
  }
}

TEST(RougeL, Examples) {
  auto s = rouge_l(words("a b c"), words("a b c"));
  EXPECT_DOUBLE_EQ(s.f1, 1.0);
  s = rouge_l(words("a b c"), words("a c"));
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_NEAR(s.f1, 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(rouge_l(words("a b"), words("c d")).f1, 0.0);
  EXPECT_THROW(rouge_l({}, words("a")), AuditError);
}

TEST(RougeL, MatchesEnumerationOracleAndIsSymmetric) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_seq(rng, 12, 8);
    const auto b = random_seq(rng, 12, 8);
    const auto lcs = lcs_by_enumeration(a, b);
    EXPECT_EQ(lcs_length(a, b), lcs);
    EXPECT_EQ(lcs_table(a, b), lcs);
    const auto ab = rouge_l(a, b);
    const auto ba = rouge_l(b, a);
    EXPECT_EQ(ab.precision, ba.recall);
    EXPECT_EQ(ab.recall, ba.precision);
    EXPECT_EQ(ab.f1, ba.f1);
  }
}

TEST(Bleu, Examples) {
  EXPECT_DOUBLE_EQ(bleu(words("a b c d e"), words("a b c d e")), 1.0);
  EXPECT_NEAR(bleu(words("a b"), words("a b c d")), std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(bleu(words("x y z"), words("a b c")), 0.0);
  EXPECT_THROW(bleu(words("a"), {}), AuditError);
}

TEST(Bleu, MatchesCountingOracle) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_seq(rng, 12, 4);
    const auto b = random_seq(rng, 12, 4);
    const double got = bleu(a, b);
    EXPECT_NEAR(got, bleu_by_counting(a, b, 4), 1e-12);
    EXPECT_LE(got, 1.0);
    if (a.size() >= 4) EXPECT_NEAR(bleu(a, a), 1.0, 1e-15);
  }
}

TEST(EmbedF1, Examples) {
  const auto table = orthonormal_table({"a", "b", "c", "d"});
  EXPECT_NEAR(embed_f1(words("a b"), words("b a"), table), 1.0, 1e-15);
  EXPECT_NEAR(embed_f1(words("a b"), words("c d"), table), 0.0, 1e-15);
  EXPECT_NEAR(embed_f1(words("a b"), words("a c"), table), 0.5, 1e-15);
  EXPECT_THROW(embed_f1(words("a q"), words("a"), table), AuditError);
}

TEST(EmbedF1, MatchesExhaustiveMaxMatch) {
  Rng rng(8);
  EmbeddingTable table;
  std::vector<Eigen::VectorXd> vs;
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd v = normal_vector(rng, 3);
    v.normalize();
    table.add(std::string(1, static_cast<char>('a' + i)), v);
    vs.push_back(v);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_seq(rng, 6, 6);
    const auto b = random_seq(rng, 6, 6);
    const auto best = [&](const TokenSeq& from, const TokenSeq& to) {
      double total = 0;
      for (const auto& s : from) {
        double m = -2;
        for (const auto& t : to) m = std::max(m, vs[static_cast<std::size_t>(s[0] - 'a')].dot(vs[static_cast<std::size_t>(t[0] - 'a')]));
        total += m;
      }
      return total / static_cast<double>(from.size());
    };
    const double p = best(a, b), r = best(b, a);
    const double expect = (p + r) != 0 ? 2 * p * r / (p + r) : 0.0;
    EXPECT_NEAR(embed_f1(a, b, table), expect, 1e-12);
  }
}

TEST(EmbeddingTable, RejectsNonUnitVectors) {
  EmbeddingTable t;
  EXPECT_THROW(t.add("a", vec({1.0, 1.0})), AuditError);
  t.add("a", vec({1.0, 0.0}));
  EXPECT_THROW(t.add("b", vec({1.0, 0.0, 0.0})), AuditError);
}

TEST(GeneratorMeanScore, Examples) {
  QuerySet q;
  q.kind = QueryKind::real();
  for (const auto* s : {"a b c", "d e", "f g h i"}) q.examples.push_back({words(s), 0, words(s)});
  EXPECT_DOUBLE_EQ(generator_mean_score(EchoGenerator{}, q, MetricId::RougeL), 1.0);
  EXPECT_DOUBLE_EQ(generator_mean_score(ShiftGenerator{}, q, MetricId::RougeL), 0.0);
  EXPECT_DOUBLE_EQ(generator_mean_score(ShiftGenerator{}, q, MetricId::Bleu), 0.0);
  EXPECT_THROW(generator_mean_score(EchoGenerator{}, q, MetricId::EmbedF1), AuditError);
  EXPECT_THROW(generator_mean_score(EchoGenerator{}, QuerySet{}, MetricId::RougeL), AuditError);
}

TEST(GeneratorMeanScore, MatchesPerPairLoop) {
  Rng rng(4);
  QuerySet q;
  for (int i = 0; i < 10; ++i) {
    auto x = random_seq(rng, 10, 5);
    q.examples.push_back({x, 0, random_seq(rng, 10, 5)});
  }
  DropGenerator gen(1);
  for (MetricId m : {MetricId::RougeL, MetricId::Bleu}) {
    double sum = 0;
    for (const auto& ex : q.examples) {
      const auto out = gen.generate(ex.tokens());
      sum += m == MetricId::RougeL ? rouge_l(out, ex.reference).f1 : bleu(out, ex.reference);
    }
    EXPECT_NEAR(generator_mean_score(gen, q, m), sum / 10.0, 1e-15);
  }
}
