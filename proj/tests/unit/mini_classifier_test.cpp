#include "synaudit/error.hpp"
#include "synaudit/mini_classifier.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace synaudit;

namespace {

std::shared_ptr<MiniClassifier> random_member(Rng& rng, Eigen::Index d, Eigen::Index h, int c) {
  auto enc = Encoder::random(d, h, rng);
  return std::make_shared<MiniClassifier>(enc, normal_matrix(rng, c, h), normal_vector(rng, c));
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(MiniClassifier, EmbeddingPathMatchesPredictBitwise) {
  Rng rng(1);
  auto m = random_member(rng, 16, 32, 3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = normal_vector(rng, 16, 3.0);
    EXPECT_TRUE(bitwise_equal(m->forward_from_embedding(m->embed(x)).probs(), m->predict(x).probs()));
  }
}

TEST(MiniClassifier, PosteriorVjpMatchesFiniteDifferences) {
  Rng rng(2);
  auto m = random_member(rng, 5, 6, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd e = normal_vector(rng, 6);
    const Eigen::VectorXd g = normal_vector(rng, 3);
    const Eigen::VectorXd analytic = m->posterior_vjp(e, g);
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      Eigen::VectorXd up = e, down = e;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double numeric =
          (g.dot(m->forward_from_embedding(up).probs()) - g.dot(m->forward_from_embedding(down).probs())) / 2e-6;
      EXPECT_NEAR(analytic[i], numeric, 1e-7);
    }
  }
}

TEST(MiniClassifier, ParameterLayout) {
  Rng rng(3);
  auto m = random_member(rng, 2, 3, 2);
  const auto p = m->parameters();
  ASSERT_EQ(p.size(), 6 + 3 + 6 + 2);
  EXPECT_EQ(p[1], m->encoder().weight(0, 1));  // row-major
  EXPECT_EQ(p[2], m->encoder().weight(1, 0));
  EXPECT_EQ(p[9 + 3], m->head_weight()(1, 0));
  EXPECT_EQ(p[16], m->head_bias()[1]);
}

TEST(MiniClassifier, ContainerRoundTrip) {
  Rng rng(4);
  auto m = random_member(rng, 4, 5, 2);
  auto back = MiniClassifier::from_container(Container::parse(m->to_container().serialize()));
  EXPECT_TRUE(bitwise_equal(back->parameters(), m->parameters()));
}

TEST(MiniClassifier, RejectsWrongWidths) {
  Rng rng(5);
  auto m = random_member(rng, 4, 5, 2);
  EXPECT_THROW(m->predict(Eigen::VectorXd::Zero(3)), AuditError);
  EXPECT_THROW(m->forward_from_embedding(Eigen::VectorXd::Zero(4)), AuditError);
}

TEST(TrainMember, LearnsSeparableDataAndKeepsEncoder) {
  Rng rng(6);
  auto enc = Encoder::random(4, 16, rng);
  const Eigen::Index n = 200;
  Eigen::MatrixXd x = normal_matrix(rng, n, 4);
  Eigen::VectorXi y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    x(i, 0) += y[i] ? 3.0 : -3.0;
  }
  MemberTrainConfig cfg;
  Rng a(7), b(7);
  const auto r1 = train_member(enc, x, y, 2, cfg, a);
  const auto r2 = train_member(enc, x, y, 2, cfg, b);
  EXPECT_GE(r1.train_accuracy, 0.9);
  EXPECT_GE(r1.epochs, cfg.min_epochs);
  EXPECT_LE(r1.epochs, cfg.max_epochs);
  EXPECT_EQ(r1.model->encoder().weight, enc->weight);
  EXPECT_TRUE(bitwise_equal(r1.model->parameters(), r2.model->parameters()));
}

TEST(TrainMember, StopsAtCapWhenTargetUnreachable) {
  Rng rng(8);
  auto enc = Encoder::random(2, 4, rng);
  Eigen::MatrixXd x = normal_matrix(rng, 40, 2);
  Eigen::VectorXi y(40);
  for (int i = 0; i < 40; ++i) y[i] = static_cast<int>(rng() % 2);  // pure noise labels
  MemberTrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.min_epochs = 1;
  cfg.target_accuracy = 1.01;
  const auto r = train_member(enc, x, y, 2, cfg, rng);
  EXPECT_EQ(r.epochs, 12);
}

TEST(TrainMember, ZeroEpochsOfDataIsAnError) {
  Rng rng(9);
  auto enc = Encoder::random(2, 4, rng);
  EXPECT_THROW(train_member(enc, Eigen::MatrixXd(0, 2), Eigen::VectorXi(0), 2, {}, rng), AuditError);
}
