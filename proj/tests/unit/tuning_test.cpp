#include "fixtures.hpp"

#include "synaudit/error.hpp"
#include "synaudit/mini_classifier.hpp"
#include "synaudit/tuning.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace synaudit;
using synaudit::testing::AffineHead;
using synaudit::testing::constant_classifier;
using synaudit::testing::constant_white_box;
using synaudit::testing::vec;

namespace {

std::vector<FleetMember> two_level_fleet(int per_label, const Eigen::VectorXd& syn, const Eigen::VectorXd& real) {
  std::vector<FleetMember> fleet;
  for (int i = 0; i < per_label; ++i) {
    fleet.push_back({"s" + std::to_string(i), constant_white_box(syn), 1});
    fleet.push_back({"r" + std::to_string(i), constant_white_box(real), 0});
  }
  return fleet;
}

double fleet_accuracy(const std::vector<FleetMember>& fleet, const TuningResult& r) {
  int correct = 0;
  for (const auto& m : fleet) correct += infer_tuned(*m.model, r.queries, r.meta).label == m.label;
  return correct / static_cast<double>(fleet.size());
}

ClassifierPtr random_mini(Rng& rng, Eigen::Index d, Eigen::Index h, int c) {
  auto enc = Encoder::random(d, h, rng);
  return std::make_shared<MiniClassifier>(enc, normal_matrix(rng, c, h, 2.0), normal_vector(rng, c));
}

}  // namespace

TEST(GradientCheck, RandomSmallInstances) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index h = 2 + static_cast<Eigen::Index>(rng() % 7);  // embedding width <= 8
    const Eigen::Index nq = 1 + static_cast<Eigen::Index>(rng() % 3);
    const int c = 2 + static_cast<int>(rng() % 2);
    const int labels = 2 + static_cast<int>(rng() % 2);
    auto member = random_mini(rng, 3, h, c);
    const Eigen::MatrixXd phi = normal_matrix(rng, nq, h);
    auto meta = MetaClassifier::random(nq * c, labels, 6, rng);
    meta.parameters() += normal_vector(rng, meta.parameters().size(), 0.1);
    const double err = gradient_check(*member, static_cast<int>(rng() % static_cast<unsigned>(labels)), phi, meta, 1e-5);
    EXPECT_LE(err, 1e-4) << "trial " << trial;
  }
}

TEST(GradientCheck, SaturatedPointHasVanishingGradient) {
  Rng rng(11);
  auto member = random_mini(rng, 3, 4, 2);
  const Eigen::MatrixXd phi = normal_matrix(rng, 2, 4);
  MetaClassifier meta(4, 2, 5);
  meta.b3()[1] = 60.0;  // meta is certain of label 1
  const auto g = tuning_gradient(*member, 1, phi, meta);
  EXPECT_LT(g.loss, 1e-20);
  EXPECT_LT(g.phi.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(g.meta.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(gradient_check(*member, 1, phi, meta, 1e-5), 0.0);
}

TEST(GradientCheck, FrozenSnapshotIsUnaffectedByPerturbedCopies) {
  Rng rng(12);
  auto enc = Encoder::random(3, 4, rng);
  const Eigen::MatrixXd w = normal_matrix(rng, 2, 4);
  const Eigen::VectorXd b = normal_vector(rng, 2);
  const MiniClassifier original(enc, w, b);
  const Eigen::MatrixXd phi = normal_matrix(rng, 2, 4);
  const auto meta = MetaClassifier::random(4, 2, 5, rng);
  const auto g1 = tuning_gradient(original, 0, phi, meta);
  const MiniClassifier perturbed(enc, w.array() + 0.5, b);
  const auto gp = tuning_gradient(perturbed, 0, phi, meta);
  const auto g2 = tuning_gradient(original, 0, phi, meta);
  EXPECT_NE(gp.phi, g1.phi);
  EXPECT_EQ(g2.phi, g1.phi);
  EXPECT_EQ(g2.meta, g1.meta);
}

TEST(TrainTuned, SeparableFleetReachesPerfectAccuracy) {
  const auto fleet = two_level_fleet(10, vec({0.9, 0.1}), vec({0.6, 0.4}));
  const auto r = train_tuned_audit(fleet, 2, TuningConfig{});
  EXPECT_EQ(fleet_accuracy(fleet, r), 1.0);
  ASSERT_EQ(r.history.size(), 50u);
  for (std::size_t e = 0; e + 5 < r.history.size(); ++e) EXPECT_LE(r.history[e + 5], r.history[e]) << e;
}

TEST(TrainTuned, InformationFreeFleetStaysAtChance) {
  const auto fleet = two_level_fleet(10, vec({0.7, 0.3}), vec({0.7, 0.3}));
  const auto r = train_tuned_audit(fleet, 2, TuningConfig{});
  EXPECT_NEAR(fleet_accuracy(fleet, r), 0.5, 0.1);
}

TEST(TrainTuned, FourSourceAttribution) {
  std::vector<FleetMember> fleet;
  for (int s = 0; s < 4; ++s) {
    Eigen::VectorXd p = Eigen::VectorXd::Constant(4, 0.1);
    p[s] = 0.7;
    for (int i = 0; i < 5; ++i) fleet.push_back({std::to_string(s) + "_" + std::to_string(i), constant_white_box(p), s});
  }
  TuningConfig cfg;
  cfg.epochs = 50;
  const auto r = train_tuned_audit(fleet, 4, cfg);
  EXPECT_EQ(r.meta.out_width(), 4);
  EXPECT_EQ(fleet_accuracy(fleet, r), 1.0);
}

TEST(TrainTuned, MemberOrderDoesNotMatter) {
  Rng rng(13);
  std::vector<FleetMember> fleet;
  for (int i = 0; i < 8; ++i) fleet.push_back({"m" + std::to_string(i), random_mini(rng, 3, 4, 2), i % 2});
  TuningConfig cfg;
  cfg.epochs = 5;
  const auto a = train_tuned_audit(fleet, 2, cfg);
  std::reverse(fleet.begin(), fleet.end());
  std::swap(fleet[1], fleet[4]);
  const auto b = train_tuned_audit(fleet, 2, cfg);
  EXPECT_EQ(a.queries.phi, b.queries.phi);
  EXPECT_EQ(a.meta, b.meta);
  EXPECT_EQ(a.history, b.history);
}

TEST(TrainTuned, SeededDeterminismAndFrozenMembers) {
  Rng rng(14);
  std::vector<FleetMember> fleet;
  std::vector<Eigen::VectorXd> before;
  for (int i = 0; i < 6; ++i) {
    fleet.push_back({"m" + std::to_string(i), random_mini(rng, 3, 4, 2), i % 2});
    before.push_back(fleet.back().model->parameters());
  }
  TuningConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 99;
  const auto a = train_tuned_audit(fleet, 2, cfg);
  const auto b = train_tuned_audit(fleet, 2, cfg);
  EXPECT_EQ(a.queries.phi, b.queries.phi);
  EXPECT_EQ(a.meta, b.meta);
  EXPECT_EQ(a.history, b.history);
  for (std::size_t i = 0; i < fleet.size(); ++i) EXPECT_EQ(fleet[i].model->parameters(), before[i]);
  cfg.seed = 100;
  EXPECT_NE(train_tuned_audit(fleet, 2, cfg).queries.phi, a.queries.phi);
}

TEST(TrainTuned, QueryRowPermutationWithMetaBlocksKeepsLoss) {
  Rng rng(15);
  auto member = random_mini(rng, 3, 4, 2);
  const Eigen::MatrixXd phi = normal_matrix(rng, 3, 4);
  auto meta = MetaClassifier::random(6, 2, 5, rng);
  // swap query rows 0 and 2, and the matching input columns of the first layer
  Eigen::MatrixXd phi2 = phi;
  phi2.row(0) = phi.row(2);
  phi2.row(2) = phi.row(0);
  MetaClassifier meta2 = meta;
  Eigen::Map<Eigen::MatrixXd> w(meta2.parameters().data(), 5, 6);
  const Eigen::MatrixXd w_orig = meta.w1();
  w.middleCols(0, 2) = w_orig.middleCols(4, 2);
  w.middleCols(4, 2) = w_orig.middleCols(0, 2);
  EXPECT_NEAR(tuning_loss(*member, 1, phi2, meta2), tuning_loss(*member, 1, phi, meta), 1e-15);
}

TEST(TrainTuned, Errors) {
  std::vector<FleetMember> fleet = {{"a", constant_classifier(vec({0.5, 0.5}), 4), 0},
                                    {"b", constant_white_box(vec({0.5, 0.5})), 1}};
  try {
    train_tuned_audit(fleet, 2, {});
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), Errc::BlackBoxMember);
  }
  fleet = two_level_fleet(2, vec({0.9, 0.1}), vec({0.6, 0.4}));
  fleet.pop_back();
  try {
    train_tuned_audit(fleet, 2, {});
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), Errc::UnbalancedLabels);
  }
  TuningConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(train_tuned_audit(two_level_fleet(1, vec({0.9, 0.1}), vec({0.6, 0.4})), 2, bad), AuditError);
}

TEST(TrainTuned, DivergenceGuard) {
  // logits of 1e308 overflow to inf inside the member
  auto huge = std::make_shared<AffineHead>(Eigen::MatrixXd::Constant(2, 2, 1e308), Eigen::VectorXd::Zero(2));
  std::vector<FleetMember> fleet = {{"a", huge, 0}, {"b", huge, 1}};
  TuningConfig cfg;
  cfg.phi_init_scale = 10.0;
  try {
    train_tuned_audit(fleet, 2, cfg);
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_TRUE(e.code() == Errc::NonFiniteLoss || e.code() == Errc::InvalidPosterior) << e.what();
  }
}

TEST(InferTuned, MemorizesSyntheticMember) {
  const auto fleet = two_level_fleet(10, vec({0.9, 0.1}), vec({0.6, 0.4}));
  const auto r = train_tuned_audit(fleet, 2, TuningConfig{});
  const auto v = infer_tuned(*constant_white_box(vec({0.9, 0.1})), r.queries, r.meta, 3);
  EXPECT_EQ(v.label, 1);
  EXPECT_EQ(v.method, "tune");
  EXPECT_EQ(v.query_kind, "tuned");
  EXPECT_FALSE(v.threshold.has_value());
  EXPECT_EQ(infer_tuned(*constant_white_box(vec({0.9, 0.1})), r.queries, r.meta, 3), v);
}

TEST(InferTuned, ZeroOutputLayerGivesUniformAndLabelZero) {
  Rng rng(16);
  auto meta = MetaClassifier::random(10, 2, 32, rng);
  meta.w3().setZero();
  meta.b3().setZero();
  TunedQuerySet q{normal_matrix(rng, 5, 4)};
  const auto v = infer_tuned(*constant_white_box(vec({0.8, 0.2})), q, meta);
  EXPECT_EQ(v.label, 0);
  EXPECT_DOUBLE_EQ(v.statistic, 0.5);
}

TEST(InferTuned, AccessAndWidthErrors) {
  Rng rng(17);
  auto meta = MetaClassifier::random(10, 2, 8, rng);
  TunedQuerySet q{normal_matrix(rng, 5, 4)};
  try {
    infer_tuned(*constant_classifier(vec({0.5, 0.5}), 4), q, meta);
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), Errc::BlackBoxTarget);
  }
  try {
    infer_tuned(*constant_white_box(vec({0.5, 0.5}), 3), q, meta);
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), Errc::WidthMismatch);
  }
  try {
    infer_tuned(*constant_white_box(vec({0.4, 0.3, 0.3}), 4), q, meta);
    FAIL();
  } catch (const AuditError& e) {
    EXPECT_EQ(e.code(), Errc::WidthMismatch);
  }
}

TEST(TunedAuditBundle, RoundTrip) {
  Rng rng(18);
  TunedAuditBundle b;
  b.queries.phi = normal_matrix(rng, 5, 8);
  b.meta = MetaClassifier::random(10, 2, 32, rng);
  b.class_count = 2;
  b.label_count = 2;
  b.seed = 77;
  b.manifest["epochs"] = 50;
  const auto path = std::filesystem::temp_directory_path() / "synaudit_unit" / "tuned.bin";
  b.save(path);
  const auto back = TunedAuditBundle::load(path);
  EXPECT_EQ(back.queries.phi, b.queries.phi);
  EXPECT_EQ(back.meta, b.meta);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.manifest["epochs"], 50);
}
