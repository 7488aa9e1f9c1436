#include "synaudit/tuning.hpp"

#include "synaudit/error.hpp"
#include "synaudit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

namespace synaudit {

MetaClassifier::MetaClassifier(Eigen::Index in, Eigen::Index out, Eigen::Index hidden)
    : in_(in), out_(out), hidden_(hidden) {
  if (in < 1 || out < 2 || hidden < 1) fail(Errc::InvalidConfig, "meta-classifier widths must be positive, out >= 2");
  theta_ = Eigen::VectorXd::Zero(off_b3() + out_);
}

MetaClassifier MetaClassifier::random(Eigen::Index in, Eigen::Index out, Eigen::Index hidden, Rng& rng) {
  MetaClassifier m(in, out, hidden);
  const auto fill = [&](Eigen::Index offset, Eigen::Index count, double sd) {
    m.theta_.segment(offset, count) = normal_vector(rng, count, sd);
  };
  fill(0, hidden * in, std::sqrt(2.0 / static_cast<double>(in)));
  fill(m.off_w2(), hidden * hidden, std::sqrt(2.0 / static_cast<double>(hidden)));
  fill(m.off_w3(), out * hidden, std::sqrt(1.0 / static_cast<double>(hidden)));
  return m;
}

Eigen::VectorXd MetaClassifier::forward(const Eigen::VectorXd& input) const {
  if (input.size() != in_) fail(Errc::WidthMismatch, "meta input width " + std::to_string(input.size()) +
                                                         ", expected " + std::to_string(in_));
  const Eigen::VectorXd h1 = (w1() * input + b1()).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (w2() * h1 + b2()).cwiseMax(0.0);
  return softmax(w3() * h2 + b3());
}

MetaClassifier::Gradient MetaClassifier::backward(const Eigen::VectorXd& input, int label) const {
  if (input.size() != in_) fail(Errc::WidthMismatch, "meta input width");
  if (label < 0 || label >= out_) fail(Errc::IndexOutOfRange, "meta label " + std::to_string(label));
  const Eigen::VectorXd p1 = w1() * input + b1();
  const Eigen::VectorXd h1 = p1.cwiseMax(0.0);
  const Eigen::VectorXd p2 = w2() * h1 + b2();
  const Eigen::VectorXd h2 = p2.cwiseMax(0.0);
  const Eigen::VectorXd logits = w3() * h2 + b3();
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());

  Gradient g;
  g.loss = lse - logits[label];
  Eigen::VectorXd go = (logits.array() - lse).exp().matrix();
  go[label] -= 1.0;

  g.params.resize(theta_.size());
  Eigen::Map<Eigen::MatrixXd>(g.params.data() + off_w3(), out_, hidden_).noalias() = go * h2.transpose();
  g.params.segment(off_b3(), out_) = go;
  const Eigen::VectorXd g2 = (w3().transpose() * go).cwiseProduct((p2.array() > 0.0).cast<double>().matrix());
  Eigen::Map<Eigen::MatrixXd>(g.params.data() + off_w2(), hidden_, hidden_).noalias() = g2 * h1.transpose();
  g.params.segment(off_b2(), hidden_) = g2;
  const Eigen::VectorXd g1 = (w2().transpose() * g2).cwiseProduct((p1.array() > 0.0).cast<double>().matrix());
  Eigen::Map<Eigen::MatrixXd>(g.params.data(), hidden_, in_).noalias() = g1 * input.transpose();
  g.params.segment(off_b1(), hidden_) = g1;
  g.input = w1().transpose() * g1;
  return g;
}

void MetaClassifier::save_into(Container& c, const std::string& prefix) const {
  c.matrices[prefix + "w1"] = w1();
  c.matrices[prefix + "b1"] = b1();
  c.matrices[prefix + "w2"] = w2();
  c.matrices[prefix + "b2"] = b2();
  c.matrices[prefix + "w3"] = w3();
  c.matrices[prefix + "b3"] = b3();
}

MetaClassifier MetaClassifier::load_from(const Container& c, const std::string& prefix) {
  const auto& a = c.matrix(prefix + "w1");
  const auto& last = c.matrix(prefix + "w3");
  MetaClassifier m(a.cols(), last.rows(), a.rows());
  const auto put = [&](Eigen::Index offset, const Eigen::MatrixXd& src, Eigen::Index rows, Eigen::Index cols) {
    if (src.rows() != rows || src.cols() != cols) fail(Errc::SchemaError, "meta-classifier layer shape");
    Eigen::Map<Eigen::MatrixXd>(m.theta_.data() + offset, rows, cols) = src;
  };
  put(0, a, m.hidden_, m.in_);
  put(m.off_b1(), c.matrix(prefix + "b1"), m.hidden_, 1);
  put(m.off_w2(), c.matrix(prefix + "w2"), m.hidden_, m.hidden_);
  put(m.off_b2(), c.matrix(prefix + "b2"), m.hidden_, 1);
  put(m.off_w3(), last, m.out_, m.hidden_);
  put(m.off_b3(), c.matrix(prefix + "b3"), m.out_, 1);
  return m;
}

// ---- joint objective -------------------------------------------------------

Eigen::VectorXd meta_input(const ClassifierHandle& member, const Eigen::MatrixXd& phi) {
  const Eigen::Index c = member.class_count();
  Eigen::VectorXd z(phi.rows() * c);
  for (Eigen::Index r = 0; r < phi.rows(); ++r)
    z.segment(r * c, c) = member.forward_from_embedding(phi.row(r).transpose()).probs();
  return z;
}

TuningGradient tuning_gradient(const ClassifierHandle& member, int label, const Eigen::MatrixXd& phi,
                               const MetaClassifier& meta) {
  const Eigen::Index c = member.class_count();
  const auto mg = meta.backward(meta_input(member, phi), label);
  TuningGradient g;
  g.loss = mg.loss;
  g.meta = mg.params;
  g.phi.resize(phi.rows(), phi.cols());
  for (Eigen::Index r = 0; r < phi.rows(); ++r)
    g.phi.row(r) = member.posterior_vjp(phi.row(r).transpose(), mg.input.segment(r * c, c)).transpose();
  return g;
}

double tuning_loss(const ClassifierHandle& member, int label, const Eigen::MatrixXd& phi, const MetaClassifier& meta) {
  const Eigen::VectorXd p = meta.forward(meta_input(member, phi));
  return -std::log(p[label]);
}

double gradient_check(const ClassifierHandle& member, int label, const Eigen::MatrixXd& phi,
                      const MetaClassifier& meta, double epsilon) {
  constexpr double kFloor = 1e-8;
  const auto g = tuning_gradient(member, label, phi, meta);
  double worst = 0.0;
  const auto compare = [&](double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < kFloor) return;
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };

  Eigen::MatrixXd probe = phi;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double keep = probe.data()[i];
    probe.data()[i] = keep + epsilon;
    const double up = tuning_loss(member, label, probe, meta);
    probe.data()[i] = keep - epsilon;
    const double down = tuning_loss(member, label, probe, meta);
    probe.data()[i] = keep;
    compare(g.phi.data()[i], (up - down) / (2.0 * epsilon));
  }
  MetaClassifier shifted = meta;
  auto& theta = shifted.parameters();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + epsilon;
    const double up = tuning_loss(member, label, phi, shifted);
    theta[i] = keep - epsilon;
    const double down = tuning_loss(member, label, phi, shifted);
    theta[i] = keep;
    compare(g.meta[i], (up - down) / (2.0 * epsilon));
  }
  return worst;
}

// ---- training --------------------------------------------------------------

TuningResult train_tuned_audit(std::vector<FleetMember> fleet, int label_count, const TuningConfig& cfg) {
  if (fleet.empty()) fail(Errc::EmptyFleet, "tuning needs a reference fleet");
  if (label_count < 2) fail(Errc::InvalidConfig, "label count must be at least 2");
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || cfg.query_count < 1 || cfg.hidden < 1)
    fail(Errc::InvalidConfig, "epochs, learning rate, query count and hidden width must be positive");

  std::sort(fleet.begin(), fleet.end(), [](const FleetMember& a, const FleetMember& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < fleet.size(); ++i)
    if (fleet[i].id == fleet[i - 1].id) fail(Errc::InvalidConfig, "duplicate member id '" + fleet[i].id + "'");

  const auto& first = *fleet.front().model;
  std::map<int, int> per_label;
  for (const auto& m : fleet) {
    if (!m.model || m.model->access() != Access::WhiteBox)
      fail(Errc::BlackBoxMember, "member '" + m.id + "' is not white-box");
    if (m.model->class_count() != first.class_count() || m.model->embedding_dim() != first.embedding_dim())
      fail(Errc::WidthMismatch, "member '" + m.id + "' differs in class count or embedding width");
    if (m.label < 0 || m.label >= label_count) fail(Errc::IndexOutOfRange, "member '" + m.id + "' label");
    ++per_label[m.label];
  }
  if (static_cast<int>(per_label.size()) != label_count) fail(Errc::UnbalancedLabels, "some labels have no members");
  for (const auto& [label, count] : per_label)
    if (count != per_label.begin()->second) fail(Errc::UnbalancedLabels, "labels are not balanced");

  const Eigen::Index c = first.class_count();
  const Eigen::Index width = first.embedding_dim();

  Rng init_rng(derive_seed(cfg.seed, 1));
  Rng order_rng(derive_seed(cfg.seed, 2));
  TuningResult out;
  out.class_count = static_cast<int>(c);
  out.label_count = label_count;
  out.queries.phi = normal_matrix(init_rng, cfg.query_count, width, cfg.phi_init_scale);
  out.meta = MetaClassifier::random(cfg.query_count * c, label_count, cfg.hidden, init_rng);
  for (const auto& m : fleet) out.member_ids.push_back(m.id);

  const std::vector<Eigen::VectorXd> before = [&] {
    std::vector<Eigen::VectorXd> v;
    for (const auto& m : fleet) v.push_back(m.model->parameters());
    return v;
  }();

  Eigen::MatrixXd& phi = out.queries.phi;
  Eigen::Map<Eigen::VectorXd> phi_flat(phi.data(), phi.size());
  Adam phi_opt(phi.size(), {.lr = cfg.learning_rate});
  Adam meta_opt(out.meta.parameters().size(), {.lr = cfg.learning_rate});

  std::vector<std::size_t> order(fleet.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t idx : order) {
      const auto g = tuning_gradient(*fleet[idx].model, fleet[idx].label, phi, out.meta);
      if (!std::isfinite(g.loss) || !g.phi.allFinite() || !g.meta.allFinite())
        fail(Errc::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch + 1));
      phi_opt.step(phi_flat, Eigen::Map<const Eigen::VectorXd>(g.phi.data(), g.phi.size()));
      meta_opt.step(out.meta.parameters(), g.meta);
    }
    double total = 0.0;
    for (const auto& m : fleet) total += tuning_loss(*m.model, m.label, phi, out.meta);
    const double mean = total / static_cast<double>(fleet.size());
    if (!std::isfinite(mean)) fail(Errc::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch + 1));
    out.history.push_back(mean);
  }

  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const Eigen::VectorXd after = fleet[i].model->parameters();
    if (after.size() != before[i].size() || std::memcmp(after.data(), before[i].data(), sizeof(double) * after.size()) != 0)
      fail(Errc::InvalidConfig, "member '" + fleet[i].id + "' parameters changed during tuning");
  }
  return out;
}

AuditVerdict infer_tuned(const ClassifierHandle& target, const TunedQuerySet& queries, const MetaClassifier& meta,
                         std::uint64_t seed) {
  if (target.access() != Access::WhiteBox) fail(Errc::BlackBoxTarget, "tuned audit needs a white-box target");
  if (target.embedding_dim() != queries.embedding_dim())
    fail(Errc::WidthMismatch, "target embedding width " + std::to_string(target.embedding_dim()) + ", queries have " +
                                  std::to_string(queries.embedding_dim()));
  if (queries.query_count() * target.class_count() != meta.in_width())
    fail(Errc::WidthMismatch, "meta-classifier expects input width " + std::to_string(meta.in_width()));
  const Posterior p(meta.forward(meta_input(target, queries.phi)));
  AuditVerdict v;
  v.label = p.argmax();
  v.statistic = p[v.label];
  v.method = "tune";
  v.query_kind = to_string(QueryKind::tuned());
  v.seed = seed;
  return v;
}

void TunedAuditBundle::save(const fs::path& path) const {
  Container c;
  c.matrices["phi"] = queries.phi;
  meta.save_into(c, "meta.");
  nlohmann::json m = manifest;
  m["class_count"] = class_count;
  m["label_count"] = label_count;
  m["query_count"] = queries.query_count();
  m["embedding_dim"] = queries.embedding_dim();
  m["hidden"] = meta.hidden_width();
  m["seed"] = seed;
  c.texts["kind"] = "tuned_audit";
  c.texts["manifest"] = m.dump();
  c.save(path);
}

TunedAuditBundle TunedAuditBundle::load(const fs::path& path) {
  const auto c = Container::load(path);
  if (c.text("kind") != "tuned_audit") fail(Errc::SchemaError, path.string() + " is not a tuned-audit bundle");
  TunedAuditBundle b;
  b.queries.phi = c.matrix("phi");
  b.meta = MetaClassifier::load_from(c, "meta.");
  try {
    b.manifest = nlohmann::json::parse(c.text("manifest"));
    b.class_count = b.manifest.at("class_count").get<int>();
    b.label_count = b.manifest.at("label_count").get<int>();
    b.seed = b.manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
  if (b.meta.in_width() != b.queries.query_count() * b.class_count || b.meta.out_width() != b.label_count)
    fail(Errc::SchemaError, path.string() + ": widths disagree");
  return b;
}

}  // namespace synaudit
