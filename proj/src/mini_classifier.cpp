#include "synaudit/mini_classifier.hpp"

#include "synaudit/error.hpp"
#include "synaudit/nn.hpp"

#include <algorithm>
#include <numeric>

namespace synaudit {

std::shared_ptr<const Encoder> Encoder::random(Eigen::Index input_dim, Eigen::Index width, Rng& rng) {
  auto enc = std::make_shared<Encoder>();
  enc->weight = normal_matrix(rng, width, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  enc->bias = Eigen::VectorXd::Zero(width);
  return enc;
}

MiniClassifier::MiniClassifier(std::shared_ptr<const Encoder> encoder, Eigen::MatrixXd head_weight,
                               Eigen::VectorXd head_bias)
    : encoder_(std::move(encoder)), head_weight_(std::move(head_weight)), head_bias_(std::move(head_bias)) {
  if (!encoder_) fail(Errc::InvalidConfig, "classifier needs an encoder");
  if (encoder_->bias.size() != encoder_->width()) fail(Errc::DimensionMismatch, "encoder bias width");
  if (head_weight_.cols() != encoder_->width()) fail(Errc::DimensionMismatch, "head width differs from encoder");
  if (head_weight_.rows() < 2 || head_bias_.size() != head_weight_.rows())
    fail(Errc::DimensionMismatch, "head needs at least two classes and a matching bias");
}

Eigen::VectorXd MiniClassifier::embed(const Eigen::VectorXd& input) const {
  if (input.size() != input_dim()) fail(Errc::DimensionMismatch, "input width " + std::to_string(input.size()));
  return encoder_->weight * input + encoder_->bias;
}

Posterior MiniClassifier::forward_from_embedding(const Eigen::VectorXd& embedding) const {
  if (embedding.size() != embedding_dim()) fail(Errc::DimensionMismatch, "embedding width " + std::to_string(embedding.size()));
  const Eigen::VectorXd hidden = embedding.array().tanh().matrix();
  return Posterior(softmax(head_weight_ * hidden + head_bias_));
}

Posterior MiniClassifier::predict(const Eigen::VectorXd& input) const { return forward_from_embedding(embed(input)); }

Eigen::VectorXd MiniClassifier::posterior_vjp(const Eigen::VectorXd& embedding,
                                              const Eigen::VectorXd& grad_posterior) const {
  const Eigen::ArrayXd hidden = embedding.array().tanh();
  const Eigen::VectorXd probs = softmax(head_weight_ * hidden.matrix() + head_bias_);
  const Eigen::VectorXd grad_logits = softmax_vjp(probs, grad_posterior);
  return ((head_weight_.transpose() * grad_logits).array() * (1.0 - hidden.square())).matrix();
}

Eigen::VectorXd MiniClassifier::parameters() const {
  const auto& e = *encoder_;
  Eigen::VectorXd out(e.weight.size() + e.bias.size() + head_weight_.size() + head_bias_.size());
  Eigen::Index at = 0;
  const auto append_rows = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out.segment(at, m.cols()) = m.row(r).transpose();
      at += m.cols();
    }
  };
  append_rows(e.weight);
  out.segment(at, e.bias.size()) = e.bias;
  at += e.bias.size();
  append_rows(head_weight_);
  out.segment(at, head_bias_.size()) = head_bias_;
  return out;
}

Container MiniClassifier::to_container() const {
  Container c;
  c.matrices["encoder.weight"] = encoder_->weight;
  c.matrices["encoder.bias"] = encoder_->bias;
  c.matrices["head.weight"] = head_weight_;
  c.matrices["head.bias"] = head_bias_;
  c.texts["kind"] = "mini_classifier";
  return c;
}

std::shared_ptr<MiniClassifier> MiniClassifier::from_container(const Container& c) {
  if (c.texts.count("kind") && c.text("kind") != "mini_classifier") fail(Errc::SchemaError, "not a classifier bundle");
  auto enc = std::make_shared<Encoder>();
  enc->weight = c.matrix("encoder.weight");
  enc->bias = c.matrix("encoder.bias").col(0);
  return std::make_shared<MiniClassifier>(enc, c.matrix("head.weight"), c.matrix("head.bias").col(0));
}

MemberTrainResult train_member(std::shared_ptr<const Encoder> encoder, const Eigen::MatrixXd& x,
                               const Eigen::VectorXi& y, int classes, const MemberTrainConfig& cfg, Rng& rng) {
  if (!encoder) fail(Errc::InvalidConfig, "train_member needs an encoder");
  if (x.rows() == 0 || x.rows() != y.size()) fail(Errc::InsufficientData, "training set is empty or ragged");
  if (x.cols() != encoder->input_dim()) fail(Errc::DimensionMismatch, "training features do not match encoder");
  if (classes < 2) fail(Errc::InvalidConfig, "need at least two classes");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.learning_rate <= 0.0)
    fail(Errc::InvalidConfig, "batch size, epochs and learning rate must be positive");

  const Eigen::Index n = x.rows();
  const Eigen::Index h = encoder->width();
  // The encoder never changes, so its activations are computed once.
  const Eigen::MatrixXd hidden =
      ((x * encoder->weight.transpose()).rowwise() + encoder->bias.transpose()).array().tanh().matrix();

  // flat head: weight column-major (classes x h), then bias
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(classes * h + classes);
  Adam adam(theta.size(), {.lr = cfg.learning_rate});
  const auto weight = [&]() { return Eigen::Map<Eigen::MatrixXd>(theta.data(), classes, h); };
  const auto bias = [&]() { return theta.segment(classes * h, classes); };

  const auto accuracy = [&]() {
    const Eigen::MatrixXd logits = (hidden * weight().transpose()).rowwise() + bias().transpose();
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < classes; ++k)
        if (logits(i, k) > logits(i, best)) best = k;
      correct += best == y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(n);
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(theta.size());
  int epoch = 0;
  double acc = 0.0;
  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(stop - start);
      grad.setZero();
      Eigen::Map<Eigen::MatrixXd> gw(grad.data(), classes, h);
      auto gb = grad.segment(classes * h, classes);
      for (std::size_t b = start; b < stop; ++b) {
        const Eigen::Index i = order[b];
        Eigen::VectorXd g = softmax(weight() * hidden.row(i).transpose() + bias());
        g[y[i]] -= 1.0;
        g *= scale;
        gw.noalias() += g * hidden.row(i);
        gb += g;
      }
      adam.step(theta, grad);
    }
    if (epoch >= cfg.min_epochs) {
      acc = accuracy();
      if (acc >= cfg.target_accuracy) break;
    }
  }
  if (epoch > cfg.max_epochs) {
    epoch = cfg.max_epochs;
    acc = accuracy();
  }

  MemberTrainResult out;
  out.model = std::make_shared<MiniClassifier>(std::move(encoder), weight(), bias());
  out.epochs = epoch;
  out.train_accuracy = acc;
  return out;
}

}  // namespace synaudit
