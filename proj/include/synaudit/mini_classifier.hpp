#pragma once

#include "synaudit/handles.hpp"
#include "synaudit/io.hpp"
#include "synaudit/random.hpp"

#include <memory>

namespace synaudit {

/// Frozen first layer shared by every member of a population. Its
/// pre-activation is the member's embedding.
struct Encoder {
  Eigen::MatrixXd weight;  // hidden x input
  Eigen::VectorXd bias;    // hidden

  Eigen::Index input_dim() const noexcept { return weight.cols(); }
  Eigen::Index width() const noexcept { return weight.rows(); }

  static std::shared_ptr<const Encoder> random(Eigen::Index input_dim, Eigen::Index width, Rng& rng);
};

/// Two-layer perceptron: softmax(W tanh(E x + e) + b) with E, e frozen.
class MiniClassifier final : public ClassifierHandle {
 public:
  MiniClassifier(std::shared_ptr<const Encoder> encoder, Eigen::MatrixXd head_weight, Eigen::VectorXd head_bias);

  Access access() const noexcept override { return Access::WhiteBox; }
  int class_count() const noexcept override { return static_cast<int>(head_weight_.rows()); }
  Eigen::Index input_dim() const noexcept override { return encoder_->input_dim(); }

  Posterior predict(const Eigen::VectorXd& input) const override;

  Eigen::Index embedding_dim() const override { return encoder_->width(); }
  Eigen::VectorXd embed(const Eigen::VectorXd& input) const override;
  Posterior forward_from_embedding(const Eigen::VectorXd& embedding) const override;
  Eigen::VectorXd posterior_vjp(const Eigen::VectorXd& embedding, const Eigen::VectorXd& grad_posterior) const override;
  /// Encoder weight (row-major), encoder bias, head weight (row-major), head bias.
  Eigen::VectorXd parameters() const override;

  const Encoder& encoder() const noexcept { return *encoder_; }
  std::shared_ptr<const Encoder> shared_encoder() const noexcept { return encoder_; }
  const Eigen::MatrixXd& head_weight() const noexcept { return head_weight_; }
  const Eigen::VectorXd& head_bias() const noexcept { return head_bias_; }

  Container to_container() const;
  static std::shared_ptr<MiniClassifier> from_container(const Container& c);

 private:
  std::shared_ptr<const Encoder> encoder_;
  Eigen::MatrixXd head_weight_;
  Eigen::VectorXd head_bias_;
};

struct MemberTrainConfig {
  double learning_rate = 1e-2;
  int batch_size = 32;
  // The accuracy stop is only checked once this many epochs have run.
  int min_epochs = 30;
  int max_epochs = 200;
  double target_accuracy = 0.9;
};

struct MemberTrainResult {
  std::shared_ptr<MiniClassifier> model;
  int epochs = 0;
  double train_accuracy = 0.0;
};

/// Trains the head on rows of `x` (n x d) with labels `y`; the encoder stays
/// fixed. The head starts at zero.
MemberTrainResult train_member(std::shared_ptr<const Encoder> encoder, const Eigen::MatrixXd& x,
                               const Eigen::VectorXi& y, int classes, const MemberTrainConfig& cfg, Rng& rng);

}  // namespace synaudit
