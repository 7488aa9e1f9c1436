#pragma once

#include "synaudit/handles.hpp"
#include "synaudit/io.hpp"
#include "synaudit/random.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace synaudit {

/// Learned probe embeddings, one per row.
struct TunedQuerySet {
  Eigen::MatrixXd phi;  // query count x embedding width

  Eigen::Index query_count() const noexcept { return phi.rows(); }
  Eigen::Index embedding_dim() const noexcept { return phi.cols(); }
};

/// in -> hidden (ReLU) -> hidden (ReLU) -> out, softmax on top. Parameters
/// live in one flat vector so a single optimizer can drive them.
class MetaClassifier {
 public:
  MetaClassifier() = default;
  /// All parameters zero.
  MetaClassifier(Eigen::Index in, Eigen::Index out, Eigen::Index hidden = 32);
  /// He-normal hidden layers, N(0, 1/hidden) output layer, zero biases.
  static MetaClassifier random(Eigen::Index in, Eigen::Index out, Eigen::Index hidden, Rng& rng);

  Eigen::Index in_width() const noexcept { return in_; }
  Eigen::Index out_width() const noexcept { return out_; }
  Eigen::Index hidden_width() const noexcept { return hidden_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  struct Gradient {
    double loss = 0.0;           // -ln p[label]
    Eigen::VectorXd params;      // d loss / d parameters, same layout as parameters()
    Eigen::VectorXd input;       // d loss / d input
  };
  Gradient backward(const Eigen::VectorXd& input, int label) const;

  const Eigen::VectorXd& parameters() const noexcept { return theta_; }
  Eigen::VectorXd& parameters() noexcept { return theta_; }

  // Views into the flat vector.
  Eigen::Map<const Eigen::MatrixXd> w1() const { return {theta_.data(), hidden_, in_}; }
  Eigen::Map<const Eigen::VectorXd> b1() const { return {theta_.data() + off_b1(), hidden_}; }
  Eigen::Map<const Eigen::MatrixXd> w2() const { return {theta_.data() + off_w2(), hidden_, hidden_}; }
  Eigen::Map<const Eigen::VectorXd> b2() const { return {theta_.data() + off_b2(), hidden_}; }
  Eigen::Map<const Eigen::MatrixXd> w3() const { return {theta_.data() + off_w3(), out_, hidden_}; }
  Eigen::Map<const Eigen::VectorXd> b3() const { return {theta_.data() + off_b3(), out_}; }
  Eigen::Map<Eigen::MatrixXd> w3() { return {theta_.data() + off_w3(), out_, hidden_}; }
  Eigen::Map<Eigen::VectorXd> b3() { return {theta_.data() + off_b3(), out_}; }

  void save_into(Container& c, const std::string& prefix) const;
  static MetaClassifier load_from(const Container& c, const std::string& prefix);

  friend bool operator==(const MetaClassifier& a, const MetaClassifier& b) {
    return a.in_ == b.in_ && a.out_ == b.out_ && a.hidden_ == b.hidden_ && a.theta_ == b.theta_;
  }

 private:
  Eigen::Index off_b1() const { return hidden_ * in_; }
  Eigen::Index off_w2() const { return off_b1() + hidden_; }
  Eigen::Index off_b2() const { return off_w2() + hidden_ * hidden_; }
  Eigen::Index off_w3() const { return off_b2() + hidden_; }
  Eigen::Index off_b3() const { return off_w3() + out_ * hidden_; }

  Eigen::Index in_ = 0, out_ = 0, hidden_ = 0;
  Eigen::VectorXd theta_;
};

struct TuningConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  std::uint64_t seed = 0;
  int query_count = 5;
  int hidden = 32;
  double phi_init_scale = 0.02;
};

struct FleetMember {
  std::string id;
  ClassifierPtr model;
  int label = 0;
};

/// Concatenated posteriors of `member` at each row of `phi`, in row order.
Eigen::VectorXd meta_input(const ClassifierHandle& member, const Eigen::MatrixXd& phi);

struct TuningGradient {
  double loss = 0.0;
  Eigen::MatrixXd phi;   // d loss / d phi
  Eigen::VectorXd meta;  // d loss / d meta parameters
};

/// Negative log-likelihood of `label` for one member, and its gradient with
/// the member's parameters held fixed.
TuningGradient tuning_gradient(const ClassifierHandle& member, int label, const Eigen::MatrixXd& phi,
                               const MetaClassifier& meta);
double tuning_loss(const ClassifierHandle& member, int label, const Eigen::MatrixXd& phi, const MetaClassifier& meta);

/// Max relative error between tuning_gradient and central differences of
/// tuning_loss over every entry of phi and of the meta parameters. Entries
/// where both magnitudes fall below 1e-8 are skipped.
double gradient_check(const ClassifierHandle& member, int label, const Eigen::MatrixXd& phi,
                      const MetaClassifier& meta, double epsilon = 1e-5);

struct TuningResult {
  TunedQuerySet queries;
  MetaClassifier meta;
  std::vector<double> history;  // mean NLL over the fleet after each epoch
  int class_count = 0;
  int label_count = 0;
  std::vector<std::string> member_ids;  // in training order
};

/// Jointly fits the probe embeddings and the meta-classifier. Members are
/// visited one at a time in a seeded shuffle of id order, so the result does
/// not depend on the order of `fleet`. The loss is the mean over members.
TuningResult train_tuned_audit(std::vector<FleetMember> fleet, int label_count, const TuningConfig& cfg);

/// Label = argmax of the meta posterior, statistic = its largest entry.
AuditVerdict infer_tuned(const ClassifierHandle& target, const TunedQuerySet& queries, const MetaClassifier& meta,
                         std::uint64_t seed = 0);

struct TunedAuditBundle {
  TunedQuerySet queries;
  MetaClassifier meta;
  int class_count = 0;
  int label_count = 0;
  std::uint64_t seed = 0;
  nlohmann::json manifest = nlohmann::json::object();

  void save(const fs::path& path) const;
  static TunedAuditBundle load(const fs::path& path);
};

}  // namespace synaudit
