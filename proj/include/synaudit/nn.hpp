#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace synaudit {

/// Numerically stable softmax of any vector expression.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  Vec e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Pulls dLoss/dProbs back through softmax to dLoss/dLogits.
template <typename P, typename G>
Eigen::Matrix<typename P::Scalar, Eigen::Dynamic, 1> softmax_vjp(const Eigen::MatrixBase<P>& probs,
                                                                 const Eigen::MatrixBase<G>& grad) {
  return (probs.array() * (grad.array() - probs.dot(grad))).matrix();
}

/// Adam over a flat parameter vector.
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(Eigen::Index size, Options opt) : opt_(opt), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad) {
    ++t_;
    m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * grad;
    v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    params.array() -= opt_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opt_.eps);
  }

  long steps() const noexcept { return t_; }

 private:
  Options opt_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace synaudit
