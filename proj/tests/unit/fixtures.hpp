#pragma once

#include "synaudit/handles.hpp"

#include <functional>

namespace synaudit::testing {

/// Black-box classifier returning whatever `fn` says.
class FnClassifier final : public ClassifierHandle {
 public:
  FnClassifier(int classes, Eigen::Index dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn)
      : classes_(classes), dim_(dim), fn_(std::move(fn)) {}

  Access access() const noexcept override { return Access::BlackBox; }
  int class_count() const noexcept override { return classes_; }
  Eigen::Index input_dim() const noexcept override { return dim_; }
  Posterior predict(const Eigen::VectorXd& x) const override { return Posterior(fn_(x)); }

 private:
  int classes_;
  Eigen::Index dim_;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn_;
};

inline ClassifierPtr constant_classifier(Eigen::VectorXd probs, Eigen::Index dim = 2) {
  const int c = static_cast<int>(probs.size());
  return std::make_shared<FnClassifier>(c, dim, [probs](const Eigen::VectorXd&) { return probs; });
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline QuerySet feature_queries(const std::vector<Eigen::VectorXd>& xs, const std::vector<int>& ys,
                                QueryKind kind = QueryKind::synthetic(0)) {
  QuerySet q;
  q.kind = kind;
  for (std::size_t i = 0; i < xs.size(); ++i) q.examples.push_back({xs[i], ys[i], {}});
  return q;
}

inline TokenSeq words(const std::string& text) {
  TokenSeq out;
  std::string cur;
  for (char ch : text) {
    if (ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace synaudit::testing

#include "synaudit/nn.hpp"

namespace synaudit::testing {

/// White-box classifier whose embedding is its input and whose posterior is
/// softmax(W e + b).
class AffineHead final : public ClassifierHandle {
 public:
  AffineHead(Eigen::MatrixXd w, Eigen::VectorXd b) : w_(std::move(w)), b_(std::move(b)) {}

  Access access() const noexcept override { return Access::WhiteBox; }
  int class_count() const noexcept override { return static_cast<int>(w_.rows()); }
  Eigen::Index input_dim() const noexcept override { return w_.cols(); }
  Posterior predict(const Eigen::VectorXd& x) const override { return forward_from_embedding(embed(x)); }
  Eigen::Index embedding_dim() const override { return w_.cols(); }
  Eigen::VectorXd embed(const Eigen::VectorXd& x) const override { return x; }
  Posterior forward_from_embedding(const Eigen::VectorXd& e) const override { return Posterior(softmax(w_ * e + b_)); }
  Eigen::VectorXd posterior_vjp(const Eigen::VectorXd& e, const Eigen::VectorXd& g) const override {
    return w_.transpose() * softmax_vjp(softmax(w_ * e + b_), g);
  }
  Eigen::VectorXd parameters() const override {
    Eigen::VectorXd out(w_.size() + b_.size());
    out << Eigen::Map<const Eigen::VectorXd>(w_.data(), w_.size()), b_;
    return out;
  }

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd b_;
};

/// Ignores its input and always answers `probs`.
inline ClassifierPtr constant_white_box(const Eigen::VectorXd& probs, Eigen::Index width = 4) {
  return std::make_shared<AffineHead>(Eigen::MatrixXd::Zero(probs.size(), width),
                                      Eigen::VectorXd(probs.array().log().matrix()));
}

}  // namespace synaudit::testing
