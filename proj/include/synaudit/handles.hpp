#pragma once

#include "synaudit/types.hpp"

#include <memory>

namespace synaudit {

enum class Access { BlackBox, WhiteBox };

/// Uniform access to a target or reference classifier. Implementations are
/// immutable after construction; all methods are safe to call concurrently.
class ClassifierHandle {
 public:
  virtual ~ClassifierHandle() = default;

  virtual Access access() const noexcept = 0;
  virtual int class_count() const noexcept = 0;
  virtual Eigen::Index input_dim() const noexcept = 0;

  virtual Posterior predict(const Eigen::VectorXd& input) const = 0;

  // White-box surface. Black-box handles throw Errc::BlackBoxAccess.
  virtual Eigen::Index embedding_dim() const;
  virtual Eigen::VectorXd embed(const Eigen::VectorXd& input) const;
  virtual Posterior forward_from_embedding(const Eigen::VectorXd& embedding) const;
  /// Vector-Jacobian product of forward_from_embedding: given dLoss/dPosterior
  /// at `embedding`, returns dLoss/dEmbedding. Parameters stay frozen.
  virtual Eigen::VectorXd posterior_vjp(const Eigen::VectorXd& embedding,
                                        const Eigen::VectorXd& grad_posterior) const;
  /// Flattened copy of every parameter.
  virtual Eigen::VectorXd parameters() const;
};

using ClassifierPtr = std::shared_ptr<const ClassifierHandle>;

/// Restricts any handle to prediction only.
class BlackBoxClassifier final : public ClassifierHandle {
 public:
  explicit BlackBoxClassifier(ClassifierPtr inner);

  Access access() const noexcept override { return Access::BlackBox; }
  int class_count() const noexcept override { return inner_->class_count(); }
  Eigen::Index input_dim() const noexcept override { return inner_->input_dim(); }
  Posterior predict(const Eigen::VectorXd& input) const override { return inner_->predict(input); }

 private:
  ClassifierPtr inner_;
};

class GeneratorHandle {
 public:
  virtual ~GeneratorHandle() = default;
  virtual TokenSeq generate(const TokenSeq& input) const = 0;
};

using GeneratorPtr = std::shared_ptr<const GeneratorHandle>;

/// Throws DimensionMismatch, EmptyQuerySet or KindMismatch when `queries`
/// cannot be sent to `target`.
void validate_query_set(const QuerySet& queries, const ClassifierHandle& target);

}  // namespace synaudit
