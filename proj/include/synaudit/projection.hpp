#pragma once

#include "synaudit/error.hpp"
#include "synaudit/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace synaudit {

enum class Projector { Tsne, Pca };

inline std::string to_string(Projector p) { return p == Projector::Tsne ? "tsne" : "pca"; }
inline Projector parse_projector(const std::string& s) {
  if (s == "tsne") return Projector::Tsne;
  if (s == "pca") return Projector::Pca;
  fail(Errc::InvalidConfig, "unknown projector '" + s + "'");
}

struct Projection2D {
  Eigen::MatrixXd points;  // N x 2
  Projector projector = Projector::Pca;
  std::uint64_t seed = 0;
};

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 500;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
};

inline constexpr Eigen::Index kMaxProjectionPoints = 1000;

namespace detail {

inline void check_projection_input(Eigen::Index n) {
  if (n < 2) fail(Errc::TooFewPoints, "projection needs at least two points, got " + std::to_string(n));
  if (n > kMaxProjectionPoints)
    fail(Errc::InvalidConfig, "projection is capped at " + std::to_string(kMaxProjectionPoints) + " points");
}

}  // namespace detail

/// Top-2 principal component scores. Directions whose singular value is
/// negligible relative to the largest come out as exact zeros. Each
/// component is signed so its largest-magnitude loading is positive.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 2> pca_2d(const Eigen::MatrixBase<Derived>& features) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  detail::check_projection_input(features.rows());

  const Mat centered = features.rowwise() - features.colwise().mean();
  Eigen::JacobiSVD<Mat> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar tol = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(std::max(features.rows(), features.cols())) *
                     (s.size() > 0 ? s[0] : Scalar(0));

  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> out = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>::Zero(features.rows(), 2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, s.size()); ++k) {
    if (!(s[k] > tol)) continue;
    Eigen::Index arg;
    svd.matrixV().col(k).cwiseAbs().maxCoeff(&arg);
    const Scalar sign = svd.matrixV()(arg, k) < Scalar(0) ? Scalar(-1) : Scalar(1);
    out.col(k) = sign * svd.matrixU().col(k) * s[k];
  }
  return out;
}

namespace detail {

/// Row-conditional affinities with per-point bandwidth chosen by bisection so
/// the row entropy matches ln(perplexity), then symmetrized and normalized.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> tsne_affinities(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x, Scalar perplexity) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = x.rows();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sq = x.rowwise().squaredNorm();
  Mat d2 = (-Scalar(2) * x * x.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(Scalar(0));

  const Scalar target = std::log(perplexity);
  Mat p = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar beta = 1, lo = 0, hi = std::numeric_limits<Scalar>::infinity();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row(n);
    for (int step = 0; step < 64; ++step) {
      // shift by the nearest neighbour distance to keep exp() in range
      Scalar dmin = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) dmin = std::min(dmin, d2(i, j));
      Scalar sum = 0, weighted = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row[j] = j == i ? Scalar(0) : std::exp(-beta * (d2(i, j) - dmin));
        sum += row[j];
        weighted += row[j] * (d2(i, j) - dmin);
      }
      const Scalar h = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const Scalar diff = h - target;
      if (std::abs(diff) < Scalar(1e-5)) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
      } else {
        hi = beta;
        beta = (beta + lo) / 2;
      }
    }
    p.row(i) = row.transpose();
  }
  Mat sym = (p + p.transpose()) / (Scalar(2) * static_cast<Scalar>(n));
  return sym.cwiseMax(std::numeric_limits<Scalar>::min());
}

}  // namespace detail

/// Exact t-SNE (O(N^2) per iteration), seeded N(0, 1e-4) initialization,
/// early exaggeration for the first quarter of the iterations (at most 250),
/// momentum 0.5 then 0.8, adaptive gains.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 2> tsne_2d(const Eigen::MatrixBase<Derived>& features,
                                                                   std::uint64_t seed, const TsneOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Mat2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
  const Eigen::Index n = features.rows();
  detail::check_projection_input(n);
  if (!(opt.perplexity > 0.0) || !(opt.perplexity < static_cast<double>(n) / 3.0))
    fail(Errc::PerplexityTooLarge,
         "perplexity " + std::to_string(opt.perplexity) + " must be below N/3 = " + std::to_string(static_cast<double>(n) / 3.0));
  if (opt.iterations < 1) fail(Errc::InvalidConfig, "t-SNE needs at least one iteration");

  const Mat p = detail::tsne_affinities<Scalar>(features.eval(), static_cast<Scalar>(opt.perplexity));
  Rng rng(seed);
  Mat2 y = normal_matrix<Scalar>(rng, n, 2, Scalar(1e-2));
  Mat2 velocity = Mat2::Zero(n, 2);
  Mat2 gains = Mat2::Ones(n, 2);
  const int exaggerate_until = std::min(250, opt.iterations / 4);

  Mat num(n, n);
  for (int it = 0; it < opt.iterations; ++it) {
    const Scalar exag = it < exaggerate_until ? static_cast<Scalar>(opt.exaggeration) : Scalar(1);
    const Scalar momentum = it < exaggerate_until ? Scalar(0.5) : Scalar(0.8);

    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sq = y.rowwise().squaredNorm();
    num = (-Scalar(2) * y * y.transpose()).colwise() + sq;
    num.rowwise() += sq.transpose();
    num = (Scalar(1) + num.array()).inverse().matrix();
    num.diagonal().setZero();
    const Scalar z = num.sum();

    // dC/dy_i = 4 sum_j (exag p_ij - q_ij) num_ij (y_i - y_j)
    const Mat w = ((exag * p).array() - num.array() / z).matrix().cwiseProduct(num);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> wsum = w.rowwise().sum();
    const Mat2 grad = Scalar(4) * (wsum.asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad(i, k) > 0) == (velocity(i, k) > 0);
        gains(i, k) = same_sign ? std::max(gains(i, k) * Scalar(0.8), Scalar(0.01)) : gains(i, k) + Scalar(0.2);
      }
    }
    velocity = momentum * velocity - static_cast<Scalar>(opt.learning_rate) * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }
  return y;
}

/// Dispatches to tsne_2d or pca_2d; deterministic for a fixed seed.
inline Projection2D project_2d(const Eigen::MatrixXd& features, Projector projector, std::uint64_t seed,
                               const TsneOptions& opt = {}) {
  Projection2D out;
  out.projector = projector;
  out.seed = seed;
  out.points = projector == Projector::Tsne ? Eigen::MatrixXd(tsne_2d(features, seed, opt)) : Eigen::MatrixXd(pca_2d(features));
  if (!out.points.allFinite()) fail(Errc::InvalidConfig, "projection produced non-finite coordinates");
  return out;
}

}  // namespace synaudit
