#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "distzsl/common.hpp"

namespace distzsl {

template <typename Scalar = double>
struct GlassoConfig {
  Scalar delta = Scalar(0.05);  // l1 shrinkage
  Scalar tol = Scalar(1e-5);    // max |change| in the covariance estimate per sweep
  int max_sweeps = 200;
  bool standardize = true;

  void validate() const {
    if (!(delta > 0) || !(tol > 0) || max_sweeps < 1) {
      throw ValidationError("glasso: delta and tol must be positive, max_sweeps >= 1");
    }
  }
};

template <typename Scalar = double>
struct SimilarityMatrix {
  Matrix<Scalar> gamma;       // estimated covariance W, used as the class similarity
  Matrix<Scalar> theta;       // sparse precision, gamma^{-1}
  Matrix<Scalar> sample_cov;  // S
  bool converged = false;
  int sweeps = 0;
  std::vector<Scalar> objective_trace;  // penalized objective after each sweep
};

/// Target distributions, one softmax row per class.
template <typename Scalar = double>
struct DistillTargets {
  Matrix<Scalar> probs;
  Scalar tau = Scalar(1);
};

/// Class-by-class covariance of the attribute matrix; each attribute dimension
/// (row) is one observation of the |Y| class variables.
template <typename Derived>
Matrix<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& attrs,
                                                   bool standardize) {
  using Scalar = typename Derived::Scalar;
  const auto n = attrs.rows();
  if (n < 2) throw ValidationError("sample_covariance: need d_a >= 2 observations");
  Matrix<Scalar> centered = attrs.rowwise() - attrs.colwise().mean();
  if (standardize) {
    for (Eigen::Index c = 0; c < centered.cols(); ++c) {
      const Scalar sd = std::sqrt(centered.col(c).squaredNorm() / Scalar(n - 1));
      if (sd > Scalar(0)) centered.col(c) /= sd;  // zero-variance columns stay centered
    }
  }
  Matrix<Scalar> cov = centered.transpose() * centered / Scalar(n - 1);
  return (cov + cov.transpose()) / Scalar(2);
}

/// tr(S Theta) - log det Theta + delta * sum |Theta_ij|; +inf if Theta is not PD.
template <typename Scalar>
Scalar glasso_objective(const Matrix<Scalar>& s, const Matrix<Scalar>& theta, Scalar delta) {
  Eigen::LLT<Matrix<Scalar>> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<Scalar>::infinity();
  const Scalar log_det = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return (s.cwiseProduct(theta)).sum() - log_det + delta * theta.cwiseAbs().sum();
}

namespace detail {

inline constexpr int kLassoMaxIter = 10000;

template <typename Scalar>
Scalar soft_threshold(Scalar x, Scalar t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return Scalar(0);
}

/// Theta from the current W and lasso coefficients, column by column.
template <typename Scalar>
Matrix<Scalar> recover_precision(const Matrix<Scalar>& w, const Matrix<Scalar>& beta) {
  const auto p = w.rows();
  Matrix<Scalar> theta = Matrix<Scalar>::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Scalar dot = 0;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) dot += w(k, j) * beta(k, j);
    }
    const Scalar diag = Scalar(1) / (w(j, j) - dot);
    theta(j, j) = diag;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) theta(k, j) = -beta(k, j) * diag;
    }
  }
  return (theta + theta.transpose()) / Scalar(2);
}

}  // namespace detail

/// Block coordinate descent for the l1-penalized Gaussian likelihood (penalty on
/// all entries, diagonal included). Hitting max_sweeps is reported via `converged`.
template <typename Scalar>
SimilarityMatrix<Scalar> graphical_lasso(const Matrix<Scalar>& s, const GlassoConfig<Scalar>& cfg) {
  cfg.validate();
  const auto p = s.rows();
  if (p < 1 || s.cols() != p) throw ValidationError("graphical_lasso: S must be square");
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-8)) {
    throw ValidationError("graphical_lasso: S is not symmetric within 1e-8");
  }
  if ((s.diagonal().array() < Scalar(0)).any()) {
    throw ValidationError("graphical_lasso: S has a negative diagonal entry");
  }

  SimilarityMatrix<Scalar> out;
  out.sample_cov = s;
  Matrix<Scalar> w = s;
  w.diagonal().array() += cfg.delta;
  Matrix<Scalar> beta = Matrix<Scalar>::Zero(p, p);  // column j: lasso coefficients for j

  // Inner lasso tolerance sits well below the outer one so each block solve is exact enough.
  const Scalar inner_tol = cfg.tol * Scalar(1e-3);
  for (int sweep = 1; sweep <= cfg.max_sweeps && p > 1; ++sweep) {
    const Matrix<Scalar> w_before = w;
    for (Eigen::Index j = 0; j < p; ++j) {
      // min_b 0.5 b' W11 b - b' s12 + delta |b|_1 over indices k != j
      auto b = beta.col(j);
      b(j) = 0;
      Vector<Scalar> wb = w * b;  // W11 b, maintained incrementally; b(j) == 0
      for (int it = 0; it < detail::kLassoMaxIter; ++it) {
        Scalar max_step = 0;
        for (Eigen::Index k = 0; k < p; ++k) {
          if (k == j) continue;
          const Scalar partial = s(k, j) - (wb(k) - w(k, k) * b(k));
          const Scalar next = detail::soft_threshold(partial, cfg.delta) / w(k, k);
          const Scalar step = next - b(k);
          if (step != 0) {
            wb += step * w.col(k);
            b(k) = next;
          }
          max_step = std::max(max_step, std::abs(step));
        }
        if (max_step < inner_tol) break;
      }
      wb = w * b;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j) continue;
        w(k, j) = wb(k);
        w(j, k) = wb(k);
      }
    }
    out.sweeps = sweep;
    out.objective_trace.push_back(
        glasso_objective<Scalar>(s, detail::recover_precision<Scalar>(w, beta), cfg.delta));
    if ((w - w_before).cwiseAbs().maxCoeff() < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  if (p == 1) {
    out.converged = true;
    out.objective_trace.push_back(
        glasso_objective<Scalar>(s, detail::recover_precision<Scalar>(w, beta), cfg.delta));
  }
  out.gamma = w;
  out.theta = detail::recover_precision<Scalar>(w, beta);
  return out;
}

/// Row y is softmax(gamma.row(y) / tau).
template <typename Derived>
DistillTargets<typename Derived::Scalar> distill_targets(const Eigen::MatrixBase<Derived>& gamma,
                                                         typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau > 0)) throw ValidationError("distill_targets: tau must be positive");
  DistillTargets<Scalar> out;
  out.tau = tau;
  out.probs = gamma / tau;
  for (Eigen::Index r = 0; r < out.probs.rows(); ++r) {
    auto row = out.probs.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return out;
}

enum class GammaSource { Covariance, Precision };

}  // namespace distzsl
