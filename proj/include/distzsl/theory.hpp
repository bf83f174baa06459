#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distzsl/dataset.hpp"
#include "distzsl/glasso.hpp"
#include "distzsl/model.hpp"

namespace distzsl {

/// Smallest and largest singular values of W, from the eigenvalues of W^T W found
/// one at a time by power iteration in the orthogonal complement of the eigenvectors
/// already extracted (deflation). Iteration stops when the eigen-residual falls below
/// tol times the leading eigenvalue.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> spectral_bounds(
    const Eigen::MatrixBase<Derived>& w, typename Derived::Scalar tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  if (w.size() == 0) throw ValidationError("spectral_bounds: empty matrix");
  const Matrix<Scalar> gram = w.transpose() * w;
  const Eigen::Index n = gram.rows();
  constexpr int kMaxIter = 1000000;

  Matrix<Scalar> basis(n, 0);
  std::vector<Scalar> eigenvalues;
  Rng rng = make_rng({0x5bec7u});
  std::normal_distribution<double> gauss;
  Scalar scale = 0;

  auto project_out = [&](Vector<Scalar>& x) {
    for (int pass = 0; pass < 2; ++pass) {  // twice for numerical orthogonality
      if (basis.cols() > 0) x -= basis * (basis.transpose() * x);
    }
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    Vector<Scalar> x(n);
    for (Eigen::Index j = 0; j < n; ++j) x(j) = static_cast<Scalar>(gauss(rng));
    project_out(x);
    x.normalize();
    Scalar lambda = 0;
    for (int it = 0; it < kMaxIter; ++it) {
      Vector<Scalar> y = gram * x;
      project_out(y);
      lambda = x.dot(y);
      const Scalar threshold = tol * std::max(scale, std::abs(lambda));
      const Scalar residual = (y - lambda * x).norm();
      const Scalar ynorm = y.norm();
      if (residual <= threshold || ynorm <= tol * scale) {
        if (ynorm <= tol * scale) lambda = std::max(lambda, Scalar(0));
        break;
      }
      x = y / ynorm;
    }
    if (i == 0) scale = std::max(lambda, Scalar(std::numeric_limits<Scalar>::min()));
    eigenvalues.push_back(std::max(lambda, Scalar(0)));
    basis.conservativeResize(n, basis.cols() + 1);
    basis.col(basis.cols() - 1) = x;
  }
  const auto [lo, hi] = std::minmax_element(eigenvalues.begin(), eigenvalues.end());
  return {std::sqrt(*lo), std::sqrt(*hi)};
}

/// KL(p || q) with the convention 0 log 0 = 0.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// One line of the verification suite. slack = lhs - rhs of the checked inequality,
/// so max_slack <= 0 means every instance held with room to spare.
struct CheckResult {
  std::string name;
  long trials = 0;
  long checks = 0;
  long violations = 0;
  double max_slack = -std::numeric_limits<double>::infinity();

  void record(double lhs, double rhs, double tolerance);
};

/// Uniform draw from the probability simplex (Dirichlet with unit concentration).
Eigen::VectorXd random_simplex_point(int dim, Rng& rng);

CheckResult check_pinsker(int trials, int dim, std::uint64_t seed);
CheckResult check_mixture_convexity(int trials, int num_components, int dim, std::uint64_t seed);
CheckResult check_kl_lipschitz(int trials, int dim, double floor, std::uint64_t seed);

/// Mean-value-theorem constant for |KL(r||q) - KL(s||q)| <= C ||r - s||_1 along the
/// segment [r, s]: max over endpoints and coordinates of |log(u_i / q_i)| + 1.
double kl_lipschitz_constant(const Eigen::VectorXd& r, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& q);

/// max_i ||h(g(v_i)) - v_i|| over the rows of `samples`.
double reconstruction_bound(const ModelParams<double>& p, const Eigen::MatrixXd& samples);

/// ||g(v1) - g(v2)|| >= ||v1 - v2|| / L_h - 2 delta / L_h for every row pair.
CheckResult check_left_inverse_bound(const ModelParams<double>& p, const Eigen::MatrixXd& samples);

/// ||g(v) - a_y|| <= (||h(a_y) - v|| + delta_v) / c_h per sample, where delta_v is the
/// sample's own reconstruction error. Throws ValidationError when c_h == 0 (W_h is
/// not of full column rank, so the bi-Lipschitz premise fails).
CheckResult check_attr_error_bound(const ModelParams<double>& p, const Eigen::MatrixXd& samples,
                                   std::span<const int> labels, const Eigen::MatrixXd& prototypes);

/// Perturbs each prototype within the guaranteed radius and checks the argmax is kept.
CheckResult check_margin_theorem(const Eigen::MatrixXd& prototypes, double c_h, int trials,
                                 std::uint64_t seed);

/// Rejection-sampled unit columns with pairwise distance >= min_margin.
Eigen::MatrixXd random_unit_prototypes(int num_classes, int dim, double min_margin, Rng& rng);

/// min and max distance from prototype y to the others.
std::pair<double, double> prototype_margins(const Eigen::MatrixXd& prototypes, int y);

/// Client-level alignment after distillation: per sample ||p_k - p_Gamma||_1 <=
/// sqrt(2 l_kl / tau^2) with the sample's own loss, and on average
/// mean ||p_k - p_Gamma||_1 <= sqrt(2 eps_k / tau^2) with eps_k the mean loss.
CheckResult check_client_alignment(const ModelParams<double>& p, const Eigen::MatrixXd& samples,
                                   std::span<const int> labels, const Eigen::MatrixXd& prototypes,
                                   const DistillTargets<double>& targets);

struct TheoryReport {
  double c_h = 0;
  double l_h = 0;
  double delta_rec = 0;
  std::vector<double> margin_min;  // Delta_y per class
  std::vector<double> margin_max;  // d_max,y per class
  std::vector<double> epsilons;    // ||h(a_y) - v|| per sample
  std::vector<double> logit_lipschitz;  // ||v|| * ||A||_2 per sample (informational)
  long left_inverse_violations = 0;
  long attr_error_violations = 0;
  bool attr_bound_applicable = true;
};

TheoryReport theory_report(const ModelParams<double>& p, const Eigen::MatrixXd& samples,
                           std::span<const int> labels, const Eigen::MatrixXd& prototypes);

struct SuiteOptions {
  int trials = 1000;
  std::uint64_t seed = 0;
};

/// Every check on seeded random instances, in a fixed order.
std::vector<CheckResult> run_theory_suite(const SuiteOptions& opts);

}  // namespace distzsl
