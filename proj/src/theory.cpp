#include "distzsl/theory.hpp"

#include <algorithm>
#include <cmath>

#include "distzsl/eval.hpp"

namespace distzsl {

namespace {

constexpr double kPropertyTol = 1e-12;
constexpr double kModelTol = 1e-9;

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Eigen::VectorXd random_unit_vector(int dim, Rng& rng) {
  std::normal_distribution<double> gauss;
  Eigen::VectorXd u(dim);
  do {
    for (int i = 0; i < dim; ++i) u(i) = gauss(rng);
  } while (u.norm() == 0.0);
  return u.normalized();
}

ModelParams<double> random_linear_model(int feature_dim, int attr_dim, Rng& rng) {
  std::normal_distribution<double> gauss;
  auto params = init_params<double>(feature_dim, attr_dim, 1, ModelMode::AttributeBased, rng());
  for (Eigen::Index i = 0; i < params.b_g.size(); ++i) params.b_g(i) = 0.1 * gauss(rng);
  for (Eigen::Index i = 0; i < params.b_h.size(); ++i) params.b_h(i) = 0.1 * gauss(rng);
  return params;
}

Eigen::MatrixXd random_rows(int n, int dim, Rng& rng) {
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd m(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

}  // namespace

void CheckResult::record(double lhs, double rhs, double tolerance) {
  ++checks;
  const double slack = lhs - rhs;
  max_slack = std::max(max_slack, slack);
  if (!(lhs <= rhs + tolerance)) ++violations;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) out += p(i) * std::log(p(i) / q(i));
  }
  return out;
}

Eigen::VectorXd random_simplex_point(int dim, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd x(dim);
  double total = 0.0;
  do {
    total = 0.0;
    for (int i = 0; i < dim; ++i) {
      x(i) = expo(rng);
      total += x(i);
    }
  } while (total <= 0.0);
  return x / total;
}

CheckResult check_pinsker(int trials, int dim, std::uint64_t seed) {
  if (dim < 2) throw ValidationError("check_pinsker: dim must be >= 2");
  CheckResult res{"pinsker"};
  Rng rng = make_rng({seed, 0x1u});
  for (int t = 0; t < trials; ++t) {
    const auto p = random_simplex_point(dim, rng);
    const auto q = random_simplex_point(dim, rng);
    res.record((p - q).lpNorm<1>(), std::sqrt(2.0 * kl_divergence(p, q)), kPropertyTol);
    ++res.trials;
  }
  return res;
}

CheckResult check_mixture_convexity(int trials, int num_components, int dim, std::uint64_t seed) {
  if (num_components < 2) throw ValidationError("check_mixture_convexity: need K >= 2");
  CheckResult res{"mixture_convexity"};
  Rng rng = make_rng({seed, 0x2u});
  for (int t = 0; t < trials; ++t) {
    const auto q = random_simplex_point(dim, rng);
    const auto alpha = random_simplex_point(num_components, rng);
    Eigen::VectorXd mixture = Eigen::VectorXd::Zero(dim);
    double rhs = 0.0;
    for (int k = 0; k < num_components; ++k) {
      const auto pk = random_simplex_point(dim, rng);
      mixture += alpha(k) * pk;
      rhs += alpha(k) * kl_divergence(pk, q);
    }
    res.record(kl_divergence(mixture, q), rhs, kPropertyTol);
    ++res.trials;
  }
  return res;
}

double kl_lipschitz_constant(const Eigen::VectorXd& r, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& q) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    c = std::max({c, std::abs(std::log(r(i) / q(i))), std::abs(std::log(s(i) / q(i)))});
  }
  return c + 1.0;
}

CheckResult check_kl_lipschitz(int trials, int dim, double floor, std::uint64_t seed) {
  if (!(floor > 0.0) || floor * dim >= 1.0) {
    throw ValidationError("check_kl_lipschitz: need 0 < floor < 1 / dim");
  }
  CheckResult res{"kl_lipschitz"};
  Rng rng = make_rng({seed, 0x3u});
  auto floored = [&] {
    return (floor + (1.0 - floor * dim) * random_simplex_point(dim, rng).array()).matrix().eval();
  };
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd r = floored();
    const Eigen::VectorXd s = floored();
    const Eigen::VectorXd q = floored();
    const double lhs = std::abs(kl_divergence(r, q) - kl_divergence(s, q));
    res.record(lhs, kl_lipschitz_constant(r, s, q) * (r - s).lpNorm<1>(), kPropertyTol);
    ++res.trials;
  }
  return res;
}

double reconstruction_bound(const ModelParams<double>& p, const Eigen::MatrixXd& samples) {
  const Eigen::MatrixXd recon = forward_decode_batch(p, forward_attr_batch(p, samples));
  return (recon - samples).rowwise().norm().maxCoeff();
}

CheckResult check_left_inverse_bound(const ModelParams<double>& p, const Eigen::MatrixXd& samples) {
  if (p.mode != ModelMode::AttributeBased) throw ValidationError("left-inverse check needs g and h");
  if (samples.rows() < 2) throw ValidationError("left-inverse check needs >= 2 samples");
  const auto [c_h, l_h] = spectral_bounds(p.w_h);
  if (!(l_h > 0.0)) throw ValidationError("left-inverse check: decoder is identically zero (L_h = 0)");
  const double delta = reconstruction_bound(p, samples);
  const Eigen::MatrixXd a_hat = forward_attr_batch(p, samples);
  CheckResult res{"left_inverse_bound"};
  res.trials = 1;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < samples.rows(); ++j) {
      const double lhs = (a_hat.row(i) - a_hat.row(j)).norm();
      const double rhs = (samples.row(i) - samples.row(j)).norm() / l_h - 2.0 * delta / l_h;
      // stated as lhs >= rhs; recorded with the sides swapped
      res.record(rhs, lhs, kModelTol);
    }
  }
  return res;
}

CheckResult check_attr_error_bound(const ModelParams<double>& p, const Eigen::MatrixXd& samples,
                                   std::span<const int> labels, const Eigen::MatrixXd& prototypes) {
  if (p.mode != ModelMode::AttributeBased) throw ValidationError("attr-error check needs g and h");
  const auto [c_h, l_h] = spectral_bounds(p.w_h);
  if (!(c_h > 1e-8 * l_h) || !(c_h > 0.0)) {
    throw ValidationError("attr-error check: decoder is not bi-Lipschitz (c_h = 0, W_h rank deficient)");
  }
  const Eigen::MatrixXd a_hat = forward_attr_batch(p, samples);
  const Eigen::MatrixXd recon = forward_decode_batch(p, a_hat);
  CheckResult res{"attr_error_bound"};
  res.trials = 1;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const Eigen::VectorXd v = samples.row(i).transpose();
    const double delta = (recon.row(i) - samples.row(i)).norm();
    const double eps = (forward_decode(p, prototypes.col(y)) - v).norm();
    const double lhs = (a_hat.row(i).transpose() - prototypes.col(y)).norm();
    res.record(lhs, (eps + delta) / c_h, kModelTol);
  }
  return res;
}

std::pair<double, double> prototype_margins(const Eigen::MatrixXd& prototypes, int y) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (Eigen::Index other = 0; other < prototypes.cols(); ++other) {
    if (other == y) continue;
    const double d = (prototypes.col(y) - prototypes.col(other)).norm();
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

CheckResult check_margin_theorem(const Eigen::MatrixXd& prototypes, double c_h, int trials,
                                 std::uint64_t seed) {
  for (Eigen::Index y = 0; y < prototypes.cols(); ++y) {
    if (std::abs(prototypes.col(y).norm() - 1.0) > 1e-9) {
      throw ValidationError("margin check: prototype " + std::to_string(y) + " is not unit norm");
    }
  }
  if (prototypes.cols() < 2) throw ValidationError("margin check: need at least 2 prototypes");
  if (!(c_h > 0.0)) throw ValidationError("margin check: c_h must be positive");
  CheckResult res{"margin_theorem"};
  Rng rng = make_rng({seed, 0x6u});
  std::uniform_int_distribution<int> pick(0, static_cast<int>(prototypes.cols()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> all(static_cast<std::size_t>(prototypes.cols()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  for (int t = 0; t < trials; ++t) {
    const int y = pick(rng);
    const auto [margin, farthest] = prototype_margins(prototypes, y);
    const double threshold = 0.5 * c_h * margin * margin / farthest;
    const double budget = 0.99 * threshold * unit(rng);  // delta + eps_y
    const Eigen::VectorXd a_hat =
        prototypes.col(y) + (budget / c_h) * random_unit_vector(static_cast<int>(prototypes.rows()), rng);
    double runner_up = -std::numeric_limits<double>::infinity();
    for (int other : all) {
      if (other != y) runner_up = std::max(runner_up, a_hat.dot(prototypes.col(other)));
    }
    const bool correct = predict_from_attributes(a_hat, prototypes, all) == y;
    ++res.checks;
    ++res.trials;
    res.max_slack = std::max(res.max_slack, runner_up - a_hat.dot(prototypes.col(y)));
    if (!correct) ++res.violations;
  }
  return res;
}

Eigen::MatrixXd random_unit_prototypes(int num_classes, int dim, double min_margin, Rng& rng) {
  constexpr int kMaxDraws = 100000;
  Eigen::MatrixXd out(dim, num_classes);
  int filled = 0;
  for (int draw = 0; draw < kMaxDraws && filled < num_classes; ++draw) {
    const Eigen::VectorXd u = random_unit_vector(dim, rng);
    bool ok = true;
    for (int j = 0; j < filled && ok; ++j) ok = (out.col(j) - u).norm() >= min_margin;
    if (ok) out.col(filled++) = u;
  }
  if (filled < num_classes) throw ValidationError("random_unit_prototypes: margin too large");
  return out;
}

CheckResult check_client_alignment(const ModelParams<double>& p, const Eigen::MatrixXd& samples,
                                   std::span<const int> labels, const Eigen::MatrixXd& prototypes,
                                   const DistillTargets<double>& targets) {
  const double tau = targets.tau;
  const Eigen::MatrixXd logits = forward_attr_batch(p, samples) * prototypes;
  CheckResult res{"client_alignment"};
  double mean_loss = 0.0;
  double mean_l1 = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const Eigen::VectorXd pk = softmax(logits.row(i).transpose() / tau);
    const Eigen::VectorXd target = targets.probs.row(y).transpose();
    const double loss = tau * tau * kl_divergence(target, pk);
    const double l1 = (pk - target).lpNorm<1>();
    res.record(l1, std::sqrt(2.0 * loss / (tau * tau)), 1e-6);
    mean_loss += loss;
    mean_l1 += l1;
    ++res.trials;
  }
  if (samples.rows() > 0) {
    mean_loss /= static_cast<double>(samples.rows());
    mean_l1 /= static_cast<double>(samples.rows());
    res.record(mean_l1, std::sqrt(2.0 * mean_loss / (tau * tau)), 1e-6);
  }
  return res;
}

TheoryReport theory_report(const ModelParams<double>& p, const Eigen::MatrixXd& samples,
                           std::span<const int> labels, const Eigen::MatrixXd& prototypes) {
  TheoryReport rep;
  std::tie(rep.c_h, rep.l_h) = spectral_bounds(p.w_h);
  rep.delta_rec = reconstruction_bound(p, samples);
  for (Eigen::Index y = 0; y < prototypes.cols(); ++y) {
    const auto [lo, hi] = prototype_margins(prototypes, static_cast<int>(y));
    rep.margin_min.push_back(lo);
    rep.margin_max.push_back(hi);
  }
  const double a_norm = spectral_bounds(prototypes).second;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    rep.epsilons.push_back((forward_decode(p, prototypes.col(y)) - samples.row(i).transpose()).norm());
    rep.logit_lipschitz.push_back(samples.row(i).norm() * a_norm);
  }
  if (samples.rows() >= 2) rep.left_inverse_violations = check_left_inverse_bound(p, samples).violations;
  try {
    rep.attr_error_violations = check_attr_error_bound(p, samples, labels, prototypes).violations;
  } catch (const ValidationError&) {
    rep.attr_bound_applicable = false;
  }
  return rep;
}

std::vector<CheckResult> run_theory_suite(const SuiteOptions& opts) {
  std::vector<CheckResult> out;
  out.push_back(check_pinsker(opts.trials, 10, opts.seed));
  out.push_back(check_mixture_convexity(opts.trials, 5, 10, opts.seed));
  out.push_back(check_kl_lipschitz(opts.trials, 10, 0.01, opts.seed));

  constexpr int kFeatureDim = 12;
  constexpr int kAttrDim = 6;
  constexpr int kSamples = 8;
  {
    CheckResult agg{"left_inverse_bound"};
    Rng rng = make_rng({opts.seed, 0x4u});
    for (int t = 0; t < opts.trials; ++t) {
      const auto p = random_linear_model(kFeatureDim, kAttrDim, rng);
      const auto r = check_left_inverse_bound(p, random_rows(kSamples, kFeatureDim, rng));
      ++agg.trials;
      agg.checks += r.checks;
      agg.violations += r.violations;
      agg.max_slack = std::max(agg.max_slack, r.max_slack);
    }
    out.push_back(agg);
  }
  {
    CheckResult agg{"attr_error_bound"};
    Rng rng = make_rng({opts.seed, 0x5u});
    std::uniform_int_distribution<int> label(0, 4);
    for (int t = 0; t < opts.trials; ++t) {
      const auto p = random_linear_model(kFeatureDim, kAttrDim, rng);
      const Eigen::MatrixXd protos = random_unit_prototypes(5, kAttrDim, 0.0, rng);
      std::vector<int> labels(kSamples);
      for (auto& y : labels) y = label(rng);
      const auto r = check_attr_error_bound(p, random_rows(kSamples, kFeatureDim, rng), labels, protos);
      ++agg.trials;
      agg.checks += r.checks;
      agg.violations += r.violations;
      agg.max_slack = std::max(agg.max_slack, r.max_slack);
    }
    out.push_back(agg);
  }
  {
    CheckResult agg{"margin_theorem"};
    Rng rng = make_rng({opts.seed, 0x7u});
    std::uniform_real_distribution<double> c_h(0.2, 2.0);
    constexpr int kPerSet = 10;
    const int sets = std::max(1, (opts.trials + kPerSet - 1) / kPerSet);
    for (int s = 0; s < sets; ++s) {
      const Eigen::MatrixXd protos = random_unit_prototypes(10, 8, 0.3, rng);
      const auto r = check_margin_theorem(protos, c_h(rng), kPerSet, rng());
      agg.trials += r.trials;
      agg.checks += r.checks;
      agg.violations += r.violations;
      agg.max_slack = std::max(agg.max_slack, r.max_slack);
    }
    out.push_back(agg);
  }
  return out;
}

}  // namespace distzsl
