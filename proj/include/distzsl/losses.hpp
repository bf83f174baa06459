#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "distzsl/dataset.hpp"
#include "distzsl/glasso.hpp"
#include "distzsl/model.hpp"

namespace distzsl {

template <typename Scalar = double>
struct Batch {
  Matrix<Scalar> features;  // B x d_v
  std::vector<int> labels;

  int size() const { return static_cast<int>(features.rows()); }
};

template <typename Scalar = double>
Batch<Scalar> make_batch(const FeatureDataset& ds, std::span<const int> rows) {
  Batch<Scalar> b;
  b.features.resize(static_cast<Eigen::Index>(rows.size()), ds.dim());
  b.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]).template cast<Scalar>();
    b.labels.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
  }
  return b;
}

template <typename Scalar = double>
Batch<Scalar> make_batch(const FeatureDataset& ds) {
  std::vector<int> rows(static_cast<std::size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return make_batch<Scalar>(ds, rows);
}

enum class BcNorm { Squared, Unsquared };

/// Coefficients keyed by loss name; the cross-entropy term always has weight 1.
struct LossWeights {
  double kl = 10.0;
  double bc = 0.1;
  double ad = 0.3;
  BcNorm bc_norm = BcNorm::Squared;

  void validate() const {
    if (!(kl >= 0.0) || !(bc >= 0.0) || !(ad >= 0.0)) {
      throw ValidationError("loss weights must be non-negative");
    }
  }
};

/// Which regularizers are switched on (ablation surface).
struct LossTerms {
  bool kl = true;
  bool bc = true;
  bool ad = true;

  static LossTerms sce_only() { return {false, false, false}; }
  bool operator==(const LossTerms&) const = default;
};

std::string to_string(const LossTerms& terms);
/// "full", "sce-only", or a '+'-joined subset of {kl, bc, ad} (an optional "sce" is ignored).
LossTerms parse_loss_terms(std::string_view text);

/// Per-term values are the weighted contributions, so `total` is their sum.
template <typename Scalar = double>
struct LossReport {
  Scalar total = 0;
  Scalar sce = 0;
  Scalar kl = 0;
  Scalar bc = 0;
  Scalar ad = 0;
  Scalar ce = 0;
  ModelParams<Scalar> grads;
};

/// Value and gradient with respect to the predicted attributes.
template <typename Scalar = double>
struct AttributeLoss {
  Scalar value = 0;
  Matrix<Scalar> grad_a_hat;
};

namespace detail {

template <typename Scalar>
void require_mode(const ModelParams<Scalar>& p, ModelMode mode, const char* who) {
  if (p.mode != mode) {
    throw ValidationError(std::string(who) + ": model mode is " + to_string(p.mode) +
                          ", objective needs " + to_string(mode));
  }
}

/// Row-wise log-softmax.
template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& z) {
  Matrix<Scalar> out = z;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const Scalar m = row.maxCoeff();
    const Scalar lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
  return out;
}

/// Position of each label inside `candidates`; throws for labels outside the set.
inline std::vector<int> label_positions(std::span<const int> labels, std::span<const int> candidates,
                                        const char* who) {
  std::vector<int> pos;
  pos.reserve(labels.size());
  for (int y : labels) {
    int found = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == y) {
        found = static_cast<int>(i);
        break;
      }
    }
    if (found < 0) {
      throw ValidationError(std::string(who) + ": label " + std::to_string(y) +
                            " is not among the candidate classes");
    }
    pos.push_back(found);
  }
  return pos;
}

template <typename Scalar>
Matrix<Scalar> candidate_prototypes(const Matrix<Scalar>& prototypes, std::span<const int> candidates) {
  Matrix<Scalar> out(prototypes.rows(), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const int y = candidates[i];
    if (y < 0 || y >= prototypes.cols()) throw ValidationError("candidate class id out of range");
    out.col(static_cast<Eigen::Index>(i)) = prototypes.col(y);
  }
  return out;
}

/// Accumulates dL/dW_g and dL/db_g given dL/d(a_hat) for the batch.
template <typename Scalar>
void chain_into_regressor(const Matrix<Scalar>& features, const Matrix<Scalar>& grad_a_hat,
                          ModelParams<Scalar>& grads) {
  grads.w_g.noalias() += grad_a_hat.transpose() * features;
  grads.b_g += grad_a_hat.colwise().sum().transpose();
}

template <typename Scalar>
AttributeLoss<Scalar> sce_on_attributes(const Matrix<Scalar>& a_hat, std::span<const int> labels,
                                        const Matrix<Scalar>& prototypes,
                                        std::span<const int> candidates) {
  const auto pos = label_positions(labels, candidates, "sce_loss");
  const Matrix<Scalar> protos = candidate_prototypes(prototypes, candidates);
  const Matrix<Scalar> log_p = log_softmax_rows<Scalar>(a_hat * protos);
  const Scalar inv_b = Scalar(1) / Scalar(a_hat.rows());
  AttributeLoss<Scalar> out;
  Matrix<Scalar> dz = log_p.array().exp().matrix();
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i) {
    const auto c = pos[static_cast<std::size_t>(i)];
    out.value -= log_p(i, c);
    dz(i, c) -= Scalar(1);
  }
  out.value *= inv_b;
  out.grad_a_hat = inv_b * dz * protos.transpose();
  return out;
}

template <typename Scalar>
AttributeLoss<Scalar> kl_on_attributes(const Matrix<Scalar>& a_hat, std::span<const int> labels,
                                       const Matrix<Scalar>& prototypes,
                                       const DistillTargets<Scalar>& targets) {
  const Eigen::Index num_classes = prototypes.cols();
  if (targets.probs.rows() != num_classes || targets.probs.cols() != num_classes) {
    throw ValidationError("kl_loss: targets must cover all classes");
  }
  const Scalar tau = targets.tau;
  const Matrix<Scalar> log_p = log_softmax_rows<Scalar>((a_hat * prototypes) / tau);
  const Scalar inv_b = Scalar(1) / Scalar(a_hat.rows());
  AttributeLoss<Scalar> out;
  Matrix<Scalar> dz(a_hat.rows(), num_classes);
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= num_classes) throw ValidationError("kl_loss: label out of range");
    const auto t = targets.probs.row(y);
    Scalar kl = 0;
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      if (t(c) > Scalar(0)) kl += t(c) * (std::log(t(c)) - log_p(i, c));
    }
    out.value += tau * tau * kl;
    dz.row(i) = tau * (log_p.row(i).array().exp().matrix() - t);
  }
  out.value *= inv_b;
  out.grad_a_hat = inv_b * dz * prototypes.transpose();
  return out;
}

template <typename Scalar>
void check_probability_rows(const Matrix<Scalar>& probs) {
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if ((probs.row(r).array() < Scalar(0)).any() ||
        std::abs(probs.row(r).sum() - Scalar(1)) > Scalar(1e-6)) {
      throw ValidationError("kl_loss: target row " + std::to_string(r) +
                            " is not a probability vector");
    }
  }
}

}  // namespace detail

/// Mean over samples of the unsquared l2 norms of each attribute group.
template <typename Scalar>
AttributeLoss<Scalar> ad_loss(const Matrix<Scalar>& a_hat, std::span<const GroupRange> groups) {
  AttributeLoss<Scalar> out;
  out.grad_a_hat = Matrix<Scalar>::Zero(a_hat.rows(), a_hat.cols());
  if (a_hat.rows() == 0) return out;
  const Scalar inv_b = Scalar(1) / Scalar(a_hat.rows());
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i) {
    for (const auto& g : groups) {
      const auto seg = a_hat.row(i).segment(g.start, g.size());
      const Scalar norm = seg.norm();
      out.value += norm;
      if (norm >= Scalar(1e-12)) {
        out.grad_a_hat.row(i).segment(g.start, g.size()) = (inv_b / norm) * seg;
      }
    }
  }
  out.value *= inv_b;
  return out;
}

/// Semantic cross-entropy: softmax over a_hat . a_y for the candidate classes.
template <typename Scalar>
LossReport<Scalar> sce_loss(const ModelParams<Scalar>& p, const Batch<Scalar>& batch,
                            const Matrix<Scalar>& prototypes, std::span<const int> candidates) {
  detail::require_mode(p, ModelMode::AttributeBased, "sce_loss");
  LossReport<Scalar> r;
  r.grads = p.zeros_like();
  const Matrix<Scalar> a_hat = forward_attr_batch(p, batch.features);
  const auto term = detail::sce_on_attributes<Scalar>(a_hat, batch.labels, prototypes, candidates);
  detail::chain_into_regressor(batch.features, term.grad_a_hat, r.grads);
  r.sce = r.total = term.value;
  return r;
}

/// Attribute decorrelation through the regressor.
template <typename Scalar>
LossReport<Scalar> ad_loss(const ModelParams<Scalar>& p, const Batch<Scalar>& batch,
                           std::span<const GroupRange> groups) {
  detail::require_mode(p, ModelMode::AttributeBased, "ad_loss");
  LossReport<Scalar> r;
  r.grads = p.zeros_like();
  const Matrix<Scalar> a_hat = forward_attr_batch(p, batch.features);
  const auto term = ad_loss<Scalar>(a_hat, groups);
  detail::chain_into_regressor(batch.features, term.grad_a_hat, r.grads);
  r.ad = r.total = term.value;
  return r;
}

/// tau^2 * KL(p_Gamma(.|y) || softmax(a_hat . A / tau)), averaged over the batch.
template <typename Scalar>
LossReport<Scalar> kl_loss(const ModelParams<Scalar>& p, const Batch<Scalar>& batch,
                           const Matrix<Scalar>& prototypes, const DistillTargets<Scalar>& targets) {
  detail::require_mode(p, ModelMode::AttributeBased, "kl_loss");
  detail::check_probability_rows(targets.probs);
  LossReport<Scalar> r;
  r.grads = p.zeros_like();
  const Matrix<Scalar> a_hat = forward_attr_batch(p, batch.features);
  const auto term = detail::kl_on_attributes<Scalar>(a_hat, batch.labels, prototypes, targets);
  detail::chain_into_regressor(batch.features, term.grad_a_hat, r.grads);
  r.kl = r.total = term.value;
  return r;
}

/// Reconstruction ||h(g(v)) - v||^2 (or its square root), averaged over the batch.
template <typename Scalar>
LossReport<Scalar> bc_loss(const ModelParams<Scalar>& p, const Batch<Scalar>& batch,
                           BcNorm norm = BcNorm::Squared) {
  detail::require_mode(p, ModelMode::AttributeBased, "bc_loss");
  LossReport<Scalar> r;
  r.grads = p.zeros_like();
  const Matrix<Scalar> a_hat = forward_attr_batch(p, batch.features);
  const Matrix<Scalar> resid = forward_decode_batch(p, a_hat) - batch.features;
  const Scalar inv_b = Scalar(1) / Scalar(batch.size());
  Matrix<Scalar> d_resid(resid.rows(), resid.cols());
  Scalar value = 0;
  for (Eigen::Index i = 0; i < resid.rows(); ++i) {
    const Scalar sq = resid.row(i).squaredNorm();
    if (norm == BcNorm::Squared) {
      value += sq;
      d_resid.row(i) = (Scalar(2) * inv_b) * resid.row(i);
    } else {
      const Scalar n = std::sqrt(sq);
      value += n;
      if (n >= Scalar(1e-12)) {
        d_resid.row(i) = (inv_b / n) * resid.row(i);
      } else {
        d_resid.row(i).setZero();
      }
    }
  }
  r.bc = r.total = value * inv_b;
  r.grads.w_h.noalias() += d_resid.transpose() * a_hat;
  r.grads.b_h += d_resid.colwise().sum().transpose();
  const Matrix<Scalar> d_a_hat = d_resid * p.w_h;
  detail::chain_into_regressor(batch.features, d_a_hat, r.grads);
  return r;
}

/// The weighted local objective. Disabled or zero-weighted terms are skipped
/// entirely, so they contribute exactly zero to value and gradient.
template <typename Scalar>
LossReport<Scalar> joint_loss(const ModelParams<Scalar>& p, const Batch<Scalar>& batch,
                              const Matrix<Scalar>& prototypes, const DistillTargets<Scalar>& targets,
                              const LossWeights& weights, std::span<const GroupRange> groups,
                              const LossTerms& terms) {
  detail::require_mode(p, ModelMode::AttributeBased, "joint_loss");
  weights.validate();
  std::vector<int> all(static_cast<std::size_t>(prototypes.cols()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

  LossReport<Scalar> r;
  r.grads = p.zeros_like();
  const Matrix<Scalar> a_hat = forward_attr_batch(p, batch.features);

  const auto sce = detail::sce_on_attributes<Scalar>(a_hat, batch.labels, prototypes, all);
  r.sce = sce.value;
  Matrix<Scalar> d_a_hat = sce.grad_a_hat;

  if (terms.kl && weights.kl != 0.0) {
    detail::check_probability_rows(targets.probs);
    const auto kl = detail::kl_on_attributes<Scalar>(a_hat, batch.labels, prototypes, targets);
    const Scalar w = static_cast<Scalar>(weights.kl);
    r.kl = w * kl.value;
    d_a_hat += w * kl.grad_a_hat;
  }
  if (terms.ad && weights.ad != 0.0) {
    const auto ad = ad_loss<Scalar>(a_hat, groups);
    const Scalar w = static_cast<Scalar>(weights.ad);
    r.ad = w * ad.value;
    d_a_hat += w * ad.grad_a_hat;
  }
  detail::chain_into_regressor(batch.features, d_a_hat, r.grads);
  if (terms.bc && weights.bc != 0.0) {
    const auto bc = bc_loss(p, batch, weights.bc_norm);
    const Scalar w = static_cast<Scalar>(weights.bc);
    r.bc = w * bc.bc;
    r.grads += w * bc.grads;
  }
  r.total = r.sce + r.kl + r.bc + r.ad;
  return r;
}

/// Softmax cross-entropy of the attribute-free classifier; row c of W_c scores seen_classes[c].
template <typename Scalar>
LossReport<Scalar> ce_loss_attribute_free(const ModelParams<Scalar>& p, const Batch<Scalar>& batch,
                                          std::span<const int> seen_classes) {
  detail::require_mode(p, ModelMode::AttributeFree, "ce_loss_attribute_free");
  if (static_cast<Eigen::Index>(seen_classes.size()) != p.w_c.rows()) {
    throw ValidationError("ce_loss_attribute_free: classifier rows do not match the seen classes");
  }
  const auto pos = detail::label_positions(batch.labels, seen_classes, "ce_loss_attribute_free");
  LossReport<Scalar> r;
  r.grads = p.zeros_like();
  Matrix<Scalar> z = batch.features * p.w_c.transpose();
  z.rowwise() += p.b_c.transpose();
  const Matrix<Scalar> log_p = detail::log_softmax_rows<Scalar>(z);
  const Scalar inv_b = Scalar(1) / Scalar(batch.size());
  Matrix<Scalar> dz = log_p.array().exp().matrix();
  Scalar value = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const auto c = pos[static_cast<std::size_t>(i)];
    value -= log_p(i, c);
    dz(i, c) -= Scalar(1);
  }
  dz *= inv_b;
  r.ce = r.total = value * inv_b;
  r.grads.w_c.noalias() += dz.transpose() * batch.features;
  r.grads.b_c += dz.colwise().sum().transpose();
  return r;
}

}  // namespace distzsl
