#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "distzsl/dataset.hpp"
#include "distzsl/model.hpp"

namespace distzsl {

/// Percentages in [0, 100]. The attribute-free baseline only reports acc_s.
struct Metrics {
  std::optional<double> acc_c;  // zero-shot: unseen test samples, unseen candidates
  std::optional<double> acc_u;  // generalized: unseen test samples, all candidates
  std::optional<double> acc_s;  // generalized: seen test samples, all candidates
  std::optional<double> acc_h;  // harmonic mean of acc_u and acc_s
};

/// argmax over candidates of a_hat . a_y; ties go to the smallest class id.
template <typename DerivedA, typename DerivedP>
int predict_from_attributes(const Eigen::MatrixBase<DerivedA>& a_hat,
                            const Eigen::MatrixBase<DerivedP>& prototypes,
                            std::span<const int> candidates) {
  if (candidates.empty()) throw ValidationError("predict: empty candidate set");
  int best = -1;
  typename DerivedA::Scalar best_score{};
  for (int y : candidates) {
    const auto score = a_hat.dot(prototypes.col(y).template cast<typename DerivedA::Scalar>());
    if (best < 0 || score > best_score || (score == best_score && y < best)) {
      best = y;
      best_score = score;
    }
  }
  return best;
}

template <typename Scalar, typename DerivedV>
int predict(const ModelParams<Scalar>& p, const Eigen::MatrixBase<DerivedV>& v,
            const Matrix<Scalar>& prototypes, std::span<const int> candidates) {
  return predict_from_attributes(forward_attr(p, v), prototypes, candidates);
}

/// Attribute-free prediction; row c of W_c scores seen_classes[c].
template <typename Scalar, typename DerivedV>
int predict_attribute_free(const ModelParams<Scalar>& p, const Eigen::MatrixBase<DerivedV>& v,
                           std::span<const int> seen_classes) {
  if (seen_classes.empty()) throw ValidationError("predict: empty candidate set");
  const Vector<Scalar> z = p.w_c * v + p.b_c;
  int best = -1;
  Scalar best_score{};
  for (std::size_t c = 0; c < seen_classes.size(); ++c) {
    const Scalar score = z(static_cast<Eigen::Index>(c));
    const int y = seen_classes[c];
    if (best < 0 || score > best_score || (score == best_score && y < best)) {
      best = y;
      best_score = score;
    }
  }
  return best;
}

/// Mean over classes of per-class top-1 accuracy, in percent.
double per_class_top1(std::span<const int> preds, std::span<const int> labels,
                      std::span<const int> classes);

double harmonic_mean(double acc_u, double acc_s);

/// Batched predictions for every row of `ds`.
template <typename Scalar>
std::vector<int> predict_all(const ModelParams<Scalar>& p, const FeatureDataset& ds,
                             const Matrix<Scalar>& prototypes, std::span<const int> candidates) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(ds.size()));
  if (ds.empty()) return out;
  const Matrix<Scalar> a_hat = forward_attr_batch(p, ds.features.template cast<Scalar>());
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i) {
    out.push_back(predict_from_attributes(a_hat.row(i).transpose(), prototypes, candidates));
  }
  return out;
}

template <typename Scalar>
Metrics evaluate(const ModelParams<Scalar>& p, const FeatureDataset& test_seen,
                 const FeatureDataset& test_unseen, const Matrix<Scalar>& prototypes,
                 const ClassSplit& split) {
  Metrics m;
  if (p.mode == ModelMode::AttributeFree) {
    std::vector<int> preds;
    preds.reserve(static_cast<std::size_t>(test_seen.size()));
    for (int i = 0; i < test_seen.size(); ++i) {
      preds.push_back(predict_attribute_free(
          p, test_seen.features.row(i).transpose().template cast<Scalar>(), split.seen));
    }
    m.acc_s = per_class_top1(preds, test_seen.labels, split.seen);
    return m;
  }
  std::vector<int> all = split.seen;
  all.insert(all.end(), split.unseen.begin(), split.unseen.end());
  std::sort(all.begin(), all.end());

  m.acc_c = per_class_top1(predict_all(p, test_unseen, prototypes, split.unseen),
                           test_unseen.labels, split.unseen);
  m.acc_u = per_class_top1(predict_all(p, test_unseen, prototypes, all), test_unseen.labels,
                           split.unseen);
  m.acc_s = per_class_top1(predict_all(p, test_seen, prototypes, all), test_seen.labels, split.seen);
  m.acc_h = harmonic_mean(*m.acc_u, *m.acc_s);
  return m;
}

}  // namespace distzsl
