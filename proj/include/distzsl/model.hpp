#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distzsl/common.hpp"

namespace distzsl {

enum class ModelMode { AttributeBased, AttributeFree };

inline std::string to_string(ModelMode mode) {
  return mode == ModelMode::AttributeBased ? "attribute-based" : "attribute-free";
}

inline ModelMode parse_model_mode(std::string_view text) {
  if (text == "attribute-based") return ModelMode::AttributeBased;
  if (text == "attribute-free") return ModelMode::AttributeFree;
  throw ValidationError("unknown model mode '" + std::string(text) + "'");
}

/// Linear attribute regressor g(v) = W_g v + b_g, linear decoder h(a) = W_h a + b_h,
/// and, for the attribute-free baseline, a softmax classifier W_c v + b_c over the
/// seen classes. Tensors a mode does not use are kept empty.
///
/// The same layout doubles as the gradient and momentum-buffer container, so the
/// arithmetic operators below act tensor-wise.
template <typename Scalar = double>
struct ModelParams {
  ModelMode mode = ModelMode::AttributeBased;
  Matrix<Scalar> w_g;  // d_a x d_v
  Vector<Scalar> b_g;
  Matrix<Scalar> w_h;  // d_v x d_a
  Vector<Scalar> b_h;
  Matrix<Scalar> w_c;  // |Y^s| x d_v
  Vector<Scalar> b_c;

  int feature_dim() const {
    return static_cast<int>(mode == ModelMode::AttributeBased ? w_g.cols() : w_c.cols());
  }
  int attr_dim() const { return static_cast<int>(w_g.rows()); }

  ModelParams zeros_like() const {
    ModelParams z;
    z.mode = mode;
    z.w_g = Matrix<Scalar>::Zero(w_g.rows(), w_g.cols());
    z.b_g = Vector<Scalar>::Zero(b_g.size());
    z.w_h = Matrix<Scalar>::Zero(w_h.rows(), w_h.cols());
    z.b_h = Vector<Scalar>::Zero(b_h.size());
    z.w_c = Matrix<Scalar>::Zero(w_c.rows(), w_c.cols());
    z.b_c = Vector<Scalar>::Zero(b_c.size());
    return z;
  }

  /// Calls fn(name, tensor) for every tensor, including empty ones.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("W_g", w_g);
    fn("b_g", b_g);
    fn("W_h", w_h);
    fn("b_h", b_h);
    fn("W_c", w_c);
    fn("b_c", b_c);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("W_g", w_g);
    fn("b_g", b_g);
    fn("W_h", w_h);
    fn("b_h", b_h);
    fn("W_c", w_c);
    fn("b_c", b_c);
  }

  bool same_shape(const ModelParams& o) const {
    return mode == o.mode && w_g.rows() == o.w_g.rows() && w_g.cols() == o.w_g.cols() &&
           b_g.size() == o.b_g.size() && w_h.rows() == o.w_h.rows() &&
           w_h.cols() == o.w_h.cols() && b_h.size() == o.b_h.size() &&
           w_c.rows() == o.w_c.rows() && w_c.cols() == o.w_c.cols() && b_c.size() == o.b_c.size();
  }

  bool all_finite() const {
    return w_g.allFinite() && b_g.allFinite() && w_h.allFinite() && b_h.allFinite() &&
           w_c.allFinite() && b_c.allFinite();
  }

  Eigen::Index num_scalars() const {
    return w_g.size() + b_g.size() + w_h.size() + b_h.size() + w_c.size() + b_c.size();
  }

  /// Flattened copy in for_each order; convenient for finite differences and hashing.
  Vector<Scalar> flatten() const {
    Vector<Scalar> out(num_scalars());
    Eigen::Index pos = 0;
    for_each([&](const char*, const auto& t) {
      out.segment(pos, t.size()) = Eigen::Map<const Vector<Scalar>>(t.data(), t.size());
      pos += t.size();
    });
    return out;
  }

  void unflatten(const Vector<Scalar>& flat) {
    Eigen::Index pos = 0;
    for_each([&](const char*, auto& t) {
      Eigen::Map<Vector<Scalar>>(t.data(), t.size()) = flat.segment(pos, t.size());
      pos += t.size();
    });
  }

  bool operator==(const ModelParams& o) const {
    return same_shape(o) && w_g == o.w_g && b_g == o.b_g && w_h == o.w_h && b_h == o.b_h &&
           w_c == o.w_c && b_c == o.b_c;
  }

  ModelParams& operator+=(const ModelParams& o) {
    require_same_shape(o);
    w_g += o.w_g; b_g += o.b_g; w_h += o.w_h; b_h += o.b_h; w_c += o.w_c; b_c += o.b_c;
    return *this;
  }
  ModelParams& operator-=(const ModelParams& o) {
    require_same_shape(o);
    w_g -= o.w_g; b_g -= o.b_g; w_h -= o.w_h; b_h -= o.b_h; w_c -= o.w_c; b_c -= o.b_c;
    return *this;
  }
  ModelParams& operator*=(Scalar c) {
    w_g *= c; b_g *= c; w_h *= c; b_h *= c; w_c *= c; b_c *= c;
    return *this;
  }

  void require_same_shape(const ModelParams& o) const {
    if (!same_shape(o)) throw ValidationError("model parameter shape mismatch");
  }
};

template <typename Scalar>
ModelParams<Scalar> operator+(ModelParams<Scalar> a, const ModelParams<Scalar>& b) {
  return a += b;
}
template <typename Scalar>
ModelParams<Scalar> operator-(ModelParams<Scalar> a, const ModelParams<Scalar>& b) {
  return a -= b;
}
template <typename Scalar>
ModelParams<Scalar> operator*(Scalar c, ModelParams<Scalar> a) {
  return a *= c;
}

/// Glorot-uniform weights, zero biases.
template <typename Scalar = double>
ModelParams<Scalar> init_params(int feature_dim, int attr_dim, int num_seen, ModelMode mode,
                                std::uint64_t seed) {
  if (feature_dim < 1 || attr_dim < 1 || num_seen < 1) {
    throw ValidationError("init_params: dimensions must be positive");
  }
  Rng rng = make_rng({seed, 0x1417u});
  auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-s, s);
    Matrix<Scalar> m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = static_cast<Scalar>(dist(rng));
    }
    return m;
  };
  ModelParams<Scalar> p;
  p.mode = mode;
  if (mode == ModelMode::AttributeBased) {
    p.w_g = glorot(attr_dim, feature_dim);
    p.b_g = Vector<Scalar>::Zero(attr_dim);
    p.w_h = glorot(feature_dim, attr_dim);
    p.b_h = Vector<Scalar>::Zero(feature_dim);
    p.w_c.resize(0, 0);
    p.b_c.resize(0);
  } else {
    p.w_g.resize(0, 0);
    p.b_g.resize(0);
    p.w_h.resize(0, 0);
    p.b_h.resize(0);
    p.w_c = glorot(num_seen, feature_dim);
    p.b_c = Vector<Scalar>::Zero(num_seen);
  }
  return p;
}

/// a_hat = W_g v + b_g.
template <typename Scalar, typename Derived>
Vector<Scalar> forward_attr(const ModelParams<Scalar>& p, const Eigen::MatrixBase<Derived>& v) {
  if (p.mode != ModelMode::AttributeBased) throw ValidationError("forward_attr: attribute-free model");
  if (v.size() != p.w_g.cols()) throw ValidationError("forward_attr: feature dimension mismatch");
  return p.w_g * v + p.b_g;
}

/// v_hat = W_h a + b_h.
template <typename Scalar, typename Derived>
Vector<Scalar> forward_decode(const ModelParams<Scalar>& p, const Eigen::MatrixBase<Derived>& a) {
  if (p.mode != ModelMode::AttributeBased) throw ValidationError("forward_decode: attribute-free model");
  if (a.size() != p.w_h.cols()) throw ValidationError("forward_decode: attribute dimension mismatch");
  return p.w_h * a + p.b_h;
}

/// Batched g: one sample per row of `features`, one attribute vector per output row.
template <typename Scalar, typename Derived>
Matrix<Scalar> forward_attr_batch(const ModelParams<Scalar>& p,
                                  const Eigen::MatrixBase<Derived>& features) {
  if (features.cols() != p.w_g.cols()) {
    throw ValidationError("forward_attr_batch: feature dimension mismatch");
  }
  Matrix<Scalar> out = features * p.w_g.transpose();
  out.rowwise() += p.b_g.transpose();
  return out;
}

template <typename Scalar, typename Derived>
Matrix<Scalar> forward_decode_batch(const ModelParams<Scalar>& p,
                                    const Eigen::MatrixBase<Derived>& attrs) {
  Matrix<Scalar> out = attrs * p.w_h.transpose();
  out.rowwise() += p.b_h.transpose();
  return out;
}

/// z_y = a_hat . a_y for each requested class, in the given order.
template <typename DerivedA, typename DerivedP>
Vector<typename DerivedA::Scalar> compatibility_logits(const Eigen::MatrixBase<DerivedA>& a_hat,
                                                       const Eigen::MatrixBase<DerivedP>& prototypes,
                                                       std::span<const int> class_ids) {
  using Scalar = typename DerivedA::Scalar;
  Vector<Scalar> z(static_cast<Eigen::Index>(class_ids.size()));
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    const int y = class_ids[i];
    if (y < 0 || y >= prototypes.cols()) throw ValidationError("compatibility_logits: bad class id");
    z(static_cast<Eigen::Index>(i)) = a_hat.dot(prototypes.col(y).template cast<Scalar>());
  }
  return z;
}

template <typename Scalar = double>
struct OptState {
  ModelParams<Scalar> momentum_buffer;
  Scalar lr = Scalar(1e-3);
  Scalar momentum = Scalar(0.9);
  Scalar weight_decay = Scalar(1e-5);

  static OptState for_params(const ModelParams<Scalar>& p, Scalar lr, Scalar momentum,
                             Scalar weight_decay) {
    return {p.zeros_like(), lr, momentum, weight_decay};
  }
};

/// Momentum SGD with L2 decay folded into the gradient:
///   g' = grad + wd * param;  buf = m * buf + g';  param -= lr * buf.
template <typename Scalar>
void sgd_step(ModelParams<Scalar>& p, const ModelParams<Scalar>& grads, OptState<Scalar>& opt) {
  p.require_same_shape(grads);
  p.require_same_shape(opt.momentum_buffer);
  grads.for_each([](const char* name, const auto& g) {
    if (!g.allFinite()) throw DivergenceError(std::string("sgd_step: non-finite gradient in ") + name);
  });
  auto step = [&](auto& param, const auto& grad, auto& buf) {
    buf = opt.momentum * buf + (grad + opt.weight_decay * param);
    param -= opt.lr * buf;
  };
  auto& buf = opt.momentum_buffer;
  step(p.w_g, grads.w_g, buf.w_g);
  step(p.b_g, grads.b_g, buf.b_g);
  step(p.w_h, grads.w_h, buf.w_h);
  step(p.b_h, grads.b_h, buf.b_h);
  step(p.w_c, grads.w_c, buf.w_c);
  step(p.b_c, grads.b_c, buf.b_c);
}

}  // namespace distzsl
