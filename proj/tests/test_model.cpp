#include <doctest.h>

#include "distzsl/checkpoint.hpp"
#include "distzsl/model.hpp"
#include "support.hpp"

using namespace distzsl;

TEST_CASE("init params: shapes, zero biases, determinism, glorot range") {
  const auto a = init_params<double>(32, 16, 20, ModelMode::AttributeBased, 3);
  const auto b = init_params<double>(32, 16, 20, ModelMode::AttributeBased, 3);
  const auto c = init_params<double>(32, 16, 20, ModelMode::AttributeBased, 4);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.w_g.rows() == 16);
  CHECK(a.w_g.cols() == 32);
  CHECK(a.w_h.rows() == 32);
  CHECK(a.w_h.cols() == 16);
  CHECK(a.w_c.size() == 0);
  CHECK(a.b_g.isZero(0));
  CHECK(a.b_h.isZero(0));
  const double s = std::sqrt(6.0 / 48.0);
  CHECK(a.w_g.cwiseAbs().maxCoeff() <= s);
  CHECK(a.w_h.cwiseAbs().maxCoeff() <= s);

  const auto f = init_params<double>(32, 16, 20, ModelMode::AttributeFree, 3);
  CHECK(f.w_c.rows() == 20);
  CHECK(f.w_c.cols() == 32);
  CHECK(f.b_c.isZero(0));
  CHECK(f.w_g.size() == 0);
  CHECK_THROWS_AS(init_params<double>(0, 16, 20, ModelMode::AttributeBased, 0), ValidationError);
}

TEST_CASE("forward passes against a naive loop") {
  const auto p = testing::random_params(7, 4, 21);
  const Eigen::VectorXd v = testing::random_matrix(7, 1, 5);
  const Eigen::VectorXd a_hat = forward_attr(p, v);
  for (int i = 0; i < 4; ++i) {
    double acc = p.b_g(i);
    for (int j = 0; j < 7; ++j) acc += p.w_g(i, j) * v(j);
    CHECK(std::abs(a_hat(i) - acc) < 1e-12);
  }
  const Eigen::VectorXd a = testing::random_matrix(4, 1, 6);
  const Eigen::VectorXd v_hat = forward_decode(p, a);
  for (int i = 0; i < 7; ++i) {
    double acc = p.b_h(i);
    for (int j = 0; j < 4; ++j) acc += p.w_h(i, j) * a(j);
    CHECK(std::abs(v_hat(i) - acc) < 1e-12);
  }
  CHECK(forward_attr(p, Eigen::VectorXd::Zero(7)) == p.b_g);
  CHECK(forward_decode(p, Eigen::VectorXd::Zero(4)) == p.b_h);
  CHECK_THROWS_AS(forward_attr(p, Eigen::VectorXd::Zero(6)), ValidationError);

  const Eigen::MatrixXd batch = testing::random_matrix(5, 7, 8);
  const Eigen::MatrixXd rows = forward_attr_batch(p, batch);
  for (int r = 0; r < 5; ++r) {
    CHECK((rows.row(r).transpose() - forward_attr(p, batch.row(r).transpose())).norm() < 1e-12);
  }
}

TEST_CASE("forward: identity regressor and zero decoder") {
  auto p = init_params<double>(3, 3, 1, ModelMode::AttributeBased, 0);
  p.w_g.setIdentity();
  const Eigen::Vector3d v(0.3, -1.2, 4.0);
  CHECK(forward_attr(p, v) == v);
  p.w_h.setZero();
  CHECK(forward_decode(p, v).isZero(0));
}

TEST_CASE("forward: linearity in the input") {
  const auto p = testing::random_params(6, 3, 2);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd v1 = testing::random_matrix(6, 1, 100 + t);
    const Eigen::VectorXd v2 = testing::random_matrix(6, 1, 200 + t);
    const Eigen::VectorXd lhs = forward_attr(p, Eigen::VectorXd(v1 + v2));
    const Eigen::VectorXd rhs = forward_attr(p, v1) + forward_attr(p, v2) - p.b_g;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("compatibility logits") {
  Eigen::MatrixXd protos(3, 3);
  protos << 1, 0, 0.6,
            0, 1, 0.8,
            0, 0, 0;
  const std::vector<int> all{0, 1, 2};
  const Eigen::Vector3d orth(0, 0, 2);
  CHECK(compatibility_logits(orth, protos, all).isZero(0));

  const Eigen::Vector3d a_hat(0.5, -2.0, 3.0);
  const Eigen::VectorXd z = compatibility_logits(a_hat, protos, all);
  for (int y = 0; y < 3; ++y) {
    double dot = 0;
    for (int i = 0; i < 3; ++i) dot += a_hat(i) * protos(i, y);
    CHECK(z(y) == doctest::Approx(dot).epsilon(1e-15));
  }
  const std::vector<int> some{2, 0};
  const Eigen::VectorXd zs = compatibility_logits(a_hat, protos, some);
  CHECK(zs(0) == z(2));
  CHECK(zs(1) == z(0));

  const Eigen::VectorXd self = compatibility_logits(Eigen::Vector3d(protos.col(1)), protos, all);
  CHECK(self(1) == doctest::Approx(1.0));
  Eigen::Index arg;
  self.maxCoeff(&arg);
  CHECK(arg == 1);

  const Eigen::VectorXd scaled = compatibility_logits(Eigen::Vector3d(2.5 * a_hat), protos, all);
  CHECK((scaled - 2.5 * z).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::Index a1, a2;
  z.maxCoeff(&a1);
  scaled.maxCoeff(&a2);
  CHECK(a1 == a2);
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(compatibility_logits(a_hat, protos, bad), ValidationError);
}

TEST_CASE("sgd step: trivial cases and momentum recurrence") {
  auto p = testing::random_params(4, 3, 1);
  const auto p0 = p;
  auto opt = OptState<double>::for_params(p, 0.1, 0.9, 0.0);
  sgd_step(p, p.zeros_like(), opt);
  CHECK(p == p0);

  auto g = testing::random_params(4, 3, 2);
  auto plain = OptState<double>::for_params(p, 0.1, 0.0, 0.0);
  auto q = p0;
  sgd_step(q, g, plain);
  CHECK(((q.flatten() - (p0.flatten() - 0.1 * g.flatten())).cwiseAbs().maxCoeff()) < 1e-15);

  // Scalar recurrence: buf1 = g1 + wd p0; p1 = p0 - lr buf1; buf2 = m buf1 + g2 + wd p1; p2 = p1 - lr buf2
  const double lr = 0.05, m = 0.9, wd = 1e-3;
  auto g2 = testing::random_params(4, 3, 3);
  auto r = p0;
  auto mom = OptState<double>::for_params(r, lr, m, wd);
  sgd_step(r, g, mom);
  sgd_step(r, g2, mom);
  const Eigen::VectorXd x0 = p0.flatten(), a = g.flatten(), b = g2.flatten();
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const double buf1 = a(i) + wd * x0(i);
    const double x1 = x0(i) - lr * buf1;
    const double buf2 = m * buf1 + b(i) + wd * x1;
    const double x2 = x1 - lr * buf2;
    CHECK(std::abs(r.flatten()(i) - x2) < 1e-14);
  }
}

TEST_CASE("sgd step: non-finite gradient names the tensor") {
  auto p = testing::random_params(4, 3, 1);
  auto g = p.zeros_like();
  g.w_h(1, 1) = std::numeric_limits<double>::quiet_NaN();
  auto opt = OptState<double>::for_params(p, 0.1, 0.9, 0.0);
  try {
    sgd_step(p, g, opt);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("W_h") != std::string::npos);
  }
}

TEST_CASE("parameter arithmetic and shape checks") {
  const auto a = testing::random_params(4, 3, 1);
  const auto b = testing::random_params(4, 3, 2);
  CHECK((a + b - b).flatten().isApprox(a.flatten()));
  CHECK((2.0 * a).flatten() == 2.0 * a.flatten());
  const auto other = testing::random_params(5, 3, 2);
  CHECK_THROWS_AS(a + other, ValidationError);
  auto c = a;
  c.unflatten(b.flatten());
  CHECK(c == b);
}

TEST_CASE("checkpoint round trip is exact") {
  for (auto mode : {ModelMode::AttributeBased, ModelMode::AttributeFree}) {
    auto p = init_params<double>(5, 3, 4, mode, 9);
    p.for_each([](const char*, auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += 1e-3 * static_cast<double>(i) / 7.0;
    });
    std::stringstream ss;
    write_checkpoint(ss, p);
    const auto q = read_checkpoint(ss);
    CHECK(q == p);
  }
  std::stringstream bad("[W_g]\n2,2\n1,2\n3\n");
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
}
