#include <doctest.h>

#include "distzsl/eval.hpp"
#include "support.hpp"

using namespace distzsl;

TEST_CASE("per class top1") {
  std::vector<int> labels, preds;
  for (int i = 0; i < 10; ++i) labels.push_back(0), preds.push_back(0);
  for (int i = 0; i < 90; ++i) labels.push_back(1), preds.push_back(0);
  const std::vector<int> classes{0, 1};
  CHECK(per_class_top1(preds, labels, classes) == doctest::Approx(50.0));

  CHECK(per_class_top1(labels, labels, classes) == 100.0);
  std::vector<int> wrong(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) wrong[i] = 1 - labels[i];
  CHECK(per_class_top1(wrong, labels, classes) == 0.0);

  const std::vector<int> with_empty{0, 1, 2};
  CHECK_THROWS_AS(per_class_top1(preds, labels, with_empty), ValidationError);

  // duplicating one class leaves the per-class mean unchanged
  std::vector<int> l2 = labels, p2 = preds;
  for (int i = 0; i < 10; ++i) l2.push_back(0), p2.push_back(i % 2);
  for (int i = 0; i < 10; ++i) l2.push_back(0), p2.push_back(i % 2);
  const double before = per_class_top1(p2, l2, classes);
  std::vector<int> l4, p4;
  for (std::size_t i = 0; i < l2.size(); ++i) {
    l4.push_back(l2[i]), p4.push_back(p2[i]);
    if (l2[i] == 0) l4.push_back(l2[i]), p4.push_back(p2[i]);
  }
  CHECK(per_class_top1(p4, l4, classes) == doctest::Approx(before).epsilon(1e-15));
}

TEST_CASE("harmonic mean") {
  CHECK(harmonic_mean(57.5, 58.0) == doctest::Approx(2 * 57.5 * 58.0 / 115.5).epsilon(1e-15));
  CHECK(std::round(harmonic_mean(57.5, 58.0) * 100) / 100 == doctest::Approx(57.75).epsilon(1e-15));
  CHECK(harmonic_mean(0, 73) == 0.0);
  CHECK(harmonic_mean(0, 0) == 0.0);
  CHECK(harmonic_mean(41.5, 41.5) == doctest::Approx(41.5));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 100);
  for (int t = 0; t < 1000; ++t) {
    const double a = u(rng), b = u(rng);
    const double h = harmonic_mean(a, b), g = std::sqrt(a * b), m = (a + b) / 2;
    CHECK(h <= g + 1e-12);
    CHECK(g <= m + 1e-12);
  }
}

TEST_CASE("predict: candidates and ties") {
  Eigen::MatrixXd protos(2, 3);
  protos << 1, 0, 1,
            0, 1, 0;
  const std::vector<int> one{1};
  CHECK(predict_from_attributes(Eigen::Vector2d(5, 0), protos, one) == 1);
  const std::vector<int> all{0, 1, 2};
  // columns 0 and 2 tie exactly
  CHECK(predict_from_attributes(Eigen::Vector2d(1, 0), protos, all) == 0);
  const std::vector<int> reversed{2, 1, 0};
  CHECK(predict_from_attributes(Eigen::Vector2d(1, 0), protos, reversed) == 0);
  CHECK(predict_from_attributes(Eigen::Vector2d(0, 1), protos, all) == 1);
  const std::vector<int> none;
  CHECK_THROWS_AS(predict_from_attributes(Eigen::Vector2d(0, 1), protos, none), ValidationError);
}

TEST_CASE("predict: unseen-only candidates never return a seen class") {
  SyntheticSpec spec;
  const auto s = generate_synthetic(spec, 4);
  const auto p = testing::random_params(spec.feature_dim, spec.attr_dim, 9);
  const auto preds = predict_all(p, s.data, s.attributes.values, s.data.split.unseen);
  for (int y : preds) CHECK(s.data.split.is_unseen(y));
}

TEST_CASE("evaluate: planted inverse gives a perfect classifier") {
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  const auto s = generate_synthetic(spec, 6);
  const auto split = split_train_test(s.data, 0);
  auto p = init_params<double>(spec.feature_dim, spec.attr_dim, spec.num_seen, ModelMode::AttributeBased, 0);
  p.w_g = s.planted_map.completeOrthogonalDecomposition().pseudoInverse();
  p.w_h = s.planted_map;
  const auto m = evaluate(p, split.test_seen, split.test_unseen, s.attributes.values, s.data.split);
  REQUIRE(m.acc_c.has_value());
  CHECK(*m.acc_c == 100.0);
  CHECK(*m.acc_u == 100.0);
  CHECK(*m.acc_s == 100.0);
  CHECK(*m.acc_h == 100.0);
}

TEST_CASE("evaluate: attribute-free reports only seen accuracy") {
  SyntheticSpec spec;
  const auto s = generate_synthetic(spec, 6);
  const auto split = split_train_test(s.data, 0);
  const auto p = init_params<double>(spec.feature_dim, spec.attr_dim, spec.num_seen, ModelMode::AttributeFree, 0);
  const auto m = evaluate(p, split.test_seen, split.test_unseen, s.attributes.values, s.data.split);
  CHECK_FALSE(m.acc_c.has_value());
  CHECK_FALSE(m.acc_u.has_value());
  CHECK_FALSE(m.acc_h.has_value());
  REQUIRE(m.acc_s.has_value());
  CHECK(*m.acc_s >= 0.0);
  CHECK(*m.acc_s <= 100.0);
}

TEST_CASE("evaluate: untrained models sit near chance on unseen classes") {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    const auto s = generate_synthetic(spec, seed);
    const auto split = split_train_test(s.data, seed);
    const auto p = init_params<double>(spec.feature_dim, spec.attr_dim, spec.num_seen,
                                       ModelMode::AttributeBased, seed);
    const auto m = evaluate(p, split.test_seen, split.test_unseen, s.attributes.values, s.data.split);
    total += *m.acc_c;
  }
  CHECK(std::abs(total / 5 - 20.0) <= 10.0);
}
