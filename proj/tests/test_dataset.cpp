#include <doctest.h>

#include <set>

#include "distzsl/dataset.hpp"
#include "support.hpp"

using namespace distzsl;

namespace {

void write_toy(const std::filesystem::path& dir) {
  testing::spit(dir / "attributes.csv", "2,3\n1,0,0.5\n0,1,0.5\n");
  testing::spit(dir / "groups.csv", "0,1\n1,2\n");
  testing::spit(dir / "features.csv", "5,2\n0,1,0\n0,0.9,0.1\n1,0,1\n1,0.1,0.8\n2,0.5,0.5\n");
  testing::spit(dir / "splits.csv", "seen: 0,1\nunseen: 2\n");
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.what();
  } catch (const ValidationError& e) {
    return std::string("validation: ") + e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("synthetic: counts, determinism, planted structure") {
  SyntheticSpec spec;
  const auto a = generate_synthetic(spec, 7);
  CHECK(a.data.size() == 1250);
  CHECK(a.data.dim() == 32);
  CHECK(a.attributes.num_classes() == 25);
  CHECK(a.attributes.dim() == 16);
  CHECK(a.data.split.seen.size() == 20);
  CHECK(a.data.split.unseen.size() == 5);
  CHECK(a.attributes.groups.size() == 4);
  for (int y = 0; y < 25; ++y) CHECK(a.attributes.prototype(y).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.attributes.values.minCoeff() >= 0.0);

  const auto b = generate_synthetic(spec, 7);
  CHECK(a.data.features == b.data.features);
  CHECK(a.data.labels == b.data.labels);
  CHECK(a.attributes.values == b.attributes.values);
  const auto c = generate_synthetic(spec, 8);
  CHECK(a.data.features != c.data.features);
}

TEST_CASE("synthetic: zero noise places samples exactly on M a_y") {
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  const auto s = generate_synthetic(spec, 3);
  for (int i = 0; i < s.data.size(); ++i) {
    const int y = s.data.labels[static_cast<std::size_t>(i)];
    const Eigen::VectorXd expect = s.planted_map * s.attributes.prototype(y);
    CHECK((s.data.features.row(i).transpose() - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(mean_within_class_variance(s.data) == 0.0);
}

TEST_CASE("synthetic: invalid specs") {
  SyntheticSpec spec;
  spec.group_count = 17;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), ValidationError);
  spec = SyntheticSpec{};
  spec.noise_std = -1;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), ValidationError);
  spec = SyntheticSpec{};
  spec.attribute_sparsity = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), ValidationError);
  spec = SyntheticSpec{};
  spec.num_seen = 0;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), ValidationError);
}

TEST_CASE("load: toy directory") {
  testing::TempDir dir("toy");
  write_toy(dir.path());
  const auto c = load_dataset(dir.path());
  CHECK(c.data.size() == 5);
  CHECK(c.data.dim() == 2);
  CHECK(c.attributes.dim() == 2);
  CHECK(c.attributes.num_classes() == 3);
  CHECK(c.attributes.groups == std::vector<GroupRange>{{0, 1}, {1, 2}});
  CHECK(c.data.split.seen == std::vector<int>{0, 1});
  CHECK(c.data.split.unseen == std::vector<int>{2});
  CHECK(c.data.split.test_fraction_seen == 0.2);
  CHECK(c.data.features(3, 1) == 0.8);
  CHECK(c.data.labels == std::vector<int>{0, 0, 1, 1, 2});
}

TEST_CASE("load: errors name the file and row") {
  testing::TempDir dir("bad");
  write_toy(dir.path());
  testing::spit(dir / "attributes.csv", "2,3\n1,0,0.5\n0,1\n");
  auto msg = error_of([&] { load_dataset(dir.path()); });
  CHECK(msg.find("attributes.csv") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);

  write_toy(dir.path());
  testing::spit(dir / "splits.csv", "seen: 0,1\nunseen: 1,2\n");
  msg = error_of([&] { load_dataset(dir.path()); });
  CHECK(msg.rfind("validation", 0) == 0);

  write_toy(dir.path());
  testing::spit(dir / "features.csv", "2,2\n0,1,0\n7,0,1\n");
  msg = error_of([&] { load_dataset(dir.path()); });
  CHECK(msg.find("features.csv") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);

  write_toy(dir.path());
  testing::spit(dir / "features.csv", "2,2\n0,1,nan\n1,0,1\n");
  msg = error_of([&] { load_dataset(dir.path()); });
  CHECK(msg.find("line 2") != std::string::npos);

  write_toy(dir.path());
  testing::spit(dir / "groups.csv", "0,1\n");
  CHECK_THROWS(load_dataset(dir.path()));

  write_toy(dir.path());
  std::filesystem::remove(dir / "splits.csv");
  msg = error_of([&] { load_dataset(dir.path()); });
  CHECK(msg.find("splits.csv") != std::string::npos);
}

TEST_CASE("save then load reproduces identical bytes, csv and binary") {
  testing::TempDir a("a"), b("b"), c("c");
  SyntheticSpec spec;
  spec.samples_per_class = 6;
  const auto s = generate_synthetic(spec, 1);
  save_dataset(a.path(), s);
  const auto loaded = load_dataset(a.path());
  save_dataset(b.path(), loaded);
  for (const char* f : {"attributes.csv", "groups.csv", "features.csv", "splits.csv"}) {
    CHECK(testing::slurp(a / f) == testing::slurp(b / f));
  }
  CHECK(loaded.data.features == s.data.features);

  save_dataset(c.path(), s, FeatureFormat::Binary);
  CHECK(std::filesystem::exists(c / "features.bin"));
  CHECK(std::filesystem::exists(c / "labels.csv"));
  const auto bin = load_dataset(c.path());
  CHECK(bin.data.labels == s.data.labels);
  CHECK((bin.data.features - s.data.features).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(testing::slurp(c / "features.bin").size() == 8 + 4 * static_cast<std::size_t>(s.data.features.size()));
}

TEST_CASE("split: fractions, determinism, label sets") {
  SyntheticSpec spec;
  const auto s = generate_synthetic(spec, 2);
  const auto t1 = split_train_test(s.data, 5);
  const auto t2 = split_train_test(s.data, 5);
  CHECK(t1.train_rows == t2.train_rows);
  CHECK(t1.test_seen_rows == t2.test_seen_rows);
  CHECK(t1.train.size() == 20 * 40);
  CHECK(t1.test_seen.size() == 20 * 10);
  CHECK(t1.test_unseen.size() == 5 * 50);
  for (int y : t1.train.labels) CHECK(s.data.split.is_seen(y));
  for (int y : t1.test_seen.labels) CHECK(s.data.split.is_seen(y));
  for (int y : t1.test_unseen.labels) CHECK(s.data.split.is_unseen(y));
  std::set<int> rows(t1.train_rows.begin(), t1.train_rows.end());
  rows.insert(t1.test_seen_rows.begin(), t1.test_seen_rows.end());
  rows.insert(t1.test_unseen_rows.begin(), t1.test_unseen_rows.end());
  CHECK(rows.size() == 1250u);

  FeatureDataset half;
  half.features = Eigen::MatrixXd::Zero(10, 2);
  half.labels.assign(10, 0);
  half.split.seen = {0};
  half.split.unseen = {1};
  half.split.test_fraction_seen = 0.5;
  const auto h = split_train_test(half, 0);
  CHECK(h.train.size() == 5);
  CHECK(h.test_seen.size() == 5);
}

TEST_CASE("split: degenerate inputs") {
  FeatureDataset only_unseen;
  only_unseen.features = Eigen::MatrixXd::Zero(3, 2);
  only_unseen.labels = {1, 1, 1};
  only_unseen.split.seen = {0};
  only_unseen.split.unseen = {1};
  CHECK_THROWS_AS(split_train_test(only_unseen, 0), ValidationError);

  FeatureDataset lonely;
  lonely.features = Eigen::MatrixXd::Zero(3, 2);
  lonely.labels = {0, 0, 2};
  lonely.split.seen = {0, 2};
  lonely.split.unseen = {1};
  try {
    split_train_test(lonely, 0);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("groups and split validation") {
  CHECK(even_groups(16, 4) == std::vector<GroupRange>{{0, 4}, {4, 8}, {8, 12}, {12, 16}});
  CHECK(even_groups(5, 2) == std::vector<GroupRange>{{0, 3}, {3, 5}});
  AttributeMatrix m;
  m.values = Eigen::MatrixXd::Ones(4, 3);
  m.groups = {{0, 2}, {3, 4}};
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m.groups = {{0, 2}, {1, 4}};
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m.groups = {{0, 2}, {2, 4}};
  CHECK_NOTHROW(m.validate());
  ClassSplit s;
  s.seen = {0, 1};
  s.unseen = {1, 2};
  CHECK_THROWS_AS(s.validate(3), ValidationError);
}
