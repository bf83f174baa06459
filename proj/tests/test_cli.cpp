#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "distzsl/commands.hpp"
#include "support.hpp"

using namespace distzsl;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string command = std::string("cd '") + dir.path().string() + "' && '" + DISTZSL_CLI + "' " +
                              args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(command.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::slurp(out);
  r.err = testing::slurp(err);
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kQuickRun = "--set data.num_seen=6 --set data.num_unseen=2 --set data.samples_per_class=12 --rounds 3 -k 3";

}  // namespace

TEST_CASE("config file parsing") {
  std::istringstream in("# comment\n[train]\nrounds = 7\n; also a comment\n\n[partition]\nscheme=iid\n");
  const auto c = ConfigMap::parse(in);
  CHECK(c.get("train.rounds") == "7");
  CHECK(c.get("partition.scheme") == "iid");
  CHECK_FALSE(c.get("train.seed").has_value());

  std::istringstream bad("[train]\nrounds 7\n");
  try {
    ConfigMap::parse(bad, "x.ini");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("x.ini: line 2") != std::string::npos);
  }
  std::istringstream header("[train\n");
  CHECK_THROWS_AS(ConfigMap::parse(header), ParseError);
  CHECK_THROWS_AS(ConfigMap::load("/nonexistent/cfg.ini"), ParseError);
}

TEST_CASE("config application and round trip") {
  ConfigMap c;
  c.set_assignment("train.rounds=12");
  c.set_assignment("losses.ablation = sce+bc+ad");
  c.set_assignment("partition.scheme=dirichlet");
  c.set_assignment("model.mode=attribute-free");
  RunSettings s;
  apply_config(c, s);
  CHECK(s.train.rounds == 12);
  CHECK_FALSE(s.train.terms.kl);
  CHECK(s.train.terms.bc);
  CHECK(s.train.partition.scheme == PartitionScheme::Dirichlet);
  CHECK(s.train.mode == ModelMode::AttributeFree);

  RunSettings back;
  apply_config(to_config(s), back);
  CHECK(to_config(back).render() == to_config(s).render());

  ConfigMap unknown;
  unknown.set("train.speed", "3");
  CHECK_THROWS_AS(apply_config(unknown, s), ValidationError);
  ConfigMap malformed;
  malformed.set("train.rounds", "three");
  CHECK_THROWS_AS(apply_config(malformed, s), ValidationError);
  CHECK_THROWS_AS(c.set_assignment("train.rounds"), ValidationError);
}

TEST_CASE("cli: synth is byte-for-byte reproducible") {
  testing::TempDir dir("cli_synth");
  REQUIRE(cli(dir, "synth --seed 5 --out a").code == 0);
  REQUIRE(cli(dir, "synth --seed 5 --out b").code == 0);
  REQUIRE(cli(dir, "synth --seed 6 --out c").code == 0);
  for (const char* f : {"attributes.csv", "features.csv", "groups.csv", "splits.csv"}) {
    CHECK(testing::slurp(dir / (std::string("a/") + f)) == testing::slurp(dir / (std::string("b/") + f)));
  }
  CHECK(testing::slurp(dir / "a/features.csv") != testing::slurp(dir / "c/features.csv"));
}

TEST_CASE("cli: noise-free data has zero within-class variance") {
  testing::TempDir dir("cli_stats");
  REQUIRE(cli(dir, "synth --seed 1 --noise-std 0 --out d").code == 0);
  const auto r = cli(dir, "eval --data d --stats");
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() >= 2);
  CHECK(ls[0] == "num_samples,feature_dim,attr_dim,num_classes,within_class_variance");
  const auto f = fields(ls[1]);
  REQUIRE(f.size() == 5);
  CHECK(f[0] == "1250");
  CHECK(std::stod(f[4]) == 0.0);
}

TEST_CASE("cli: glasso output satisfies the optimality conditions") {
  testing::TempDir dir("cli_glasso");
  testing::spit(dir / "attrs.csv", "3,2\n1,0\n0.5,1\n0,0.2\n");
  const auto r = cli(dir, "glasso attrs.csv --delta 0.05 --out g");
  REQUIRE(r.code == 0);
  const auto read = [&](const char* name) {
    const auto ls = lines(testing::slurp(dir / name));
    const int n = std::stoi(ls[0]);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      const auto f = fields(ls[static_cast<std::size_t>(i + 1)]);
      for (int j = 0; j < n; ++j) m(i, j) = std::stod(f[static_cast<std::size_t>(j)]);
    }
    return m;
  };
  const Eigen::MatrixXd gamma = read("g/gamma.csv");
  const Eigen::MatrixXd theta = read("g/theta.csv");
  REQUIRE(gamma.rows() == 2);
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0.5, 1, 0, 0.2;
  const Eigen::MatrixXd s = sample_covariance(a, true);
  CHECK(std::abs(gamma(0, 1) - s(0, 1)) <= 0.05 + 1e-8);
  CHECK((gamma * theta - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((gamma.diagonal() - s.diagonal() - Eigen::Vector2d::Constant(0.05)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cli: pccd partition of 150 classes") {
  testing::TempDir dir("cli_partition");
  REQUIRE(cli(dir, "synth --seed 2 --num-seen 150 --num-unseen 10 --samples-per-class 4 --out d").code == 0);
  const auto r = cli(dir, "partition --data d --scheme pccd -k 10 --out p");
  REQUIRE(r.code == 0);
  std::map<int, std::set<int>> classes;
  const auto ls = lines(testing::slurp(dir / "p/partition_summary.csv"));
  CHECK(ls[0] == "client_id,class_id,count");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = fields(ls[i]);
    classes[std::stoi(f[0])].insert(std::stoi(f[1]));
  }
  CHECK(classes.size() == 10u);
  for (const auto& [c, ys] : classes) CHECK(ys.size() == 15u);
  CHECK(cli(dir, "partition --data d --scheme pccd -k 200 --out q").code == 3);
}

TEST_CASE("cli: run outputs, ablation columns and manifest replay") {
  testing::TempDir dir("cli_run");
  const auto r = cli(dir, std::string("run ") + kQuickRun + " --ablation sce-only --out r1");
  REQUIRE(r.code == 0);
  for (const char* f : {"manifest.ini", "metrics.csv", "loss_terms.csv", "client_metrics.csv", "final_model.csv"}) {
    CHECK(std::filesystem::exists(dir / (std::string("r1/") + f)));
  }
  const auto terms = lines(testing::slurp(dir / "r1/loss_terms.csv"));
  REQUIRE(terms.size() == 4u);
  const auto header = fields(terms[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const auto f = fields(terms[i]);
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == "kl" || header[j] == "bc" || header[j] == "ad") CHECK(std::stod(f[j]) == 0.0);
    }
  }
  CHECK(lines(testing::slurp(dir / "r1/metrics.csv")).size() == 4u);

  const auto replay = cli(dir, "run --config r1/manifest.ini --out r2");
  REQUIRE(replay.code == 0);
  CHECK(testing::slurp(dir / "r1/metrics.csv") == testing::slurp(dir / "r2/metrics.csv"));
  CHECK(testing::slurp(dir / "r1/final_model.csv") == testing::slurp(dir / "r2/final_model.csv"));
}

TEST_CASE("cli: eval of a checkpoint reproduces the last metrics row") {
  testing::TempDir dir("cli_eval");
  REQUIRE(cli(dir, "synth --seed 3 --num-seen 6 --num-unseen 2 --samples-per-class 12 --out d").code == 0);
  REQUIRE(cli(dir, "run --data d --rounds 2 -k 2 --seed 4 --out r").code == 0);
  const auto ev = cli(dir, "eval --checkpoint r/final_model.csv --data d --seed 4");
  REQUIRE(ev.code == 0);
  const auto got = lines(ev.out);
  REQUIRE(got.size() == 2u);
  CHECK(got[0] == "acc_c,acc_u,acc_s,acc_h");
  const auto metrics = lines(testing::slurp(dir / "r/metrics.csv"));
  const auto last = fields(metrics.back());
  const auto vals = fields(got[1]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::stod(vals[i]) == doctest::Approx(std::stod(last[i + 1])));
}

TEST_CASE("cli: flag beats --set beats config file") {
  testing::TempDir dir("cli_precedence");
  testing::spit(dir / "c.ini", "[train]\nrounds = 5\nlocal_lr = 0.02\n[partition]\nclients = 2\n");
  REQUIRE(cli(dir, "run --config c.ini --set data.num_seen=6 --set data.num_unseen=2 "
                   "--set data.samples_per_class=12 --set train.rounds=4 --rounds 2 --out r")
              .code == 0);
  const auto manifest = ConfigMap::load(dir / "r/manifest.ini");
  CHECK(manifest.get("train.rounds") == "2");
  CHECK(manifest.get("partition.clients") == "2");
  CHECK(std::stod(*manifest.get("train.local_lr")) == 0.02);
  CHECK(lines(testing::slurp(dir / "r/metrics.csv")).size() == 3u);

  REQUIRE(cli(dir, "run --config c.ini --set data.num_seen=6 --set data.num_unseen=2 "
                   "--set data.samples_per_class=12 --set train.rounds=4 --out s")
              .code == 0);
  CHECK(ConfigMap::load(dir / "s/manifest.ini").get("train.rounds") == "4");
}

TEST_CASE("cli: exit codes") {
  testing::TempDir dir("cli_codes");
  CHECK(cli(dir, "--version").out.find(kVersion) != std::string::npos);
  CHECK(cli(dir, "run --set train.speed=3").code == 4);
  CHECK(cli(dir, "run --config missing.ini").code == 4);
  testing::spit(dir / "bad.ini", "[train]\nrounds\n");
  const auto bad = cli(dir, "run --config bad.ini");
  CHECK(bad.code == 4);
  CHECK(bad.err.find("line 2") != std::string::npos);
  CHECK(cli(dir, std::string("run ") + kQuickRun + " --lr 1e9 --out boom").code == 2);
  CHECK(cli(dir, "run --set data.num_seen=4 -k 9 --out p").code == 3);
  CHECK(cli(dir, "eval --data nowhere --stats").code == 4);
  CHECK(cli(dir, "frobnicate").code == 1);
  const auto check = cli(dir, "check --trials 1000");
  CHECK(check.code == 0);
  CHECK(lines(check.out)[0] == "name,trials,violations,max_slack");
}
