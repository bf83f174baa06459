#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "distzsl/model.hpp"

namespace testing {

using distzsl::ModelParams;

// Central differences over every scalar of the parameter set.
inline Eigen::VectorXd numeric_gradient(const ModelParams<double>& p,
                                        const std::function<double(const ModelParams<double>&)>& f,
                                        double h = 1e-5) {
  const Eigen::VectorXd x = p.flatten();
  Eigen::VectorXd g(x.size());
  ModelParams<double> q = p;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    q.unflatten(xp);
    const double fp = f(q);
    q.unflatten(xm);
    const double fm = f(q);
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

inline ModelParams<double> random_params(int d_v, int d_a, std::uint64_t seed, double scale = 0.5) {
  auto p = distzsl::init_params<double>(d_v, d_a, 1, distzsl::ModelMode::AttributeBased, seed);
  std::mt19937_64 rng(seed * 7919 + 13);
  std::normal_distribution<double> n(0.0, scale);
  p.for_each([&](const char*, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
  });
  return p;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("distzsl_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing
