#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "mimb/random.hpp"

namespace mimb::testutil {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline Eigen::MatrixXd random_uniform_matrix(Eigen::Index rows,
                                             Eigen::Index cols,
                                             std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform();
  }
  return m;
}

inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols,
                                          std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rows, cols, seed));
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

// Row subproblem of the similarity update:
// lambda2 * sum_{j != i} (s_j - a_j)^2 + (lambda3 / 4) * sum_{j != i} h_j s_j.
inline double similarity_row_objective(const Eigen::VectorXd& s,
                                       const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& h,
                                       double lambda2, double lambda3,
                                       Eigen::Index i) {
  double quad = 0.0, lin = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (j == i) continue;
    quad += (s(j) - a(j)) * (s(j) - a(j));
    lin += h(j) * s(j);
  }
  return lambda2 * quad + 0.25 * lambda3 * lin;
}

// Exact minimum of the row subproblem over the zero-diagonal simplex by
// enumerating support sets and solving each equality-constrained quadratic.
inline double similarity_row_oracle(const Eigen::VectorXd& a,
                                    const Eigen::VectorXd& h, double lambda2,
                                    double lambda3, Eigen::Index i) {
  const Eigen::Index n = a.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != i) free.push_back(j);
  }
  const std::size_t m = free.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t bits = 1; bits < (std::size_t{1} << m); ++bits) {
    double target_sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (bits & (std::size_t{1} << k)) {
        target_sum += a(free[k]) - lambda3 * h(free[k]) / (8.0 * lambda2);
        ++count;
      }
    }
    const double shift = (1.0 - target_sum) / count;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    bool feasible = true;
    for (std::size_t k = 0; k < m && feasible; ++k) {
      if (bits & (std::size_t{1} << k)) {
        s(free[k]) =
            a(free[k]) - lambda3 * h(free[k]) / (8.0 * lambda2) + shift;
        feasible = s(free[k]) >= -1e-12;
      }
    }
    if (!feasible) continue;
    best = std::min(best,
                    similarity_row_objective(s, a, h, lambda2, lambda3, i));
  }
  return best;
}

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("mimb_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }
  std::string root() const { return dir_.string(); }

private:
  std::filesystem::path dir_;
  static inline int counter_ = 0;
};

}  // namespace mimb::testutil
