#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mimb {

enum class GraphKernel { Heat, Binary };

// Symmetric nonnegative neighbor graph over the feature rows of one view,
// with its unnormalized Laplacian L = D - G.
struct FeatureGraph {
  Eigen::MatrixXd weights;    // G, zero diagonal
  Eigen::MatrixXd laplacian;  // L = D - G, PSD
};

// kNN graph over the rows of `x_observed` (one node per feature), union
// symmetrized. Heat-kernel weights exp(-d^2 / sigma^2) use the median of the
// included edge distances as bandwidth; a degenerate bandwidth (all included
// distances zero) falls back to binary weights.
inline FeatureGraph feature_knn_graph(const Eigen::MatrixXd& x_observed, int k,
                                      GraphKernel kernel = GraphKernel::Heat) {
  const Eigen::Index m = x_observed.rows();
  if (k <= 0) throw std::invalid_argument("feature_knn_graph: need k >= 1");
  if (k >= m) {
    throw std::invalid_argument("feature_knn_graph: need k < feature count");
  }
  if (x_observed.cols() < 1) {
    throw std::invalid_argument("feature_knn_graph: no observed columns");
  }

  // Pairwise squared distances between feature rows.
  Eigen::VectorXd sq = x_observed.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, m) + sq.transpose().replicate(m, 1) -
                       2.0 * x_observed * x_observed.transpose();
  d2 = d2.cwiseMax(0.0);

  Eigen::MatrixXi adjacent = Eigen::MatrixXi::Zero(m, m);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return d2(i, a) < d2(i, b);
                     });
    int taken = 0;
    for (Eigen::Index j : order) {
      if (j == i) continue;
      adjacent(i, j) = 1;
      if (++taken == k) break;
    }
  }

  std::vector<double> included;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if (adjacent(i, j) || adjacent(j, i)) {
        included.push_back(std::sqrt(d2(i, j)));
      }
    }
  }

  double sigma = 0.0;
  if (kernel == GraphKernel::Heat && !included.empty()) {
    std::vector<double> sorted = included;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    sigma = (sorted.size() % 2) ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  }
  const bool binary = kernel == GraphKernel::Binary || !(sigma > 0.0);

  FeatureGraph graph;
  graph.weights = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if (!adjacent(i, j) && !adjacent(j, i)) continue;
      const double w = binary ? 1.0 : std::exp(-d2(i, j) / (sigma * sigma));
      graph.weights(i, j) = w;
      graph.weights(j, i) = w;
    }
  }
  Eigen::VectorXd degree = graph.weights.rowwise().sum();
  graph.laplacian = Eigen::MatrixXd(degree.asDiagonal()) - graph.weights;
  return graph;
}

// L_S = D - (S + S^T)/2 with D the diagonal of row sums of the symmetrized
// similarity. Symmetric PSD for nonnegative S.
inline Eigen::MatrixXd laplacian_of_similarity(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::VectorXd degree = sym.rowwise().sum();
  return Eigen::MatrixXd(degree.asDiagonal()) - sym;
}

// Euclidean projection onto {s >= 0, sum(s) = 1, s[forbidden] = 0} by
// sort-and-threshold over the free coordinates.
inline Eigen::VectorXd simplex_project(const Eigen::VectorXd& v,
                                       Eigen::Index forbidden) {
  const Eigen::Index n = v.size();
  if (forbidden < 0 || forbidden >= n) {
    throw std::invalid_argument("simplex_project: forbidden index out of range");
  }
  if (n < 2) {
    throw std::invalid_argument(
        "simplex_project: no feasible point with one coordinate forced to 0");
  }

  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != forbidden) u.push_back(v(i));
  }
  std::vector<double> sorted = u;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double running = 0.0;
  double threshold = sorted.front() - 1.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    running += sorted[j];
    const double candidate = (running - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) threshold = candidate;
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  std::size_t pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == forbidden) continue;
    out(i) = std::max(u[pos++] - threshold, 0.0);
  }

  // Inputs with magnitudes near 1/ulp cancel the unit offset out of the
  // threshold; the projection then degenerates to the dominant vertex.
  if (!(std::abs(out.sum() - 1.0) <= 1e-8)) {
    out.setZero();
    Eigen::Index best = forbidden == 0 ? 1 : 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != forbidden && v(i) > v(best)) best = i;
    }
    out(best) = 1.0;
  }
  return out;
}

}  // namespace mimb
