#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mimb/dataset.hpp"
#include "mimb/random.hpp"

namespace mimb {

enum class NmiNorm { Sqrt, Mean, Max };

struct KMeansResult {
  std::vector<int> labels;
  double objective = 0.0;  // within-cluster sum of squares
};

struct ClusteringResult {
  std::vector<int> labels;
  double acc = 0.0;
  double nmi = 0.0;
  double purity = 0.0;
  double kmeans_objective = 0.0;
};

namespace detail {

inline void require_label_pair(const std::vector<int>& pred,
                               const std::vector<int>& truth) {
  if (pred.empty() || truth.empty()) {
    throw std::invalid_argument("label vectors must be nonempty");
  }
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("label vectors have different lengths");
  }
}

// Canonical form for partition comparison: ids by order of first appearance.
inline std::vector<int> first_appearance_ids(const std::vector<int>& labels) {
  std::vector<int> seen;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(seen.begin(), seen.end(), labels[i]);
    if (it == seen.end()) {
      seen.push_back(labels[i]);
      out[i] = static_cast<int>(seen.size()) - 1;
    } else {
      out[i] = static_cast<int>(it - seen.begin());
    }
  }
  return out;
}

inline Eigen::MatrixXd confusion_matrix(const std::vector<int>& pred,
                                        const std::vector<int>& truth,
                                        int* pred_classes, int* truth_classes) {
  const std::vector<int> p = normalize_labels(pred);
  const std::vector<int> t = normalize_labels(truth);
  const int cp = 1 + *std::max_element(p.begin(), p.end());
  const int ct = 1 + *std::max_element(t.begin(), t.end());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(cp, ct);
  for (std::size_t i = 0; i < p.size(); ++i) {
    counts(p[i], t[i]) += 1.0;
  }
  if (pred_classes) *pred_classes = cp;
  if (truth_classes) *truth_classes = ct;
  return counts;
}

}  // namespace detail

// Minimum-cost perfect assignment on a square cost matrix (Hungarian
// algorithm with potentials, O(n^3)). Ties resolve to the lowest index by
// scan order. Returns row -> column.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols() || cost.rows() == 0) {
    throw std::invalid_argument("min_cost_assignment: need a square matrix");
  }
  const int n = static_cast<int>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), path(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < min_slack[j]) {
          min_slack[j] = reduced;
          path[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = path[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Clustering accuracy under the optimal one-to-one cluster-to-class map,
// found by the Hungarian algorithm on the confusion matrix padded to square.
inline double accuracy(const std::vector<int>& pred,
                       const std::vector<int>& truth) {
  detail::require_label_pair(pred, truth);
  int cp = 0, ct = 0;
  Eigen::MatrixXd counts = detail::confusion_matrix(pred, truth, &cp, &ct);
  const int k = std::max(cp, ct);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(k, k);
  padded.topLeftCorner(cp, ct) = counts;

  const std::vector<int> assign = min_cost_assignment(-padded);
  double matched = 0.0;
  for (int i = 0; i < k; ++i) matched += padded(i, assign[i]);
  return matched / static_cast<double>(pred.size());
}

// Normalized mutual information with natural-log entropies. When either
// marginal entropy vanishes (a single-cluster labeling), returns 1 for
// identical partitions and 0 otherwise.
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth,
                  NmiNorm norm = NmiNorm::Sqrt) {
  detail::require_label_pair(pred, truth);
  Eigen::MatrixXd counts = detail::confusion_matrix(pred, truth, nullptr, nullptr);
  const double n = static_cast<double>(pred.size());
  const Eigen::VectorXd row = counts.rowwise().sum();
  const Eigen::VectorXd col = counts.colwise().sum();

  double h_pred = 0.0, h_truth = 0.0, mutual = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (row(i) > 0) h_pred -= (row(i) / n) * std::log(row(i) / n);
  }
  for (Eigen::Index j = 0; j < col.size(); ++j) {
    if (col(j) > 0) h_truth -= (col(j) / n) * std::log(col(j) / n);
  }
  if (!(h_pred > 0.0) || !(h_truth > 0.0)) {
    return detail::first_appearance_ids(pred) ==
                   detail::first_appearance_ids(truth)
               ? 1.0
               : 0.0;
  }
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (counts(i, j) <= 0) continue;
      const double joint = counts(i, j) / n;
      mutual += joint * std::log(joint * n * n / (row(i) * col(j)));
    }
  }
  double denom = 0.0;
  switch (norm) {
    case NmiNorm::Sqrt: denom = std::sqrt(h_pred * h_truth); break;
    case NmiNorm::Mean: denom = 0.5 * (h_pred + h_truth); break;
    case NmiNorm::Max: denom = std::max(h_pred, h_truth); break;
  }
  return std::clamp(mutual / denom, 0.0, 1.0);
}

// Average majority-class fraction over predicted clusters.
inline double purity(const std::vector<int>& pred,
                     const std::vector<int>& truth) {
  detail::require_label_pair(pred, truth);
  Eigen::MatrixXd counts = detail::confusion_matrix(pred, truth, nullptr, nullptr);
  double majority = 0.0;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    majority += counts.row(i).maxCoeff();
  }
  return majority / static_cast<double>(pred.size());
}

inline ClusteringResult score_clustering(const KMeansResult& km,
                                         const std::vector<int>& truth,
                                         NmiNorm norm = NmiNorm::Sqrt) {
  ClusteringResult result;
  result.labels = km.labels;
  result.kmeans_objective = km.objective;
  result.acc = accuracy(km.labels, truth);
  result.nmi = nmi(km.labels, truth, norm);
  result.purity = purity(km.labels, truth);
  return result;
}

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// within-cluster sum of squares. Empty clusters are re-seeded with the point
// farthest from its assigned center. Points are rows.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int c, int restarts,
                           std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (c < 1) throw std::invalid_argument("kmeans: need c >= 1");
  if (n < c) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (restarts < 1) throw std::invalid_argument("kmeans: need restarts >= 1");

  Rng rng(seed);
  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();

  for (int run = 0; run < restarts; ++run) {
    // k-means++ seeding.
    Eigen::MatrixXd centers(c, points.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    Eigen::VectorXd min_dist =
        Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    for (int k = 0; k < c; ++k) {
      Eigen::Index pick = -1;
      if (k == 0) {
        pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
      } else {
        const double total = min_dist.sum();
        if (total > 0.0) {
          double target = rng.uniform() * total;
          for (Eigen::Index j = 0; j < n; ++j) {
            target -= min_dist(j);
            if (target <= 0.0) {
              pick = j;
              break;
            }
          }
          if (pick < 0) pick = n - 1;
        } else {
          // All remaining mass is zero: take a uniformly random unchosen point.
          std::vector<Eigen::Index> open;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (!chosen[static_cast<std::size_t>(j)]) open.push_back(j);
          }
          pick = open[rng.index(open.size())];
        }
      }
      chosen[static_cast<std::size_t>(pick)] = true;
      centers.row(k) = points.row(pick);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = (points.row(j) - centers.row(k)).squaredNorm();
        min_dist(j) = std::min(min_dist(j), d);
      }
    }

    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int step = 0; step < 200; ++step) {
      bool changed = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        int arg = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < c; ++k) {
          const double d = (points.row(j) - centers.row(k)).squaredNorm();
          if (d < best_d) {
            best_d = d;
            arg = k;
          }
        }
        if (labels[static_cast<std::size_t>(j)] != arg) {
          labels[static_cast<std::size_t>(j)] = arg;
          changed = true;
        }
      }

      std::vector<Eigen::Index> sizes(static_cast<std::size_t>(c), 0);
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(c, points.cols());
      for (Eigen::Index j = 0; j < n; ++j) {
        sums.row(labels[static_cast<std::size_t>(j)]) += points.row(j);
        ++sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
      }
      for (int k = 0; k < c; ++k) {
        if (sizes[static_cast<std::size_t>(k)] == 0) {
          // Re-seed to the point farthest from its current center.
          Eigen::Index far = 0;
          double far_d = -1.0;
          for (Eigen::Index j = 0; j < n; ++j) {
            const int kj = labels[static_cast<std::size_t>(j)];
            const double d = (points.row(j) - centers.row(kj)).squaredNorm();
            if (d > far_d) {
              far_d = d;
              far = j;
            }
          }
          labels[static_cast<std::size_t>(far)] = k;
          centers.row(k) = points.row(far);
          changed = true;
        } else {
          centers.row(k) =
              sums.row(k) / static_cast<double>(sizes[static_cast<std::size_t>(k)]);
        }
      }
      if (!changed) break;
    }

    double objective = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      objective +=
          (points.row(j) - centers.row(labels[static_cast<std::size_t>(j)]))
              .squaredNorm();
    }
    if (objective < best.objective) {
      best.objective = objective;
      best.labels = labels;
    }
  }
  return best;
}

}  // namespace mimb
