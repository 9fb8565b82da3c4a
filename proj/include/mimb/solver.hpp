#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mimb/dataset.hpp"
#include "mimb/graphs.hpp"
#include "mimb/random.hpp"

namespace mimb {

// Numerical failure inside the optimizer (non-finite objective, failed
// factorization). Carries a human-readable diagnostic.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Which linear system the recovery update solves. Simplified drops the
// basis back-projection term from the stationarity condition; Exact keeps it.
enum class BStepVariant { Simplified, Exact };

struct HyperParams {
  double lambda1 = 1.0;   // recovery graph regularization
  double lambda2 = 1e-5;  // similarity fit to P^T P
  double lambda3 = 1e-5;  // spectral rank term
  double beta = 1.0;      // basis Frobenius regularization
  double r = 2.0;         // view-weight smoothing exponent, > 1
  int clusters = 2;       // c
  int graph_neighbors = 5;
  GraphKernel graph_kernel = GraphKernel::Heat;
  int max_iter = 100;
  double tol = 1e-5;  // relative objective change
  double eps = 1e-12;
  std::uint64_t seed = 0;
  BStepVariant b_step = BStepVariant::Simplified;

  void validate() const {
    if (!(r > 1.0)) throw std::invalid_argument("hyperparams: need r > 1");
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || beta < 0) {
      throw std::invalid_argument("hyperparams: penalty weights must be >= 0");
    }
    if (clusters < 2) throw std::invalid_argument("hyperparams: need c >= 2");
    if (!(tol > 0.0)) throw std::invalid_argument("hyperparams: need tol > 0");
    if (!(eps > 0.0) || eps > 1e-6) {
      throw std::invalid_argument("hyperparams: need eps in (0, 1e-6]");
    }
    if (max_iter < 1) throw std::invalid_argument("hyperparams: need max_iter >= 1");
    if (graph_neighbors < 1) {
      throw std::invalid_argument("hyperparams: need graph_neighbors >= 1");
    }
  }
};

// All optimizer variables. Graphs and missing indices are fixed at init.
struct ModelState {
  Eigen::MatrixXd consensus;               // P: c x n, nonnegative
  Eigen::MatrixXd similarity;              // S: n x n, rows on simplex, zero diag
  Eigen::MatrixXd embedding;               // F: n x c, orthonormal columns
  std::vector<Eigen::MatrixXd> bases;      // U^v: m_v x c, orthonormal columns
  std::vector<Eigen::MatrixXd> recovery;   // B^v: m_v x n_m^v
  Eigen::VectorXd view_weights;            // alpha: length l, sums to 1
  std::vector<FeatureGraph> graphs;        // per-view feature graphs
  std::vector<MissingIndex> missing;       // per-view missing-sample indices
  int iter = 0;
  std::vector<double> objective_trace;

  int cluster_count() const { return static_cast<int>(consensus.rows()); }
  int view_count() const { return static_cast<int>(bases.size()); }
};

struct ObjectiveTerms {
  double recovery = 0.0;      // weighted forward fit + graph regularization
  double inverse = 0.0;       // weighted reverse fit + basis regularization
  double manifold_fit = 0.0;  // lambda2 * ||S - P^T P||^2
  double rank = 0.0;          // lambda3 * Tr(F^T L_S F)
  double total() const { return recovery + inverse + manifold_fit + rank; }
};

// X^v with its missing columns replaced by the recovery columns.
inline Eigen::MatrixXd recovered_view(const ModelState& state,
                                      const IncompleteDataset& data, int v) {
  Eigen::MatrixXd y = data.views[static_cast<std::size_t>(v)];
  const MissingIndex& idx = state.missing[static_cast<std::size_t>(v)];
  const Eigen::MatrixXd& b = state.recovery[static_cast<std::size_t>(v)];
  for (Eigen::Index i = 0; i < idx.size(); ++i) {
    y.col(idx.indices[static_cast<std::size_t>(i)]) = b.col(i);
  }
  return y;
}

namespace detail {

struct ViewLossParts {
  double forward = 0.0;    // ||Y - U P||_F^2
  double graph_reg = 0.0;  // lambda1 * Tr(B^T L B)
  double reverse = 0.0;    // ||U^T Y - P||_F^2
  double basis_reg = 0.0;  // beta * ||U||_F^2
  double total() const { return forward + graph_reg + reverse + basis_reg; }
};

inline ViewLossParts view_loss_parts(const ModelState& state,
                                     const IncompleteDataset& data,
                                     const HyperParams& hp, int v) {
  const auto vi = static_cast<std::size_t>(v);
  const Eigen::MatrixXd& u = state.bases[vi];
  const Eigen::MatrixXd& b = state.recovery[vi];
  const Eigen::MatrixXd y = recovered_view(state, data, v);

  ViewLossParts parts;
  parts.forward = (y - u * state.consensus).squaredNorm();
  if (b.size() > 0) {
    parts.graph_reg =
        hp.lambda1 * (b.transpose() * state.graphs[vi].laplacian * b).trace();
  }
  parts.reverse = (u.transpose() * y - state.consensus).squaredNorm();
  parts.basis_reg = hp.beta * u.squaredNorm();
  return parts;
}

}  // namespace detail

// Per-view losses Lambda^v entering the weight update.
inline Eigen::VectorXd view_losses(const ModelState& state,
                                   const IncompleteDataset& data,
                                   const HyperParams& hp) {
  Eigen::VectorXd losses(state.view_count());
  for (int v = 0; v < state.view_count(); ++v) {
    losses(v) = detail::view_loss_parts(state, data, hp, v).total();
  }
  return losses;
}

inline ObjectiveTerms objective_terms(const ModelState& state,
                                      const IncompleteDataset& data,
                                      const HyperParams& hp) {
  ObjectiveTerms terms;
  for (int v = 0; v < state.view_count(); ++v) {
    const auto parts = detail::view_loss_parts(state, data, hp, v);
    const double weight = std::pow(state.view_weights(v), hp.r);
    terms.recovery += weight * (parts.forward + parts.graph_reg);
    terms.inverse += weight * (parts.reverse + parts.basis_reg);
  }
  const Eigen::MatrixXd& p = state.consensus;
  terms.manifold_fit =
      hp.lambda2 * (state.similarity - p.transpose() * p).squaredNorm();
  const Eigen::MatrixXd ls = laplacian_of_similarity(state.similarity);
  terms.rank =
      hp.lambda3 *
      (state.embedding.transpose() * ls * state.embedding).trace();
  return terms;
}

inline double objective(const ModelState& state, const IncompleteDataset& data,
                        const HyperParams& hp) {
  return objective_terms(state, data, hp).total();
}

// Orthonormal eigenvectors of the c algebraically smallest eigenvalues,
// ascending order, each column signed so its largest-magnitude entry is
// positive.
inline Eigen::MatrixXd spectral_embedding(const Eigen::MatrixXd& laplacian,
                                          int c) {
  if (c < 1 || c > laplacian.rows()) {
    throw std::invalid_argument("spectral_embedding: bad embedding dimension");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian);
  if (solver.info() != Eigen::Success) {
    throw SolverError("spectral_embedding: eigendecomposition failed");
  }
  Eigen::MatrixXd f = solver.eigenvectors().leftCols(c);
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    Eigen::Index peak = 0;
    f.col(j).cwiseAbs().maxCoeff(&peak);
    if (f(peak, j) < 0.0) f.col(j) = -f.col(j);
  }
  return f;
}

// Multiplicative consensus update. The assembled numerator can be negative
// (the basis projections are not sign-constrained); it is clamped at eps
// rather than zero so a suppressed entry decays geometrically instead of
// freezing at an exact zero before the bases have aligned. Entries that are
// exactly zero stay zero, and eps pads the denominator.
inline Eigen::MatrixXd consensus_step(const ModelState& state,
                                      const IncompleteDataset& data,
                                      const HyperParams& hp) {
  const Eigen::MatrixXd& p = state.consensus;
  Eigen::MatrixXd numerator = hp.lambda2 * (p * state.similarity);
  double weight_sum = 0.0;
  for (int v = 0; v < state.view_count(); ++v) {
    const double weight = std::pow(state.view_weights(v), hp.r);
    weight_sum += weight;
    numerator +=
        weight * (state.bases[static_cast<std::size_t>(v)].transpose() *
                  recovered_view(state, data, v));
  }
  numerator = numerator.cwiseMax(hp.eps);
  Eigen::MatrixXd denominator =
      hp.lambda2 * ((p * p.transpose()) * p) + weight_sum * p;
  denominator.array() += hp.eps;
  return (p.array() * numerator.array() / denominator.array()).matrix();
}

// Row-wise similarity update: each row is the projection of
// (P^T P)_i - lambda3/(8 lambda2) * ||F_i - F_j||^2 onto the zero-diagonal
// simplex.
inline Eigen::MatrixXd similarity_step(const ModelState& state,
                                       const HyperParams& hp) {
  if (!(hp.lambda2 > 0.0)) {
    throw std::invalid_argument(
        "similarity_step: undefined for lambda2 = 0 (the row target divides "
        "by lambda2)");
  }
  const Eigen::MatrixXd& p = state.consensus;
  const Eigen::MatrixXd& f = state.embedding;
  const Eigen::Index n = p.cols();

  Eigen::MatrixXd gram = p.transpose() * p;
  Eigen::VectorXd row_sq = f.rowwise().squaredNorm();
  Eigen::MatrixXd pairwise = row_sq.replicate(1, n) +
                             row_sq.transpose().replicate(n, 1) -
                             2.0 * f * f.transpose();
  pairwise = pairwise.cwiseMax(0.0);

  const double coef = hp.lambda3 / (8.0 * hp.lambda2);
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd target = gram.row(i).transpose() - coef * pairwise.row(i).transpose();
    s.row(i) = simplex_project(target, i).transpose();
  }
  return s;
}

inline Eigen::MatrixXd embedding_step(const ModelState& state) {
  return spectral_embedding(laplacian_of_similarity(state.similarity),
                            state.cluster_count());
}

// Orthogonal-Procrustes basis update: U = T R^T from the thin SVD of
// Y P^T = T Sigma R^T. A rank-deficient cross matrix gets its unused left
// singular directions replaced by a deterministic orthonormal completion.
inline Eigen::MatrixXd basis_step(const ModelState& state,
                                  const IncompleteDataset& data, int v) {
  const Eigen::MatrixXd y = recovered_view(state, data, v);
  const Eigen::MatrixXd cross = y * state.consensus.transpose();
  const auto c = cross.cols();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv(0) * 1e-12;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++rank;
  }
  if (rank >= c) {
    return svd.matrixU() * svd.matrixV().transpose();
  }

  std::fprintf(stderr,
               "mimb: basis update, view %d: cross matrix has rank %ld < %ld; "
               "completing the basis deterministically\n",
               v, static_cast<long>(rank), static_cast<long>(c));
  Eigen::MatrixXd left(cross.rows(), c);
  left.leftCols(rank) = svd.matrixU().leftCols(rank);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(svd.matrixU().leftCols(rank));
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(cross.rows(), c);
  left.rightCols(c - rank) = q.rightCols(c - rank);
  return left * svd.matrixV().transpose();
}

// Recovery update: an SPD solve of the chosen stationarity system against
// the consensus columns at the missing positions. The data matrix itself
// does not enter: its missing columns are zero by construction.
inline Eigen::MatrixXd recovery_step(const ModelState& state,
                                     const IncompleteDataset& /*data*/, int v,
                                     const HyperParams& hp) {
  const auto vi = static_cast<std::size_t>(v);
  const MissingIndex& idx = state.missing[vi];
  if (idx.empty()) return state.recovery[vi];

  const Eigen::MatrixXd& u = state.bases[vi];
  const Eigen::MatrixXd& lap = state.graphs[vi].laplacian;
  const Eigen::Index m = u.rows();
  const Eigen::MatrixXd projected = u * idx.gather(state.consensus);

  Eigen::MatrixXd system;
  Eigen::MatrixXd rhs;
  if (hp.b_step == BStepVariant::Simplified) {
    system = 2.0 * Eigen::MatrixXd::Identity(m, m) + hp.lambda1 * lap;
    rhs = projected;
  } else {
    system = Eigen::MatrixXd::Identity(m, m) + hp.lambda1 * lap +
             u * u.transpose();
    rhs = 2.0 * projected;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw SolverError("recovery_step: linear system is not positive definite "
                      "(view " + std::to_string(v) + ")");
  }
  return llt.solve(rhs);
}

// Closed-form minimizer of sum_v alpha_v^r * loss_v over the simplex:
// alpha_v proportional to loss_v^{1/(1-r)}. Views with exactly zero loss
// absorb all the weight, split uniformly.
inline Eigen::VectorXd weights_from_losses(const Eigen::VectorXd& losses,
                                           double r) {
  if (!(r > 1.0)) throw std::invalid_argument("weights_from_losses: need r > 1");
  const Eigen::Index l = losses.size();
  Eigen::VectorXd clamped = losses.cwiseMax(0.0);

  const Eigen::Index zero_count = (clamped.array() == 0.0).count();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(l);
  if (zero_count > 0) {
    for (Eigen::Index v = 0; v < l; ++v) {
      if (clamped(v) == 0.0) alpha(v) = 1.0 / static_cast<double>(zero_count);
    }
    return alpha;
  }
  // Normalizing by the smallest loss keeps every power in (0, 1].
  const double reference = clamped.minCoeff();
  const double exponent = 1.0 / (1.0 - r);
  for (Eigen::Index v = 0; v < l; ++v) {
    alpha(v) = std::pow(clamped(v) / reference, exponent);
  }
  return alpha / alpha.sum();
}

inline Eigen::VectorXd weight_step(const ModelState& state,
                                   const IncompleteDataset& data,
                                   const HyperParams& hp) {
  return weights_from_losses(view_losses(state, data, hp), hp.r);
}

inline ModelState init_state(const IncompleteDataset& data,
                             const HyperParams& hp) {
  hp.validate();
  const Eigen::Index n = data.sample_count();
  const int l = data.view_count();
  const int c = hp.clusters;
  if (c > n) {
    throw std::invalid_argument("init_state: cluster count exceeds sample count");
  }
  for (int v = 0; v < l; ++v) {
    if (c > data.feature_dim(v)) {
      throw std::invalid_argument("init_state: cluster count exceeds feature "
                                  "dimensionality of view " + std::to_string(v));
    }
  }

  ModelState state;
  state.view_weights =
      Eigen::VectorXd::Constant(l, 1.0 / static_cast<double>(l));
  for (int v = 0; v < l; ++v) {
    state.graphs.push_back(feature_knn_graph(data.observed_columns(v),
                                             hp.graph_neighbors,
                                             hp.graph_kernel));
    state.missing.push_back(missing_index(data.masks, v));
  }

  Rng rng(hp.seed);
  auto gaussian = [&rng](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = rng.normal();
    }
    return g;
  };

  for (int v = 0; v < l; ++v) {
    const Eigen::Index m = data.feature_dim(v);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(m, c));
    state.bases.push_back(qr.householderQ() *
                          Eigen::MatrixXd::Identity(m, c));
    state.recovery.push_back(
        0.01 * gaussian(m, state.missing[static_cast<std::size_t>(v)].size()));
  }

  state.similarity.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row(n);
    for (Eigen::Index j = 0; j < n; ++j) row(j) = rng.uniform();
    state.similarity.row(i) = simplex_project(row, i).transpose();
  }
  state.embedding =
      spectral_embedding(laplacian_of_similarity(state.similarity), c);

  Eigen::MatrixXd mean_projection = Eigen::MatrixXd::Zero(c, n);
  for (int v = 0; v < l; ++v) {
    mean_projection += state.bases[static_cast<std::size_t>(v)].transpose() *
                       data.views[static_cast<std::size_t>(v)];
  }
  mean_projection /= static_cast<double>(l);
  state.consensus = mean_projection.cwiseMax(hp.eps);

  state.iter = 0;
  state.objective_trace.push_back(objective(state, data, hp));
  return state;
}

struct IterationRecord {
  int iteration = 0;
  ObjectiveTerms terms;
  Eigen::VectorXd view_weights;
};

struct FitResult {
  ModelState state;
  bool converged = false;
  std::vector<IterationRecord> history;  // record 0 is the initial state
};

using IterationCallback =
    std::function<void(const ModelState&, int iteration)>;

// Full alternating optimization: P, S, F, then per-view U and B, then the
// view weights, until the relative objective change drops below tol.
inline FitResult fit(const IncompleteDataset& data, const HyperParams& hp,
                     const IterationCallback& on_iteration = {}) {
  FitResult result;
  result.state = init_state(data, hp);
  ModelState& state = result.state;
  result.history.push_back(
      {0, objective_terms(state, data, hp), state.view_weights});

  for (int t = 1; t <= hp.max_iter; ++t) {
    state.consensus = consensus_step(state, data, hp);
    state.similarity = similarity_step(state, hp);
    state.embedding = embedding_step(state);
    for (int v = 0; v < state.view_count(); ++v) {
      const auto vi = static_cast<std::size_t>(v);
      state.bases[vi] = basis_step(state, data, v);
      state.recovery[vi] = recovery_step(state, data, v, hp);
    }
    state.view_weights = weight_step(state, data, hp);

    const ObjectiveTerms terms = objective_terms(state, data, hp);
    const double value = terms.total();
    if (!std::isfinite(value)) {
      throw SolverError(
          "fit: non-finite objective at iteration " + std::to_string(t) +
          " (recovery=" + std::to_string(terms.recovery) +
          ", inverse=" + std::to_string(terms.inverse) +
          ", manifold_fit=" + std::to_string(terms.manifold_fit) +
          ", rank=" + std::to_string(terms.rank) + ")");
    }
    const double previous = state.objective_trace.back();
    state.objective_trace.push_back(value);
    state.iter = t;
    result.history.push_back({t, terms, state.view_weights});
    if (on_iteration) on_iteration(state, t);

    const double relative_change =
        std::abs(value - previous) / std::max(std::abs(previous), 1e-300);
    if (relative_change < hp.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace mimb
