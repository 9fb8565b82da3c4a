#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimb/csv.hpp"
#include "mimb/random.hpp"

namespace mimb {

// Multi-view dataset with per-view observation masks. Views are stored
// features x samples; missing columns are zero-filled. Immutable by
// convention after construction.
struct IncompleteDataset {
  std::vector<Eigen::MatrixXd> views;  // X^v, m_v x n, zero-filled
  Eigen::MatrixXi masks;               // n x l, (j, v) = 1 iff observed
  std::vector<int> labels;             // empty when ground truth is unknown

  Eigen::Index sample_count() const { return masks.rows(); }
  int view_count() const { return static_cast<int>(views.size()); }
  Eigen::Index feature_dim(int v) const {
    return views[static_cast<std::size_t>(v)].rows();
  }
  bool has_labels() const { return !labels.empty(); }

  Eigen::Index observed_count(int v) const {
    return static_cast<Eigen::Index>(masks.col(v).sum());
  }
  Eigen::Index missing_count(int v) const {
    return sample_count() - observed_count(v);
  }

  // Columns of X^v that are observed, in sample order (m_v x n_v).
  Eigen::MatrixXd observed_columns(int v) const {
    const Eigen::MatrixXd& x = views[static_cast<std::size_t>(v)];
    Eigen::MatrixXd out(x.rows(), observed_count(v));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < sample_count(); ++j) {
      if (masks(j, v) != 0) out.col(k++) = x.col(j);
    }
    return out;
  }
};

// Ordered positions of the missing samples of one view. Acts as the sparse
// column-scatter map H^v in {0,1}^{n_m x n}: scatter(B) = B * H^v.
struct MissingIndex {
  std::vector<Eigen::Index> indices;  // strictly increasing, in [0, n)
  Eigen::Index sample_count = 0;      // n

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(indices.size());
  }
  bool empty() const { return indices.empty(); }

  static MissingIndex from_mask(const Eigen::MatrixXi& masks, int v) {
    if (v < 0 || v >= masks.cols()) {
      throw std::invalid_argument("missing_index: view id out of range");
    }
    MissingIndex idx;
    idx.sample_count = masks.rows();
    for (Eigen::Index j = 0; j < masks.rows(); ++j) {
      if (masks(j, v) == 0) idx.indices.push_back(j);
    }
    return idx;
  }

  // B * H^v without materializing H: column indices[i] of the result is
  // column i of B, all other columns zero.
  Eigen::MatrixXd scatter(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(b.rows(), sample_count);
    for (Eigen::Index i = 0; i < size(); ++i) {
      out.col(indices[static_cast<std::size_t>(i)]) = b.col(i);
    }
    return out;
  }

  // M * H^vT: selects the missing columns of an (? x n) matrix.
  Eigen::MatrixXd gather(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd out(m.rows(), size());
    for (Eigen::Index i = 0; i < size(); ++i) {
      out.col(i) = m.col(indices[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  Eigen::MatrixXd dense_h() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size(), sample_count);
    for (Eigen::Index i = 0; i < size(); ++i) {
      h(i, indices[static_cast<std::size_t>(i)]) = 1.0;
    }
    return h;
  }
};

inline MissingIndex missing_index(const Eigen::MatrixXi& masks, int v) {
  return MissingIndex::from_mask(masks, v);
}

// Zeroes the masked columns of every view. Idempotent.
inline void zero_fill(IncompleteDataset& data) {
  for (int v = 0; v < data.view_count(); ++v) {
    Eigen::MatrixXd& x = data.views[static_cast<std::size_t>(v)];
    for (Eigen::Index j = 0; j < data.sample_count(); ++j) {
      if (data.masks(j, v) == 0) x.col(j).setZero();
    }
  }
}

// Parses a {0,1} mask read as doubles, rejecting anything else.
inline Eigen::MatrixXi parse_mask_matrix(const Eigen::MatrixXd& raw,
                                         const std::string& source) {
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      if (raw(i, j) != 0.0 && raw(i, j) != 1.0) {
        throw IoError(source + ": mask entries must be 0 or 1, found " +
                      std::to_string(raw(i, j)) + " at row " +
                      std::to_string(i + 1));
      }
    }
  }
  return raw.cast<int>();
}

// Maps arbitrary label values to 0-based contiguous ids, ordered by value.
inline std::vector<int> normalize_labels(const std::vector<int>& raw) {
  std::map<int, int> remap;
  for (int value : raw) remap.emplace(value, 0);
  int next = 0;
  for (auto& [value, id] : remap) id = next++;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = remap[raw[i]];
  return out;
}

namespace detail {

inline void validate_dataset(const IncompleteDataset& data) {
  const Eigen::Index n = data.sample_count();
  if (data.view_count() == 0) {
    throw std::invalid_argument("dataset has no views");
  }
  if (data.masks.cols() != data.view_count()) {
    throw std::invalid_argument("mask has " + std::to_string(data.masks.cols()) +
                                " columns for " +
                                std::to_string(data.view_count()) + " views");
  }
  for (int v = 0; v < data.view_count(); ++v) {
    if (data.views[static_cast<std::size_t>(v)].cols() != n) {
      throw std::invalid_argument(
          "view " + std::to_string(v) + " has " +
          std::to_string(data.views[static_cast<std::size_t>(v)].cols()) +
          " samples, expected " + std::to_string(n));
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    int row_sum = 0;
    for (int v = 0; v < data.view_count(); ++v) {
      int m = data.masks(j, v);
      if (m != 0 && m != 1) {
        throw std::invalid_argument("mask entries must be 0 or 1");
      }
      row_sum += m;
    }
    if (row_sum == 0) {
      throw std::invalid_argument("sample " + std::to_string(j) +
                                  " observed in no view");
    }
  }
  if (data.has_labels() &&
      static_cast<Eigen::Index>(data.labels.size()) != n) {
    throw std::invalid_argument("label count does not match sample count");
  }
}

}  // namespace detail

// Assembles a dataset from in-memory pieces, applying zero-fill and checking
// every structural invariant.
inline IncompleteDataset make_dataset(std::vector<Eigen::MatrixXd> views,
                                      Eigen::MatrixXi masks,
                                      std::vector<int> labels = {}) {
  IncompleteDataset data;
  data.views = std::move(views);
  data.masks = std::move(masks);
  if (!labels.empty()) data.labels = normalize_labels(labels);
  detail::validate_dataset(data);
  zero_fill(data);
  return data;
}

// Loads view CSVs (samples as rows on disk, transposed to features x samples
// internally), an optional {0,1} mask CSV and an optional label file.
inline IncompleteDataset load_dataset(const std::vector<std::string>& view_paths,
                                      const std::string& mask_path = "",
                                      const std::string& labels_path = "",
                                      bool header = false) {
  if (view_paths.empty()) {
    throw std::invalid_argument("load_dataset: no view files given");
  }
  std::vector<Eigen::MatrixXd> views;
  Eigen::Index n = -1;
  for (const auto& path : view_paths) {
    Eigen::MatrixXd on_disk = read_csv_matrix(path, header);
    if (n < 0) {
      n = on_disk.rows();
    } else if (on_disk.rows() != n) {
      throw IoError(path + ": has " + std::to_string(on_disk.rows()) +
                    " samples, expected " + std::to_string(n));
    }
    views.push_back(on_disk.transpose());
  }
  const int l = static_cast<int>(views.size());

  Eigen::MatrixXi masks;
  if (mask_path.empty()) {
    masks = Eigen::MatrixXi::Ones(n, l);
  } else {
    Eigen::MatrixXd raw = read_csv_matrix(mask_path, header);
    if (raw.rows() != n) {
      throw IoError(mask_path + ": has " + std::to_string(raw.rows()) +
                    " rows, expected " + std::to_string(n));
    }
    masks = parse_mask_matrix(raw, mask_path);
  }

  std::vector<int> labels;
  if (!labels_path.empty()) {
    labels = read_label_file(labels_path, header);
    if (static_cast<Eigen::Index>(labels.size()) != n) {
      throw IoError(labels_path + ": has " + std::to_string(labels.size()) +
                    " labels, expected " + std::to_string(n));
    }
  }
  return make_dataset(std::move(views), std::move(masks), std::move(labels));
}

// Per-view random removal with exact counts: each view marks round(ratio * n)
// samples missing, then rows that lost every view are repaired by restoring a
// uniformly chosen view and removing a compensating donor sample in that view,
// so per-view counts stay exact and every sample keeps >= 1 view.
inline Eigen::MatrixXi random_missing_masks(Eigen::Index n, int l, double ratio,
                                            std::uint64_t seed) {
  if (l < 2) throw std::invalid_argument("random_missing_masks: need l >= 2");
  if (n <= 0) throw std::invalid_argument("random_missing_masks: need n >= 1");
  if (ratio < 0.0 || ratio >= 1.0) {
    throw std::invalid_argument("random_missing_masks: ratio must be in [0, 1)");
  }
  const auto per_view = static_cast<Eigen::Index>(
      std::lround(ratio * static_cast<double>(n)));
  if (static_cast<long long>(per_view) * l > static_cast<long long>(n) * (l - 1)) {
    throw std::invalid_argument(
        "random_missing_masks: ratio leaves some sample with no view");
  }

  Rng rng(seed);
  Eigen::MatrixXi masks = Eigen::MatrixXi::Ones(n, l);
  for (int v = 0; v < l; ++v) {
    auto removed = rng.sample_indices(static_cast<std::size_t>(n),
                                      static_cast<std::size_t>(per_view));
    for (std::size_t j : removed) {
      masks(static_cast<Eigen::Index>(j), v) = 0;
    }
  }

  // Donors observed in `view` whose removal cannot empty another row:
  // fully observed samples first, then any sample with >= 2 views.
  auto donors_in_view = [&](Eigen::Index skip, int view) {
    std::vector<Eigen::Index> donors;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != skip && masks(i, view) == 1 && masks.row(i).sum() == l) {
        donors.push_back(i);
      }
    }
    if (donors.empty()) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != skip && masks(i, view) == 1 && masks.row(i).sum() >= 2) {
          donors.push_back(i);
        }
      }
    }
    return donors;
  };

  for (Eigen::Index j = 0; j < n; ++j) {
    if (masks.row(j).sum() > 0) continue;
    std::vector<int> view_order(static_cast<std::size_t>(l));
    for (int v = 0; v < l; ++v) view_order[static_cast<std::size_t>(v)] = v;
    rng.shuffle(view_order);

    bool repaired = false;
    for (int restore : view_order) {
      auto donors = donors_in_view(j, restore);
      if (donors.empty()) continue;
      masks(j, restore) = 1;
      masks(donors[rng.index(donors.size())], restore) = 0;
      repaired = true;
      break;
    }
    if (!repaired) {
      throw std::runtime_error("random_missing_masks: repair found no donor");
    }
  }
  return masks;
}

// Paired-preserved protocol: round(paired_ratio * n) samples keep all views,
// every remaining sample keeps exactly one uniformly chosen view.
inline Eigen::MatrixXi paired_preserved_masks(Eigen::Index n, int l,
                                              double paired_ratio,
                                              std::uint64_t seed) {
  if (l < 2) throw std::invalid_argument("paired_preserved_masks: need l >= 2");
  if (n <= 0) throw std::invalid_argument("paired_preserved_masks: need n >= 1");
  if (!(paired_ratio > 0.0) || paired_ratio > 1.0) {
    throw std::invalid_argument(
        "paired_preserved_masks: paired_ratio must be in (0, 1]");
  }
  const auto paired = static_cast<std::size_t>(
      std::lround(paired_ratio * static_cast<double>(n)));

  Rng rng(seed);
  Eigen::MatrixXi masks = Eigen::MatrixXi::Zero(n, l);
  auto paired_rows = rng.sample_indices(static_cast<std::size_t>(n), paired);
  std::vector<bool> is_paired(static_cast<std::size_t>(n), false);
  for (std::size_t j : paired_rows) is_paired[j] = true;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (is_paired[static_cast<std::size_t>(j)]) {
      masks.row(j).setOnes();
    } else {
      masks(j, static_cast<int>(rng.index(static_cast<std::size_t>(l)))) = 1;
    }
  }
  return masks;
}

// Gaussian blobs shared across views: same labels everywhere, balanced sizes,
// RMS pairwise centroid distance equal to `separation`, isotropic noise with
// standard deviation `noise`.
inline IncompleteDataset synth_multiview(Eigen::Index n, int c,
                                         const std::vector<Eigen::Index>& dims,
                                         double separation, double noise,
                                         std::uint64_t seed) {
  if (c < 2 || n < c) {
    throw std::invalid_argument("synth_multiview: need n >= c >= 2");
  }
  if (dims.empty()) {
    throw std::invalid_argument("synth_multiview: dims must be nonempty");
  }
  if (!(separation > 0.0) || !(noise > 0.0)) {
    throw std::invalid_argument(
        "synth_multiview: separation and noise must be positive");
  }

  Rng rng(seed);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    labels[static_cast<std::size_t>(j)] = static_cast<int>(j % c);
  }

  std::vector<Eigen::MatrixXd> views;
  for (Eigen::Index m : dims) {
    if (m <= 0) throw std::invalid_argument("synth_multiview: bad view dim");
    // Centroids drawn uniformly from a nonnegative box scaled so the RMS
    // pairwise centroid distance equals `separation`. Nonnegative centers
    // mimic the count/descriptor features this model family targets.
    const double span = separation * std::sqrt(6.0 / static_cast<double>(m));
    Eigen::MatrixXd centers(m, c);
    for (int k = 0; k < c; ++k) {
      for (Eigen::Index i = 0; i < m; ++i) {
        centers(i, k) = span * rng.uniform();
      }
    }
    Eigen::MatrixXd x(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) {
        x(i, j) = centers(i, labels[static_cast<std::size_t>(j)]) +
                  noise * rng.normal();
      }
    }
    views.push_back(std::move(x));
  }

  Eigen::MatrixXi masks =
      Eigen::MatrixXi::Ones(n, static_cast<int>(dims.size()));
  return make_dataset(std::move(views), std::move(masks), std::move(labels));
}

// Optional per-feature min-max rescale to [0, 1], computed on observed
// columns only; missing columns stay zero.
inline void minmax_rescale(IncompleteDataset& data) {
  for (int v = 0; v < data.view_count(); ++v) {
    Eigen::MatrixXd& x = data.views[static_cast<std::size_t>(v)];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (Eigen::Index j = 0; j < data.sample_count(); ++j) {
        if (data.masks(j, v) == 0) continue;
        lo = std::min(lo, x(i, j));
        hi = std::max(hi, x(i, j));
      }
      const double span = hi - lo;
      if (!(span > 0.0)) continue;
      for (Eigen::Index j = 0; j < data.sample_count(); ++j) {
        if (data.masks(j, v) != 0) x(i, j) = (x(i, j) - lo) / span;
      }
    }
  }
}

}  // namespace mimb
