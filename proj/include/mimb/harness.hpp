#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimb/csv.hpp"
#include "mimb/dataset.hpp"
#include "mimb/eval.hpp"
#include "mimb/solver.hpp"

namespace mimb {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class MaskStrategy { RandomMissing, PairedPreserved, FromFile };
enum class ClusterTarget { Consensus, Embedding, SimilaritySpectral };
enum class BaselineMethod { BsvMeanfill, ConcatZerofill };

struct SynthSpec {
  Eigen::Index samples = 0;
  int clusters = 0;
  std::vector<Eigen::Index> dims;
  double separation = 6.0;
  double noise = 1.0;
};

struct DatasetSpec {
  std::vector<std::string> view_paths;
  std::string labels_path;
  bool header = false;
  bool rescale = false;
  std::optional<SynthSpec> synth;
};

struct MaskSpec {
  MaskStrategy strategy = MaskStrategy::RandomMissing;
  double ratio = 0.0;
  std::string path;  // FromFile only
};

struct ExperimentConfig {
  DatasetSpec dataset;
  MaskSpec mask;
  HyperParams hyperparams;
  int repeats = 5;
  ClusterTarget cluster_on = ClusterTarget::Consensus;
  NmiNorm nmi_norm = NmiNorm::Sqrt;
  int kmeans_restarts = 20;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool dump_state = false;
  bool dump_graphs = false;
};

struct RepeatResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  double acc = std::numeric_limits<double>::quiet_NaN();
  double nmi_score = std::numeric_limits<double>::quiet_NaN();
  double purity_score = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double final_objective = 0.0;
  bool converged = false;
  int best_view = -1;  // BSV baseline only
  std::vector<int> predicted;
  std::vector<double> objective_trace;
  std::vector<IterationRecord> history;
  double seconds_mask = 0.0;
  double seconds_fit = 0.0;
  double seconds_cluster = 0.0;
};

struct RunReport {
  ExperimentConfig config;  // fully resolved
  std::vector<RepeatResult> repeats;
  double mean_acc = 0.0, mean_nmi = 0.0, mean_purity = 0.0;
  double std_acc = 0.0, std_nmi = 0.0, std_purity = 0.0;
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::string strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::RandomMissing: return "random_missing";
    case MaskStrategy::PairedPreserved: return "paired_preserved";
    case MaskStrategy::FromFile: return "from_file";
  }
  return "";
}

inline MaskStrategy strategy_from(const std::string& name) {
  if (name == "random_missing") return MaskStrategy::RandomMissing;
  if (name == "paired_preserved") return MaskStrategy::PairedPreserved;
  if (name == "from_file") return MaskStrategy::FromFile;
  throw ConfigError("unknown mask strategy: " + name);
}

inline std::string cluster_target_name(ClusterTarget t) {
  switch (t) {
    case ClusterTarget::Consensus: return "P";
    case ClusterTarget::Embedding: return "F";
    case ClusterTarget::SimilaritySpectral: return "S_spectral";
  }
  return "";
}

inline ClusterTarget cluster_target_from(const std::string& name) {
  if (name == "P") return ClusterTarget::Consensus;
  if (name == "F") return ClusterTarget::Embedding;
  if (name == "S_spectral") return ClusterTarget::SimilaritySpectral;
  throw ConfigError("unknown cluster_on value: " + name);
}

inline std::string nmi_norm_name(NmiNorm n) {
  switch (n) {
    case NmiNorm::Sqrt: return "sqrt";
    case NmiNorm::Mean: return "mean";
    case NmiNorm::Max: return "max";
  }
  return "";
}

inline NmiNorm nmi_norm_from(const std::string& name) {
  if (name == "sqrt") return NmiNorm::Sqrt;
  if (name == "mean") return NmiNorm::Mean;
  if (name == "max") return NmiNorm::Max;
  throw ConfigError("unknown nmi_norm value: " + name);
}

inline std::string b_step_name(BStepVariant v) {
  return v == BStepVariant::Simplified ? "paper" : "exact";
}

inline BStepVariant b_step_from(const std::string& name) {
  if (name == "paper") return BStepVariant::Simplified;
  if (name == "exact") return BStepVariant::Exact;
  throw ConfigError("unknown b_step value: " + name);
}

inline std::string kernel_name(GraphKernel k) {
  return k == GraphKernel::Heat ? "heat" : "binary";
}

inline GraphKernel kernel_from(const std::string& name) {
  if (name == "heat") return GraphKernel::Heat;
  if (name == "binary") return GraphKernel::Binary;
  throw ConfigError("unknown graph_kernel value: " + name);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  ExperimentConfig cfg;

  const auto& jd = j.at("dataset");
  if (jd.contains("synth")) {
    const auto& js = jd.at("synth");
    SynthSpec synth;
    synth.samples = js.value("n", 0);
    synth.clusters = js.value("clusters", 0);
    for (const auto& d : js.value("dims", std::vector<Eigen::Index>{})) {
      synth.dims.push_back(d);
    }
    synth.separation = js.value("separation", 6.0);
    synth.noise = js.value("noise", 1.0);
    if (synth.samples <= 0 || synth.clusters < 2 || synth.dims.empty()) {
      throw ConfigError("config: dataset.synth needs n, clusters >= 2, dims");
    }
    cfg.dataset.synth = synth;
  } else if (jd.contains("views")) {
    cfg.dataset.view_paths = jd.at("views").get<std::vector<std::string>>();
    if (cfg.dataset.view_paths.empty()) {
      throw ConfigError("config: dataset.views is empty");
    }
    cfg.dataset.labels_path = jd.value("labels", "");
  } else {
    throw ConfigError("config: dataset needs either 'views' or 'synth'");
  }
  cfg.dataset.header = jd.value("header", false);
  cfg.dataset.rescale = jd.value("rescale", false);

  if (j.contains("mask")) {
    const auto& jm = j.at("mask");
    cfg.mask.strategy =
        detail::strategy_from(jm.value("strategy", "random_missing"));
    cfg.mask.ratio = jm.value("ratio", 0.0);
    cfg.mask.path = jm.value("path", "");
    if (cfg.mask.strategy == MaskStrategy::FromFile && cfg.mask.path.empty()) {
      throw ConfigError("config: mask.strategy from_file needs mask.path");
    }
    if (cfg.mask.strategy == MaskStrategy::RandomMissing &&
        (cfg.mask.ratio < 0.0 || cfg.mask.ratio >= 1.0)) {
      throw ConfigError("config: random_missing ratio must be in [0, 1)");
    }
    if (cfg.mask.strategy == MaskStrategy::PairedPreserved &&
        !(cfg.mask.ratio > 0.0 && cfg.mask.ratio <= 1.0)) {
      throw ConfigError("config: paired_preserved ratio must be in (0, 1]");
    }
  }

  HyperParams& hp = cfg.hyperparams;
  if (j.contains("hyperparams")) {
    const auto& jh = j.at("hyperparams");
    hp.lambda1 = jh.value("lambda1", hp.lambda1);
    hp.lambda2 = jh.value("lambda2", hp.lambda2);
    hp.lambda3 = jh.value("lambda3", hp.lambda3);
    hp.beta = jh.value("beta", hp.beta);
    hp.r = jh.value("r", hp.r);
    hp.clusters = jh.value("clusters", 0);
    hp.graph_neighbors = jh.value("graph_neighbors", hp.graph_neighbors);
    hp.graph_kernel = detail::kernel_from(
        jh.value("graph_kernel", detail::kernel_name(hp.graph_kernel)));
    hp.max_iter = jh.value("max_iter", hp.max_iter);
    hp.tol = jh.value("tol", hp.tol);
    hp.eps = jh.value("eps", hp.eps);
    hp.b_step =
        detail::b_step_from(jh.value("b_step", detail::b_step_name(hp.b_step)));
  } else {
    hp.clusters = 0;
  }
  if (hp.clusters == 0 && cfg.dataset.synth) {
    hp.clusters = cfg.dataset.synth->clusters;
  }

  cfg.repeats = j.value("repeats", 5);
  if (cfg.repeats < 1) throw ConfigError("config: repeats must be >= 1");
  cfg.cluster_on = detail::cluster_target_from(j.value("cluster_on", "P"));
  cfg.nmi_norm = detail::nmi_norm_from(j.value("nmi_norm", "sqrt"));
  cfg.kmeans_restarts = j.value("kmeans_restarts", 20);
  if (cfg.kmeans_restarts < 1) {
    throw ConfigError("config: kmeans_restarts must be >= 1");
  }
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.out_dir = j.value("out_dir", "");
  cfg.dump_state = j.value("dump_state", false);
  cfg.dump_graphs = j.value("dump_graphs", false);
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

// Fully resolved echo, defaulted fields included.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json jd;
  if (cfg.dataset.synth) {
    jd["synth"] = {{"n", cfg.dataset.synth->samples},
                   {"clusters", cfg.dataset.synth->clusters},
                   {"dims", cfg.dataset.synth->dims},
                   {"separation", cfg.dataset.synth->separation},
                   {"noise", cfg.dataset.synth->noise}};
  } else {
    jd["views"] = cfg.dataset.view_paths;
    jd["labels"] = cfg.dataset.labels_path;
  }
  jd["header"] = cfg.dataset.header;
  jd["rescale"] = cfg.dataset.rescale;

  const HyperParams& hp = cfg.hyperparams;
  return nlohmann::json{
      {"dataset", jd},
      {"mask",
       {{"strategy", detail::strategy_name(cfg.mask.strategy)},
        {"ratio", cfg.mask.ratio},
        {"path", cfg.mask.path}}},
      {"hyperparams",
       {{"lambda1", hp.lambda1},
        {"lambda2", hp.lambda2},
        {"lambda3", hp.lambda3},
        {"beta", hp.beta},
        {"r", hp.r},
        {"clusters", hp.clusters},
        {"graph_neighbors", hp.graph_neighbors},
        {"graph_kernel", detail::kernel_name(hp.graph_kernel)},
        {"max_iter", hp.max_iter},
        {"tol", hp.tol},
        {"eps", hp.eps},
        {"b_step", detail::b_step_name(hp.b_step)}}},
      {"repeats", cfg.repeats},
      {"cluster_on", detail::cluster_target_name(cfg.cluster_on)},
      {"nmi_norm", detail::nmi_norm_name(cfg.nmi_norm)},
      {"kmeans_restarts", cfg.kmeans_restarts},
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"dump_state", cfg.dump_state},
      {"dump_graphs", cfg.dump_graphs}};
}

// ---------------------------------------------------------------------------
// Experiment execution

namespace detail {

inline double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

// Views and labels with an all-observed mask; repeats apply their own masks.
inline IncompleteDataset build_base_dataset(const ExperimentConfig& cfg) {
  IncompleteDataset base;
  if (cfg.dataset.synth) {
    const SynthSpec& s = *cfg.dataset.synth;
    base = synth_multiview(s.samples, s.clusters, s.dims, s.separation,
                           s.noise, cfg.seed);
  } else {
    base = load_dataset(cfg.dataset.view_paths, "", cfg.dataset.labels_path,
                        cfg.dataset.header);
  }
  if (cfg.dataset.rescale) minmax_rescale(base);
  return base;
}

inline Eigen::MatrixXi mask_for_repeat(const ExperimentConfig& cfg,
                                       Eigen::Index n, int l,
                                       std::uint64_t repeat_seed) {
  switch (cfg.mask.strategy) {
    case MaskStrategy::RandomMissing:
      if (cfg.mask.ratio == 0.0) return Eigen::MatrixXi::Ones(n, l);
      return random_missing_masks(n, l, cfg.mask.ratio, repeat_seed);
    case MaskStrategy::PairedPreserved:
      return paired_preserved_masks(n, l, cfg.mask.ratio, repeat_seed);
    case MaskStrategy::FromFile: {
      Eigen::MatrixXd raw = read_csv_matrix(cfg.mask.path, cfg.dataset.header);
      if (raw.rows() != n || raw.cols() != l) {
        throw ConfigError("mask file " + cfg.mask.path + " is " +
                          std::to_string(raw.rows()) + "x" +
                          std::to_string(raw.cols()) + ", expected " +
                          std::to_string(n) + "x" + std::to_string(l));
      }
      return parse_mask_matrix(raw, cfg.mask.path);
    }
  }
  throw ConfigError("unreachable mask strategy");
}

inline int resolve_cluster_count(const ExperimentConfig& cfg,
                                 const IncompleteDataset& base) {
  if (cfg.hyperparams.clusters >= 2) return cfg.hyperparams.clusters;
  if (base.has_labels()) {
    std::set<int> distinct(base.labels.begin(), base.labels.end());
    return static_cast<int>(distinct.size());
  }
  throw ConfigError(
      "config: hyperparams.clusters not given and no labels to infer it from");
}

inline void score_repeat(RepeatResult& rep, const IncompleteDataset& data,
                         const std::vector<int>& predicted, NmiNorm norm) {
  rep.predicted = predicted;
  if (!data.has_labels()) return;
  rep.acc = accuracy(predicted, data.labels);
  rep.nmi_score = nmi(predicted, data.labels, norm);
  rep.purity_score = purity(predicted, data.labels);
}

inline void summarize(RunReport& report) {
  const auto n = static_cast<double>(report.repeats.size());
  auto stats = [n](auto getter, const std::vector<RepeatResult>& reps,
                   double& mean, double& sd) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& rep : reps) {
      sum += getter(rep);
      sum_sq += getter(rep) * getter(rep);
    }
    mean = sum / n;
    sd = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0));
  };
  stats([](const RepeatResult& r) { return r.acc; }, report.repeats,
        report.mean_acc, report.std_acc);
  stats([](const RepeatResult& r) { return r.nmi_score; }, report.repeats,
        report.mean_nmi, report.std_nmi);
  stats([](const RepeatResult& r) { return r.purity_score; }, report.repeats,
        report.mean_purity, report.std_purity);
}

}  // namespace detail

inline KMeansResult cluster_state(const ModelState& state, ClusterTarget target,
                                  int restarts, std::uint64_t seed) {
  const int c = state.cluster_count();
  switch (target) {
    case ClusterTarget::Consensus:
      return kmeans(state.consensus.transpose(), c, restarts, seed);
    case ClusterTarget::Embedding:
      return kmeans(state.embedding, c, restarts, seed);
    case ClusterTarget::SimilaritySpectral:
      return kmeans(
          spectral_embedding(laplacian_of_similarity(state.similarity), c), c,
          restarts, seed);
  }
  throw std::invalid_argument("unreachable cluster target");
}

// Per-feature mean of the observed columns imputed into the missing columns.
inline Eigen::MatrixXd mean_filled_view(const IncompleteDataset& data, int v) {
  Eigen::MatrixXd x = data.views[static_cast<std::size_t>(v)];
  const Eigen::Index observed = data.observed_count(v);
  Eigen::VectorXd means = Eigen::VectorXd::Zero(x.rows());
  if (observed > 0) {
    for (Eigen::Index j = 0; j < data.sample_count(); ++j) {
      if (data.masks(j, v) != 0) means += x.col(j);
    }
    means /= static_cast<double>(observed);
  }
  for (Eigen::Index j = 0; j < data.sample_count(); ++j) {
    if (data.masks(j, v) == 0) x.col(j) = means;
  }
  return x;
}

// Views stacked feature-wise (sum m_v x n), zero-filled as stored.
inline Eigen::MatrixXd stack_views(const IncompleteDataset& data) {
  Eigen::Index total = 0;
  for (int v = 0; v < data.view_count(); ++v) total += data.feature_dim(v);
  Eigen::MatrixXd stacked(total, data.sample_count());
  Eigen::Index at = 0;
  for (int v = 0; v < data.view_count(); ++v) {
    stacked.middleRows(at, data.feature_dim(v)) =
        data.views[static_cast<std::size_t>(v)];
    at += data.feature_dim(v);
  }
  return stacked;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string fmt_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline void write_metrics_csv(const std::string& path,
                              const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "repeat,seed,acc,nmi,purity,iterations,final_objective\n";
  for (const auto& rep : report.repeats) {
    out << rep.repeat << ',' << rep.seed << ',' << fmt_double(rep.acc) << ','
        << fmt_double(rep.nmi_score) << ',' << fmt_double(rep.purity_score)
        << ',' << rep.iterations << ',' << fmt_double(rep.final_objective)
        << '\n';
  }
}

inline void write_trace_csv(const std::string& path,
                            const std::vector<IterationRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const Eigen::Index l =
      history.empty() ? 0 : history.front().view_weights.size();
  out << "iter,objective,term_recovery,term_inverse,term_manifold_fit,"
         "term_rank";
  for (Eigen::Index v = 1; v <= l; ++v) out << ",alpha_" << v;
  out << '\n';
  // Row per executed iteration; the initial record (iteration 0) is echoed
  // in report.json instead.
  for (std::size_t i = 1; i < history.size(); ++i) {
    const auto& rec = history[i];
    out << rec.iteration << ',' << fmt_double(rec.terms.total()) << ','
        << fmt_double(rec.terms.recovery) << ','
        << fmt_double(rec.terms.inverse) << ','
        << fmt_double(rec.terms.manifold_fit) << ','
        << fmt_double(rec.terms.rank);
    for (Eigen::Index v = 0; v < rec.view_weights.size(); ++v) {
      out << ',' << fmt_double(rec.view_weights(v));
    }
    out << '\n';
  }
}

inline nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json jreps = nlohmann::json::array();
  std::vector<std::uint64_t> seeds;
  for (const auto& rep : report.repeats) {
    seeds.push_back(rep.seed);
    nlohmann::json jr{{"repeat", rep.repeat},
                      {"seed", rep.seed},
                      {"acc", rep.acc},
                      {"nmi", rep.nmi_score},
                      {"purity", rep.purity_score},
                      {"iterations", rep.iterations},
                      {"final_objective", rep.final_objective},
                      {"converged", rep.converged},
                      {"wall_seconds",
                       {{"mask", rep.seconds_mask},
                        {"fit", rep.seconds_fit},
                        {"cluster", rep.seconds_cluster}}}};
    if (!rep.objective_trace.empty()) {
      jr["objective_trace"] = rep.objective_trace;
    }
    if (!rep.predicted.empty()) jr["predicted_labels"] = rep.predicted;
    if (rep.best_view >= 0) jr["best_view"] = rep.best_view;
    jreps.push_back(std::move(jr));
  }
  return nlohmann::json{
      {"config", config_to_json(report.config)},
      {"seeds", seeds},
      {"repeats", jreps},
      {"mean",
       {{"acc", report.mean_acc},
        {"nmi", report.mean_nmi},
        {"purity", report.mean_purity}}},
      {"std",
       {{"acc", report.std_acc},
        {"nmi", report.std_nmi},
        {"purity", report.std_purity}}}};
}

inline void write_report_files(const RunReport& report, bool with_traces) {
  if (report.config.out_dir.empty()) return;
  namespace fs = std::filesystem;
  const fs::path dir(report.config.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw IoError("cannot write report.json");
    out << report_to_json(report).dump(2) << '\n';
  }
  write_metrics_csv((dir / "metrics.csv").string(), report);
  if (with_traces) {
    for (const auto& rep : report.repeats) {
      write_trace_csv(
          (dir / ("trace_" + std::to_string(rep.repeat) + ".csv")).string(),
          rep.history);
    }
  }
}

}  // namespace detail

// Runs the full pipeline: per repeat, derive seed, draw the mask, fit,
// cluster, score; then write report.json, metrics.csv and trace_<i>.csv.
inline RunReport run_fit_experiment(const ExperimentConfig& config) {
  RunReport report;
  report.config = config;
  const IncompleteDataset base = detail::build_base_dataset(config);
  report.config.hyperparams.clusters =
      detail::resolve_cluster_count(config, base);

  namespace fs = std::filesystem;
  for (int i = 0; i < config.repeats; ++i) {
    RepeatResult rep;
    rep.repeat = i;
    rep.seed = config.seed + static_cast<std::uint64_t>(i);

    auto t_mask = std::chrono::steady_clock::now();
    Eigen::MatrixXi mask = detail::mask_for_repeat(
        report.config, base.sample_count(), base.view_count(), rep.seed);
    IncompleteDataset data = make_dataset(base.views, mask, base.labels);
    rep.seconds_mask = detail::seconds_since(t_mask);

    HyperParams hp = report.config.hyperparams;
    hp.seed = rep.seed;
    auto t_fit = std::chrono::steady_clock::now();
    FitResult fitted = fit(data, hp);
    rep.seconds_fit = detail::seconds_since(t_fit);

    auto t_cluster = std::chrono::steady_clock::now();
    KMeansResult km = cluster_state(fitted.state, report.config.cluster_on,
                                    report.config.kmeans_restarts, rep.seed);
    rep.seconds_cluster = detail::seconds_since(t_cluster);

    rep.iterations = fitted.state.iter;
    rep.final_objective = fitted.state.objective_trace.back();
    rep.converged = fitted.converged;
    rep.objective_trace = fitted.state.objective_trace;
    rep.history = fitted.history;
    detail::score_repeat(rep, data, km.labels, report.config.nmi_norm);

    if (!config.out_dir.empty() && (config.dump_state || config.dump_graphs)) {
      const fs::path dir(config.out_dir);
      fs::create_directories(dir);
      const std::string tag = std::to_string(i);
      if (config.dump_state) {
        write_csv_matrix((dir / ("state_" + tag + "_consensus.csv")).string(),
                         fitted.state.consensus);
        write_csv_matrix((dir / ("state_" + tag + "_similarity.csv")).string(),
                         fitted.state.similarity);
        write_csv_matrix((dir / ("state_" + tag + "_weights.csv")).string(),
                         Eigen::MatrixXd(fitted.state.view_weights.transpose()));
      }
      if (config.dump_graphs) {
        for (int v = 0; v < fitted.state.view_count(); ++v) {
          write_csv_matrix(
              (dir / ("feature_graph_" + tag + "_view_" + std::to_string(v + 1) +
                      ".csv"))
                  .string(),
              fitted.state.graphs[static_cast<std::size_t>(v)].weights);
        }
        write_csv_matrix(
            (dir / ("similarity_laplacian_" + tag + ".csv")).string(),
            laplacian_of_similarity(fitted.state.similarity));
      }
    }
    report.repeats.push_back(std::move(rep));
  }
  detail::summarize(report);
  detail::write_report_files(report, /*with_traces=*/true);
  return report;
}

// Zero-fill/mean-fill + k-means reference methods sharing the fit pipeline's
// masks and seeds.
inline RunReport run_baseline(const ExperimentConfig& config,
                              BaselineMethod method) {
  RunReport report;
  report.config = config;
  const IncompleteDataset base = detail::build_base_dataset(config);
  report.config.hyperparams.clusters =
      detail::resolve_cluster_count(config, base);
  const int c = report.config.hyperparams.clusters;

  for (int i = 0; i < config.repeats; ++i) {
    RepeatResult rep;
    rep.repeat = i;
    rep.seed = config.seed + static_cast<std::uint64_t>(i);

    auto t_mask = std::chrono::steady_clock::now();
    Eigen::MatrixXi mask = detail::mask_for_repeat(
        report.config, base.sample_count(), base.view_count(), rep.seed);
    IncompleteDataset data = make_dataset(base.views, mask, base.labels);
    rep.seconds_mask = detail::seconds_since(t_mask);

    auto t_cluster = std::chrono::steady_clock::now();
    if (method == BaselineMethod::ConcatZerofill) {
      KMeansResult km = kmeans(stack_views(data).transpose(), c,
                               config.kmeans_restarts, rep.seed);
      rep.final_objective = km.objective;
      detail::score_repeat(rep, data, km.labels, config.nmi_norm);
    } else {
      // Best single view: k-means on each mean-filled view, keep the view
      // with the best accuracy (best k-means objective when unlabeled).
      double best_score = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < data.view_count(); ++v) {
        KMeansResult km = kmeans(mean_filled_view(data, v).transpose(), c,
                                 config.kmeans_restarts, rep.seed);
        const double score = data.has_labels()
                                 ? accuracy(km.labels, data.labels)
                                 : -km.objective;
        if (score > best_score) {
          best_score = score;
          rep.best_view = v;
          rep.final_objective = km.objective;
          detail::score_repeat(rep, data, km.labels, config.nmi_norm);
        }
      }
    }
    rep.seconds_cluster = detail::seconds_since(t_cluster);
    report.repeats.push_back(std::move(rep));
  }
  detail::summarize(report);
  detail::write_report_files(report, /*with_traces=*/false);
  return report;
}

// ---------------------------------------------------------------------------
// Dataset generation commands

struct SynthOutput {
  std::vector<std::string> view_files;
  std::string labels_file;
  std::string manifest_file;
};

// Writes per-view CSVs (samples as rows), a labels file and a manifest that
// records the generation parameters.
inline SynthOutput write_synth_dataset(const SynthSpec& spec,
                                       std::uint64_t seed,
                                       const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  IncompleteDataset data = synth_multiview(spec.samples, spec.clusters,
                                           spec.dims, spec.separation,
                                           spec.noise, seed);
  SynthOutput out;
  for (int v = 0; v < data.view_count(); ++v) {
    const std::string name = "view_" + std::to_string(v + 1) + ".csv";
    const Eigen::MatrixXd on_disk =
        data.views[static_cast<std::size_t>(v)].transpose();
    write_csv_matrix((dir / name).string(), on_disk);
    out.view_files.push_back(name);
  }
  out.labels_file = "labels.csv";
  write_label_file((dir / out.labels_file).string(), data.labels);

  nlohmann::json manifest{{"n", spec.samples},
                          {"clusters", spec.clusters},
                          {"dims", spec.dims},
                          {"separation", spec.separation},
                          {"noise", spec.noise},
                          {"seed", seed},
                          {"views", out.view_files},
                          {"labels", out.labels_file}};
  out.manifest_file = "manifest.json";
  std::ofstream mf(dir / out.manifest_file);
  if (!mf) throw IoError("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
  return out;
}

inline void write_mask_file(const std::string& path, Eigen::Index n, int l,
                            MaskStrategy strategy, double ratio,
                            std::uint64_t seed) {
  Eigen::MatrixXi mask;
  switch (strategy) {
    case MaskStrategy::RandomMissing:
      mask = random_missing_masks(n, l, ratio, seed);
      break;
    case MaskStrategy::PairedPreserved:
      mask = paired_preserved_masks(n, l, ratio, seed);
      break;
    case MaskStrategy::FromFile:
      throw ConfigError("mask generation needs a generative strategy");
  }
  write_csv_matrix(path, mask);
}

}  // namespace mimb
