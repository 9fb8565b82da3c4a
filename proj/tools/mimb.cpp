#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "mimb/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  std::string out_dir;
  std::uint64_t seed = 0;
  int repeats = 0;
  std::string b_step;
  std::string cluster_on;
  std::string nmi_norm;
  bool dump_state = false;
  bool dump_graphs = false;
  bool header = false;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--out", ov.out_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", ov.seed, "Base seed (overrides config)");
  cmd->add_option("--repeats", ov.repeats, "Repeat count (overrides config)");
  cmd->add_option("--b-step", ov.b_step,
                  "Recovery-step linear system: paper (simplified, default) "
                  "or exact (full stationarity system)")
      ->check(CLI::IsMember({"paper", "exact"}));
  cmd->add_option("--cluster-on", ov.cluster_on,
                  "Representation to cluster: P, F or S_spectral")
      ->check(CLI::IsMember({"P", "F", "S_spectral"}));
  cmd->add_option("--nmi-norm", ov.nmi_norm,
                  "NMI normalization: sqrt, mean or max")
      ->check(CLI::IsMember({"sqrt", "mean", "max"}));
  cmd->add_flag("--dump-state", ov.dump_state,
                "Dump final consensus, similarity and weights as CSV");
  cmd->add_flag("--dump-graphs", ov.dump_graphs,
                "Dump feature graphs and the similarity Laplacian as CSV");
  cmd->add_flag("--header", ov.header, "Input CSVs carry one header line");
}

void apply_overrides(mimb::ExperimentConfig& cfg, const CLI::App* cmd,
                     const Overrides& ov) {
  if (cmd->count("--out")) cfg.out_dir = ov.out_dir;
  if (cmd->count("--seed")) cfg.seed = ov.seed;
  if (cmd->count("--repeats")) cfg.repeats = ov.repeats;
  if (cmd->count("--b-step")) {
    cfg.hyperparams.b_step = mimb::detail::b_step_from(ov.b_step);
  }
  if (cmd->count("--cluster-on")) {
    cfg.cluster_on = mimb::detail::cluster_target_from(ov.cluster_on);
  }
  if (cmd->count("--nmi-norm")) {
    cfg.nmi_norm = mimb::detail::nmi_norm_from(ov.nmi_norm);
  }
  if (cmd->count("--dump-state")) cfg.dump_state = true;
  if (cmd->count("--dump-graphs")) cfg.dump_graphs = true;
  if (cmd->count("--header")) cfg.dataset.header = true;
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
}

void print_summary(const mimb::RunReport& report) {
  std::printf("repeats=%zu mean_acc=%.4f mean_nmi=%.4f mean_purity=%.4f\n",
              report.repeats.size(), report.mean_acc, report.mean_nmi,
              report.mean_purity);
  std::printf("report written to %s\n", report.config.out_dir.c_str());
}

int write_diagnostic(const std::string& out_dir, const std::string& what) {
  namespace fs = std::filesystem;
  fs::path dir = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path dump = dir / "diagnostic.txt";
  std::ofstream out(dump);
  if (out) out << what << '\n';
  std::cerr << "error: " << what << '\n'
            << "diagnostic dump: " << dump.string() << '\n';
  return kExitNumerical;
}

int run_guarded(const std::string& out_dir, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const mimb::SolverError& e) {
    return write_diagnostic(out_dir, e.what());
  } catch (const mimb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mimb::IoError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recovery-based incomplete multi-view clustering"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand(
      "fit", "Run the optimizer per an experiment config and write reports");
  std::string fit_config;
  Overrides fit_ov;
  fit_cmd->add_option("--config", fit_config, "Experiment config (JSON)")
      ->required();
  add_override_flags(fit_cmd, fit_ov);

  // baseline
  auto* base_cmd = app.add_subcommand(
      "baseline", "Run a fill-and-kmeans reference method on the same config");
  std::string base_config, base_method;
  Overrides base_ov;
  base_cmd->add_option("--config", base_config, "Experiment config (JSON)")
      ->required();
  base_cmd->add_option("--method", base_method, "bsv_meanfill or concat_zerofill")
      ->required()
      ->check(CLI::IsMember({"bsv_meanfill", "concat_zerofill"}));
  add_override_flags(base_cmd, base_ov);

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a labeled multi-view blob dataset");
  std::string synth_out;
  long long synth_n = 300;
  int synth_c = 3;
  std::vector<long long> synth_dims;
  double synth_sep = 6.0, synth_noise = 1.0;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--n", synth_n, "Sample count");
  synth_cmd->add_option("--clusters", synth_c, "Cluster count");
  synth_cmd->add_option("--dims", synth_dims, "Per-view feature dims")
      ->required()
      ->delimiter(',');
  synth_cmd->add_option("--separation", synth_sep, "Centroid spacing");
  synth_cmd->add_option("--noise", synth_noise, "Within-cluster stddev");
  synth_cmd->add_option("--seed", synth_seed, "Seed");

  // mask
  auto* mask_cmd = app.add_subcommand("mask", "Generate an observation mask CSV");
  std::string mask_out, mask_strategy = "random_missing";
  long long mask_n = 0;
  int mask_l = 0;
  double mask_ratio = 0.0;
  std::uint64_t mask_seed = 0;
  mask_cmd->add_option("--out", mask_out, "Output CSV path")->required();
  mask_cmd->add_option("--n", mask_n, "Sample count")->required();
  mask_cmd->add_option("--views", mask_l, "View count")->required();
  mask_cmd->add_option("--strategy", mask_strategy,
                       "random_missing or paired_preserved")
      ->check(CLI::IsMember({"random_missing", "paired_preserved"}));
  mask_cmd->add_option("--ratio", mask_ratio,
                       "Missing ratio (random_missing) or paired ratio "
                       "(paired_preserved)")
      ->required();
  mask_cmd->add_option("--seed", mask_seed, "Seed");

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "Score a predicted labels file against truth");
  std::string eval_pred, eval_truth, eval_norm = "sqrt";
  eval_cmd->add_option("--pred", eval_pred, "Predicted labels file")->required();
  eval_cmd->add_option("--truth", eval_truth, "Ground-truth labels file")
      ->required();
  eval_cmd->add_option("--nmi-norm", eval_norm, "NMI normalization")
      ->check(CLI::IsMember({"sqrt", "mean", "max"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (fit_cmd->parsed()) {
    mimb::ExperimentConfig cfg;
    const int parse_rc = run_guarded("", [&] {
      cfg = mimb::parse_config_file(fit_config);
      apply_overrides(cfg, fit_cmd, fit_ov);
    });
    if (parse_rc != kExitOk) return parse_rc;
    return run_guarded(cfg.out_dir,
                       [&] { print_summary(mimb::run_fit_experiment(cfg)); });
  }
  if (base_cmd->parsed()) {
    mimb::ExperimentConfig cfg;
    const int parse_rc = run_guarded("", [&] {
      cfg = mimb::parse_config_file(base_config);
      apply_overrides(cfg, base_cmd, base_ov);
    });
    if (parse_rc != kExitOk) return parse_rc;
    const auto method = base_method == "bsv_meanfill"
                            ? mimb::BaselineMethod::BsvMeanfill
                            : mimb::BaselineMethod::ConcatZerofill;
    return run_guarded(cfg.out_dir,
                       [&] { print_summary(mimb::run_baseline(cfg, method)); });
  }
  if (synth_cmd->parsed()) {
    return run_guarded(synth_out, [&] {
      mimb::SynthSpec spec;
      spec.samples = synth_n;
      spec.clusters = synth_c;
      for (long long d : synth_dims) spec.dims.push_back(d);
      spec.separation = synth_sep;
      spec.noise = synth_noise;
      mimb::write_synth_dataset(spec, synth_seed, synth_out);
      std::printf("dataset written to %s\n", synth_out.c_str());
    });
  }
  if (mask_cmd->parsed()) {
    return run_guarded("", [&] {
      const auto strategy = mask_strategy == "random_missing"
                                ? mimb::MaskStrategy::RandomMissing
                                : mimb::MaskStrategy::PairedPreserved;
      mimb::write_mask_file(mask_out, mask_n, mask_l, strategy, mask_ratio,
                            mask_seed);
      std::printf("mask written to %s\n", mask_out.c_str());
    });
  }
  if (eval_cmd->parsed()) {
    return run_guarded("", [&] {
      const auto pred = mimb::read_label_file(eval_pred);
      const auto truth = mimb::read_label_file(eval_truth);
      const auto norm = mimb::detail::nmi_norm_from(eval_norm);
      std::printf("acc,nmi,purity\n%.17g,%.17g,%.17g\n",
                  mimb::accuracy(pred, truth), mimb::nmi(pred, truth, norm),
                  mimb::purity(pred, truth));
    });
  }
  return kExitOk;
}
