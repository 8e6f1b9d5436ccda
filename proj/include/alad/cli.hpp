#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alad/errors.hpp"
#include "alad/experiments.hpp"

namespace alad {

struct ParsedCli {
  std::string command;
  ExperimentConfig cfg;
};

// Builds the option set shared by every subcommand. Precedence is
// flag > config file > built-in default; the config file is a flat
// key=value text file whose keys mirror the long option names.
inline ParsedCli parse_cli(int argc, const char* const* argv) {
  CLI::App app{"ALAD anomaly-detection toolkit"};
  app.require_subcommand(1);

  struct Raw {
    std::string dataset = "toy2d";
    std::string data_path, model = "alad", variant = "features", out = "runs";
    std::string checkpoint, anogan_checkpoint;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;
    std::size_t epochs = 0, batch_size = 0, latent_dim = 0;
    double alpha = 0.0, subsample = 1.0;
    bool no_sn = false, no_dzz = false, literal_minimax = false, timing = false;
    int recovery_steps = 500, recovery_restarts = 1;
    double recovery_step_size = 0.01, recovery_lambda = 0.1;
    std::size_t toy_nominal = 2000, toy_anomalous = 200;
  } raw;

  app.set_config("--config", "", "flat key=value config file");
  app.fallthrough();
  app.add_option("--dataset", raw.dataset, "kdd99 | arrhythmia | toy2d");
  app.add_option("--data-path", raw.data_path, "raw dataset file (default: $ALAD_DATA_DIR)");
  app.add_option("--model", raw.model, "alad | anogan");
  app.add_option("--variant", raw.variant, "features | logits | l1 | l2");
  app.add_option("--seed", raw.seed, "training seed");
  app.add_option("--seeds", raw.seeds, "seed list for multi-seed commands")->delimiter(',');
  auto* o_epochs = app.add_option("--epochs", raw.epochs, "training epochs");
  auto* o_batch = app.add_option("--batch-size", raw.batch_size, "minibatch size");
  auto* o_latent = app.add_option("--latent-dim", raw.latent_dim, "latent dimension");
  auto* o_alpha = app.add_option("--alpha", raw.alpha, "adam learning rate");
  app.add_flag("--no-sn", raw.no_sn, "disable spectral normalization");
  app.add_flag("--no-dzz", raw.no_dzz, "disable the latent cycle discriminator");
  app.add_flag("--literal-minimax", raw.literal_minimax,
               "use the saddle-point generator loss instead of the non-saturating one");
  app.add_option("--out", raw.out, "output directory");
  app.add_option("--checkpoint", raw.checkpoint, "checkpoint to evaluate");
  app.add_option("--anogan-checkpoint", raw.anogan_checkpoint, "baseline checkpoint for timing");
  app.add_option("--subsample", raw.subsample, "fraction of the training split to use");
  app.add_flag("--timing", raw.timing, "also measure per-batch scoring time in eval");
  app.add_option("--recovery-steps", raw.recovery_steps, "latent recovery gradient steps");
  app.add_option("--recovery-step-size", raw.recovery_step_size, "latent recovery step size");
  app.add_option("--recovery-lambda", raw.recovery_lambda, "feature-term weight in recovery loss");
  app.add_option("--recovery-restarts", raw.recovery_restarts, "latent recovery restarts");
  app.add_option("--toy-nominal", raw.toy_nominal, "synthetic nominal sample count");
  app.add_option("--toy-anomalous", raw.toy_anomalous, "synthetic anomalous sample count");

  for (const char* name : {"train", "eval", "ablate", "compare-scores", "timing", "toy-demo"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << std::endl;
    throw;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(std::string("argument error: ") + e.what());
  }

  ParsedCli out;
  out.command = app.get_subcommands().front()->get_name();

  out.cfg.dataset = raw.dataset;
  out.cfg.train = TrainConfig::defaults_for(raw.dataset == "custom" ? "custom" : raw.dataset);
  out.cfg.data_path = raw.data_path;
  out.cfg.model = raw.model;
  out.cfg.variant = raw.variant;
  out.cfg.out_dir = raw.out;
  out.cfg.checkpoint = raw.checkpoint;
  out.cfg.anogan_checkpoint = raw.anogan_checkpoint;
  out.cfg.measure_timing = raw.timing;
  out.cfg.train.seed = raw.seed;
  out.cfg.seeds = raw.seeds.empty() ? std::vector<std::uint64_t>{raw.seed} : raw.seeds;
  if (o_epochs->count()) out.cfg.train.epochs = raw.epochs;
  if (o_batch->count()) out.cfg.train.batch_size = raw.batch_size;
  if (o_latent->count()) out.cfg.train.latent_dim = raw.latent_dim;
  if (o_alpha->count()) out.cfg.train.alpha = raw.alpha;
  out.cfg.train.use_sn = !raw.no_sn;
  out.cfg.train.use_dzz = !raw.no_dzz;
  out.cfg.train.literal_minimax = raw.literal_minimax;
  out.cfg.train.train_subsample = raw.subsample;
  out.cfg.recovery.n_steps = raw.recovery_steps;
  out.cfg.recovery.step_size = raw.recovery_step_size;
  out.cfg.recovery.lambda_mix = raw.recovery_lambda;
  out.cfg.recovery.restarts = raw.recovery_restarts;
  out.cfg.toy_nominal = raw.toy_nominal;
  out.cfg.toy_anomalous = raw.toy_anomalous;
  return out;
}

inline int dispatch_cli(const ParsedCli& p) {
  const ExperimentConfig& cfg = p.cfg;
  if (p.command == "train") {
    for (std::uint64_t seed : cfg.seeds) {
      ExperimentConfig run = cfg;
      run.train.seed = seed;
      TrainOutput t = run_train(run);
      std::cout << "trained " << cfg.model << " on " << cfg.dataset << " seed " << seed << " ("
                << t.trained_epochs << " epochs, " << t.train_rows << " rows)\n"
                << "  checkpoint: " << t.checkpoint_path << "\n"
                << "  final losses: v_dxz=" << t.final_losses.v_dxz
                << " v_dxx=" << t.final_losses.v_dxx << " v_dzz=" << t.final_losses.v_dzz
                << " g_total=" << t.final_losses.g_total() << "\n";
    }
  } else if (p.command == "eval") {
    if (cfg.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
    EvalOutput e = run_eval(cfg, cfg.checkpoint);
    std::cout << "eval " << cfg.checkpoint << " (q=" << e.result.threshold_q
              << ", n_test=" << e.result.n_test << ")\n"
              << "  precision=" << e.result.precision << " recall=" << e.result.recall
              << " f1=" << e.result.f1 << " auroc=" << e.result.auroc << "\n"
              << "  appended to " << e.results_path << "\n";
  } else if (p.command == "ablate") {
    AblateOutput a = run_ablate(cfg);
    std::cout << "ablation grid on " << cfg.dataset << " (" << cfg.seeds.size() << " seed(s))\n";
    for (const AblateRow& r : a.rows)
      std::cout << "  " << r.name << ": f1=" << r.mean_f1 << " +- " << r.std_f1
                << " (p=" << r.mean_p << " +- " << r.std_p << ", r=" << r.mean_r << " +- "
                << r.std_r << ")\n";
    std::cout << "  table: " << a.csv_path << "\n";
  } else if (p.command == "compare-scores") {
    if (cfg.checkpoint.empty()) throw ConfigError("compare-scores needs --checkpoint");
    CompareOutput c = run_compare_scores(cfg, cfg.checkpoint);
    std::cout << "score variants on " << cfg.checkpoint << "\n";
    for (const CompareRow& r : c.rows)
      std::cout << "  " << r.variant << ": p=" << r.prf.precision << " r=" << r.prf.recall
                << " f1=" << r.prf.f1 << " auroc=" << r.auroc_value
                << (r.note.empty() ? "" : " [" + r.note + "]") << "\n";
    std::cout << "  table: " << c.csv_path << "\n";
  } else if (p.command == "timing") {
    if (cfg.checkpoint.empty() || cfg.anogan_checkpoint.empty())
      throw ConfigError("timing needs --checkpoint and --anogan-checkpoint");
    TimingOutput t = run_timing(cfg, cfg.checkpoint, cfg.anogan_checkpoint);
    std::cout << "inference timing (batch " << t.alad_stats.batch_size << ")\n"
              << "  anogan: " << t.anogan_stats.mean_ms_per_batch << " ms/batch\n"
              << "  alad:   " << t.alad_stats.mean_ms_per_batch << " ms/batch\n"
              << "  speedup: " << t.ratio << "x\n"
              << "  table: " << t.csv_path << "\n";
  } else if (p.command == "toy-demo") {
    ToyDemoOutput t = run_toy_demo(cfg);
    std::cout << "toy demo: auroc=" << t.result.auroc << " f1=" << t.result.f1
              << " nominal_mean=" << t.nominal_mean_score
              << " anomalous_mean=" << t.anomalous_mean_score << "\n"
              << "  points: " << t.points_path << "\n";
  } else {
    throw ConfigError("unknown command " + p.command);
  }
  return 0;
}

inline int run_cli(int argc, const char* const* argv) {
  try {
    return dispatch_cli(parse_cli(argc, argv));
  } catch (const CLI::CallForHelp&) {
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace alad
