#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "alad/anogan.hpp"
#include "alad/checkpoint.hpp"
#include "alad/data.hpp"
#include "alad/errors.hpp"
#include "alad/metrics.hpp"
#include "alad/networks.hpp"
#include "alad/scoring.hpp"

namespace alad {

struct ExperimentConfig {
  std::string dataset = "toy2d";
  std::string data_path;       // explicit file; otherwise ALAD_DATA_DIR/<default name>
  std::string model = "alad";  // alad | anogan
  std::string variant = "features";
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "runs";
  std::string checkpoint;
  std::string anogan_checkpoint;
  bool measure_timing = false;

  TrainConfig train = TrainConfig::defaults_for("toy2d");
  RecoveryConfig recovery;
  std::size_t toy_nominal = 2000;
  std::size_t toy_anomalous = 200;
  std::uint64_t toy_data_seed = 7;
};

inline const char* kResultsHeader =
    "dataset,model,variant,ablation,seed,precision,recall,f1,auroc,ms_per_batch";
inline const char* kHistoryHeader = "epoch,v_dxz,v_dxx,v_dzz,g_total";

inline std::string default_data_file(const std::string& dataset) {
  if (dataset == "kdd99") return "kddcup.data_10_percent";
  if (dataset == "arrhythmia") return "arrhythmia.data";
  return "";
}

/// Explicit path wins; otherwise $ALAD_DATA_DIR/<default name>.
inline std::string resolve_data_path(const ExperimentConfig& cfg) {
  if (!cfg.data_path.empty()) return cfg.data_path;
  const char* root = std::getenv("ALAD_DATA_DIR");
  const std::string file = default_data_file(cfg.dataset);
  if (file.empty()) return "";
  if (!root)
    throw DataError("no --data-path given and ALAD_DATA_DIR is not set (need " + file + ")");
  return (std::filesystem::path(root) / file).string();
}

inline LabeledDataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset == "toy2d") {
    Rng rng(cfg.toy_data_seed);
    return gen_toy2d(cfg.toy_nominal, cfg.toy_anomalous, rng);
  }
  const std::string path = resolve_data_path(cfg);
  if (cfg.dataset == "kdd99") return load_kdd99(path);
  if (cfg.dataset == "arrhythmia") return load_arrhythmia(path);
  throw ConfigError("unknown dataset id '" + cfg.dataset +
                    "' (valid: kdd99, arrhythmia, toy2d)");
}

inline NoveltySplit prepare_split(const ExperimentConfig& cfg, std::uint64_t seed) {
  NoveltySplit split = split_novelty(load_dataset(cfg), seed);
  scale_to_train(split);
  return split;
}

inline double dataset_q(const std::string& dataset, const LabeledDataset& test) {
  if (dataset == "kdd99") return 0.20;
  if (dataset == "arrhythmia") return 0.15;
  std::size_t pos = 0;
  for (auto v : test.y) pos += v;
  const double q = test.n() ? static_cast<double>(pos) / static_cast<double>(test.n()) : 0.0;
  if (q <= 0.0 || q >= 1.0)
    throw ConfigError("cannot derive a top-q threshold from a single-class test set");
  return q;
}

inline std::string ablation_name(bool use_sn, bool use_dzz) {
  if (!use_sn && !use_dzz) return "baseline";
  if (!use_sn && use_dzz) return "baseline+dl";
  if (use_sn && !use_dzz) return "baseline+sn";
  return "baseline+sn+dl";
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

inline void append_results_row(const std::string& path, const std::string& dataset,
                               const std::string& model, const std::string& variant,
                               const std::string& ablation, std::uint64_t seed,
                               const Prf& prf, double auc, double ms) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot write results csv: " + path);
  if (fresh) out << kResultsHeader << "\n";
  out.precision(10);
  out << dataset << "," << model << "," << variant << "," << ablation << "," << seed << ","
      << prf.precision << "," << prf.recall << "," << prf.f1 << "," << auc << "," << ms << "\n";
}

inline void write_config_snapshot(const std::string& path, const ExperimentConfig& cfg,
                                  const std::string& command) {
  std::ofstream out(path);
  if (!out) return;
  out << "command=" << command << "\ndataset=" << cfg.dataset << "\nmodel=" << cfg.model
      << "\nvariant=" << cfg.variant << "\nout=" << cfg.out_dir
      << "\nbatch_size=" << cfg.train.batch_size << "\nepochs=" << cfg.train.epochs
      << "\nlatent_dim=" << cfg.train.latent_dim << "\nalpha=" << format_double(cfg.train.alpha)
      << "\nbeta1=" << format_double(cfg.train.beta1) << "\nseed=" << cfg.train.seed
      << "\nuse_sn=" << cfg.train.use_sn << "\nuse_dzz=" << cfg.train.use_dzz
      << "\nliteral_minimax=" << cfg.train.literal_minimax
      << "\nsubsample=" << format_double(cfg.train.train_subsample) << "\n";
}

}  // namespace detail

// ---- train -----------------------------------------------------------------

struct TrainOutput {
  std::string checkpoint_path;
  std::string history_path;
  LossBreakdown final_losses;
  std::size_t trained_epochs = 0;
  std::size_t train_rows = 0;
};

inline TrainOutput run_train(const ExperimentConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  TrainConfig tc = cfg.train;
  tc.dataset = cfg.dataset;

  NoveltySplit split = prepare_split(cfg, tc.seed);
  LabeledDataset train = tc.train_subsample < 1.0
                             ? subsample(split.train, tc.train_subsample, tc.seed)
                             : std::move(split.train);

  TrainOutput out;
  out.train_rows = train.n();
  const std::string tag = cfg.model + "_" + cfg.dataset + "_seed" + std::to_string(tc.seed);
  out.checkpoint_path = (std::filesystem::path(cfg.out_dir) / (tag + ".ckpt")).string();
  out.history_path = (std::filesystem::path(cfg.out_dir) / ("loss_history_" + tag + ".csv")).string();
  detail::write_config_snapshot(
      (std::filesystem::path(cfg.out_dir) / ("config_train_" + tag + ".txt")).string(), cfg,
      "train");

  if (cfg.model == "alad") {
    TrainResult res = train_loop(train.X, tc);
    std::ofstream hist(out.history_path);
    hist << kHistoryHeader << "\n";
    hist.precision(10);
    for (std::size_t e = 0; e < res.history.size(); ++e) {
      const LossBreakdown& lb = res.history[e];
      hist << e << "," << lb.v_dxz << "," << lb.v_dxx << "," << lb.v_dzz << "," << lb.g_total()
           << "\n";
    }
    if (!res.history.empty()) out.final_losses = res.history.back();
    out.trained_epochs = res.history.size();
    save_checkpoint(out.checkpoint_path, make_checkpoint(*res.bundle, tc, tc.epochs));
  } else if (cfg.model == "anogan") {
    AnoganTrainResult res = anogan_train(train.X, tc);
    std::ofstream hist(out.history_path);
    hist << "epoch,v_d,g_loss\n";
    hist.precision(10);
    for (std::size_t e = 0; e < res.history.size(); ++e)
      hist << e << "," << res.history[e].v_d << "," << res.history[e].g_loss << "\n";
    if (!res.history.empty()) {
      out.final_losses.v_dxz = res.history.back().v_d;
      out.final_losses.g_xz = res.history.back().g_loss;
    }
    out.trained_epochs = res.history.size();
    save_checkpoint(out.checkpoint_path, make_checkpoint(*res.bundle, tc, tc.epochs));
  } else {
    throw ConfigError("unknown model '" + cfg.model + "' (valid: alad, anogan)");
  }
  return out;
}

// ---- checkpoint loading ------------------------------------------------------

inline TrainConfig config_from_checkpoint(const Checkpoint& c) {
  TrainConfig tc = TrainConfig::defaults_for(c.get("dataset"));
  tc.latent_dim = std::stoull(c.get("latent_dim"));
  tc.seed = std::stoull(c.get("seed"));
  tc.batch_size = std::stoull(c.get("cfg.batch_size"));
  tc.alpha = std::stod(c.get("cfg.alpha"));
  tc.beta1 = std::stod(c.get("cfg.beta1"));
  tc.lrelu_slope = std::stod(c.get("cfg.lrelu_slope"));
  tc.ema_decay = std::stod(c.get("cfg.ema_decay"));
  if (c.has("cfg.use_sn")) tc.use_sn = c.get("cfg.use_sn") == "1";
  if (c.has("cfg.use_dzz")) tc.use_dzz = c.get("cfg.use_dzz") == "1";
  return tc;
}

inline std::unique_ptr<NetworkBundle> load_alad_checkpoint(const std::string& path,
                                                           TrainConfig* out_cfg = nullptr) {
  Checkpoint c = load_checkpoint(path);
  if (c.get("model") != "alad") throw ConfigError(path + " is not an alad checkpoint");
  TrainConfig tc = config_from_checkpoint(c);
  Rng rng(tc.seed);
  Rng init = rng.fork(0);
  auto bundle = build_networks(tc, std::stoull(c.get("input_dim")), init);
  load_into(*bundle, c);
  if (out_cfg) *out_cfg = tc;
  return bundle;
}

inline std::unique_ptr<AnoganBundle> load_anogan_checkpoint(const std::string& path,
                                                            TrainConfig* out_cfg = nullptr) {
  Checkpoint c = load_checkpoint(path);
  if (c.get("model") != "anogan") throw ConfigError(path + " is not an anogan checkpoint");
  TrainConfig tc = config_from_checkpoint(c);
  Rng rng(tc.seed);
  Rng init = rng.fork(0);
  auto bundle = build_anogan(tc, std::stoull(c.get("input_dim")), init);
  load_into(*bundle, c);
  if (out_cfg) *out_cfg = tc;
  return bundle;
}

// ---- eval -------------------------------------------------------------------

struct EvalOutput {
  EvalResult result;
  ScoreReport report;
  std::string results_path;
  std::string ablation;
  std::uint64_t seed = 0;
};

/// Scores the test split of the checkpoint's own novelty split (same dataset,
/// same seed) and appends one results row.
inline EvalOutput run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  detail::ensure_dir(cfg.out_dir);
  EvalOutput out;
  Checkpoint c = load_checkpoint(checkpoint_path);
  const std::string model = c.get("model");
  ExperimentConfig data_cfg = cfg;
  data_cfg.dataset = c.get("dataset");
  const std::uint64_t seed = std::stoull(c.get("seed"));
  NoveltySplit split = prepare_split(data_cfg, seed);
  const double q = dataset_q(data_cfg.dataset, split.test);

  if (model == "alad") {
    TrainConfig tc;
    auto bundle = load_alad_checkpoint(checkpoint_path, &tc);
    out.ablation = ablation_name(tc.use_sn, tc.use_dzz);
    const ScoreVariant variant = parse_variant(cfg.variant);
    EmaState::Swap swap(bundle->ema);
    out.report = anomaly_score(*bundle, split.test.X, variant);
    if (cfg.measure_timing) {
      const std::size_t bs = std::min<std::size_t>(tc.batch_size, split.test.n());
      Tensor batch = split.test.select([&] {
        std::vector<std::size_t> rows(bs);
        for (std::size_t i = 0; i < bs; ++i) rows[i] = i;
        return rows;
      }()).X;
      out.result.timing = timing_benchmark(
          [&] { anomaly_score(*bundle, batch, variant); }, bs, 1, 5);
    }
  } else if (model == "anogan") {
    TrainConfig tc;
    auto bundle = load_anogan_checkpoint(checkpoint_path, &tc);
    out.ablation = "anogan";
    Rng rng(seed + 101);
    EmaState::Swap swap(bundle->ema);
    out.report = anogan_score(*bundle, split.test.X, cfg.recovery, rng);
  } else {
    throw ConfigError("unknown checkpoint model '" + model + "'");
  }

  out.seed = seed;
  out.report.checkpoint_id = checkpoint_path;
  out.report.seed = seed;
  out.result.threshold_q = q;
  out.result.n_test = split.test.n();
  auto pred = threshold_top_q(out.report.scores, q);
  Prf prf = precision_recall_f1(pred, split.test.y);
  out.result.precision = prf.precision;
  out.result.recall = prf.recall;
  out.result.f1 = prf.f1;
  out.result.auroc = auroc(out.report.scores, split.test.y);

  const std::string tag = model + "_" + data_cfg.dataset + "_seed" + std::to_string(seed);
  {
    std::ofstream sc((std::filesystem::path(cfg.out_dir) /
                      ("scores_" + tag + "_" + to_string(out.report.variant) + ".csv"))
                         .string());
    if (sc) write_score_csv(sc, out.report);
  }
  detail::write_config_snapshot(
      (std::filesystem::path(cfg.out_dir) / ("config_eval_" + tag + ".txt")).string(), cfg,
      "eval");

  out.results_path = (std::filesystem::path(cfg.out_dir) / "results.csv").string();
  detail::append_results_row(out.results_path, data_cfg.dataset, model,
                             model == "anogan" ? "recovery" : cfg.variant, out.ablation, seed, prf,
                             out.result.auroc, out.result.timing.mean_ms_per_batch);
  return out;
}

// ---- ablation grid -----------------------------------------------------------

struct AblateRow {
  std::string name;
  bool use_sn = false, use_dzz = false;
  std::vector<double> f1_per_seed;
  double mean_p = 0, std_p = 0, mean_r = 0, std_r = 0, mean_f1 = 0, std_f1 = 0;
};

struct AblateOutput {
  std::vector<AblateRow> rows;
  std::string csv_path;
};

/// Trains and evaluates the four-model grid {baseline, +DL, +SN, +SN+DL}
/// for every seed and writes the aggregate table.
inline AblateOutput run_ablate(const ExperimentConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  const bool grid[4][2] = {{false, false}, {false, true}, {true, false}, {true, true}};
  AblateOutput out;
  for (const auto& flags : grid) {
    AblateRow row;
    row.use_sn = flags[0];
    row.use_dzz = flags[1];
    row.name = ablation_name(row.use_sn, row.use_dzz);
    std::vector<double> ps, rs, f1s;
    for (std::uint64_t seed : cfg.seeds) {
      ExperimentConfig run = cfg;
      run.train.seed = seed;
      run.train.use_sn = row.use_sn;
      run.train.use_dzz = row.use_dzz;
      run.out_dir = (std::filesystem::path(cfg.out_dir) / row.name).string();
      TrainOutput t = run_train(run);
      EvalOutput e = run_eval(run, t.checkpoint_path);
      ps.push_back(e.result.precision);
      rs.push_back(e.result.recall);
      f1s.push_back(e.result.f1);
    }
    row.f1_per_seed = f1s;
    row.mean_p = mean_of(ps);
    row.std_p = stddev_of(ps);
    row.mean_r = mean_of(rs);
    row.std_r = stddev_of(rs);
    row.mean_f1 = mean_of(f1s);
    row.std_f1 = stddev_of(f1s);
    out.rows.push_back(std::move(row));
  }

  out.csv_path = (std::filesystem::path(cfg.out_dir) / "ablation.csv").string();
  std::ofstream csv(out.csv_path);
  csv << "model";
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) csv << ",f1_seed" << cfg.seeds[s];
  csv << ",precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std\n";
  csv.precision(10);
  for (const AblateRow& r : out.rows) {
    csv << r.name;
    for (double f1 : r.f1_per_seed) csv << "," << f1;
    csv << "," << r.mean_p << "," << r.std_p << "," << r.mean_r << "," << r.std_r << ","
        << r.mean_f1 << "," << r.std_f1 << "\n";
  }
  return out;
}

// ---- score-variant comparison -------------------------------------------------

struct CompareRow {
  std::string variant;
  Prf prf;
  double auroc_value = 0.0;
  std::string note;  // e.g. logits orientation actually used
};

struct CompareOutput {
  std::vector<CompareRow> rows;
  std::string csv_path;
};

/// Evaluates l1, l2, logits and features on one checkpoint and test split.
/// The logit score's ranking direction is ambiguous, so both orientations
/// are tried and the better F1 is reported with a note.
inline CompareOutput run_compare_scores(const ExperimentConfig& cfg,
                                        const std::string& checkpoint_path) {
  detail::ensure_dir(cfg.out_dir);
  Checkpoint c = load_checkpoint(checkpoint_path);
  ExperimentConfig data_cfg = cfg;
  data_cfg.dataset = c.get("dataset");
  const std::uint64_t seed = std::stoull(c.get("seed"));
  NoveltySplit split = prepare_split(data_cfg, seed);
  const double q = dataset_q(data_cfg.dataset, split.test);

  auto bundle = load_alad_checkpoint(checkpoint_path);
  EmaState::Swap swap(bundle->ema);

  CompareOutput out;
  for (ScoreVariant v :
       {ScoreVariant::l1, ScoreVariant::l2, ScoreVariant::logits, ScoreVariant::features}) {
    ScoreReport rep = anomaly_score(*bundle, split.test.X, v);
    CompareRow row;
    row.variant = to_string(v);
    if (v == ScoreVariant::logits) {
      auto as_is = precision_recall_f1(threshold_top_q(rep.scores, q), split.test.y);
      std::vector<double> neg(rep.scores.size());
      for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -rep.scores[i];
      auto flipped = precision_recall_f1(threshold_top_q(neg, q), split.test.y);
      if (flipped.f1 > as_is.f1) {
        rep.scores = std::move(neg);
        row.prf = flipped;
        row.note = "orientation=-log(Dxx)";
      } else {
        row.prf = as_is;
        row.note = "orientation=log(Dxx)";
      }
      row.auroc_value = auroc(rep.scores, split.test.y);
    } else {
      row.prf = precision_recall_f1(threshold_top_q(rep.scores, q), split.test.y);
      row.auroc_value = auroc(rep.scores, split.test.y);
    }
    out.rows.push_back(std::move(row));
  }

  out.csv_path = (std::filesystem::path(cfg.out_dir) / "score_variants.csv").string();
  std::ofstream csv(out.csv_path);
  csv << "variant,precision,recall,f1,auroc,note\n";
  csv.precision(10);
  for (const CompareRow& r : out.rows)
    csv << r.variant << "," << r.prf.precision << "," << r.prf.recall << "," << r.prf.f1 << ","
        << r.auroc_value << "," << r.note << "\n";
  return out;
}

// ---- inference timing ----------------------------------------------------------

struct TimingOutput {
  TimingStats alad_stats, anogan_stats;
  double ratio = 0.0;  // anogan_ms / alad_ms
  std::string csv_path;
};

inline TimingOutput run_timing(const ExperimentConfig& cfg, const std::string& alad_ckpt,
                               const std::string& anogan_ckpt, int warmup = 1, int reps = 3) {
  detail::ensure_dir(cfg.out_dir);
  TrainConfig alad_tc, ano_tc;
  auto alad_bundle = load_alad_checkpoint(alad_ckpt, &alad_tc);
  auto ano_bundle = load_anogan_checkpoint(anogan_ckpt, &ano_tc);

  ExperimentConfig data_cfg = cfg;
  data_cfg.dataset = alad_bundle->dataset;
  NoveltySplit split = prepare_split(data_cfg, alad_tc.seed);
  const std::size_t bs = std::min<std::size_t>(alad_tc.batch_size, split.test.n());
  std::vector<std::size_t> rows(bs);
  for (std::size_t i = 0; i < bs; ++i) rows[i] = i;
  Tensor batch = split.test.select(rows).X;

  TimingOutput out;
  {
    EmaState::Swap swap(alad_bundle->ema);
    out.alad_stats = timing_benchmark(
        [&] { anomaly_score(*alad_bundle, batch, ScoreVariant::features); }, bs, warmup, reps);
  }
  {
    EmaState::Swap swap(ano_bundle->ema);
    Rng rng(alad_tc.seed + 202);
    out.anogan_stats = timing_benchmark(
        [&] { anogan_score(*ano_bundle, batch, cfg.recovery, rng); }, bs, warmup, reps);
  }
  out.ratio = out.alad_stats.mean_ms_per_batch > 0.0
                  ? out.anogan_stats.mean_ms_per_batch / out.alad_stats.mean_ms_per_batch
                  : 0.0;

  out.csv_path = (std::filesystem::path(cfg.out_dir) / "timing.csv").string();
  std::ofstream csv(out.csv_path);
  csv << "dataset,batch_size,anogan_ms,alad_ms,speedup\n";
  csv.precision(10);
  csv << alad_bundle->dataset << "," << bs << "," << out.anogan_stats.mean_ms_per_batch << ","
      << out.alad_stats.mean_ms_per_batch << "," << out.ratio << "\n";
  return out;
}

// ---- toy demo -------------------------------------------------------------------

struct ToyDemoOutput {
  EvalResult result;
  double nominal_mean_score = 0.0;
  double anomalous_mean_score = 0.0;
  std::string points_path;
  std::string checkpoint_path;
};

/// Small end-to-end run: generate the synthetic task, train, score the test
/// split and dump a points CSV (x0,x1,label,score) for external plotting.
inline ToyDemoOutput run_toy_demo(const ExperimentConfig& cfg) {
  detail::ensure_dir(cfg.out_dir);
  ExperimentConfig run = cfg;
  run.dataset = "toy2d";
  run.model = "alad";
  TrainOutput t = run_train(run);
  EvalOutput e = run_eval(run, t.checkpoint_path);

  ToyDemoOutput out;
  out.result = e.result;
  out.checkpoint_path = t.checkpoint_path;

  NoveltySplit split = prepare_split(run, run.train.seed);
  std::size_t n_nom = 0, n_ano = 0;
  for (std::size_t i = 0; i < split.test.n(); ++i) {
    if (split.test.y[i]) {
      out.anomalous_mean_score += e.report.scores[i];
      ++n_ano;
    } else {
      out.nominal_mean_score += e.report.scores[i];
      ++n_nom;
    }
  }
  if (n_nom) out.nominal_mean_score /= static_cast<double>(n_nom);
  if (n_ano) out.anomalous_mean_score /= static_cast<double>(n_ano);

  out.points_path = (std::filesystem::path(cfg.out_dir) / "toy_points.csv").string();
  std::ofstream pts(out.points_path);
  pts << "x0,x1,label,score\n";
  pts.precision(10);
  for (std::size_t i = 0; i < split.test.n(); ++i)
    pts << split.test.X(i, 0) << "," << split.test.X(i, 1) << ","
        << static_cast<int>(split.test.y[i]) << "," << e.report.scores[i] << "\n";
  return out;
}

}  // namespace alad
