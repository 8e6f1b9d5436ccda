#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "alad/errors.hpp"
#include "alad/graph.hpp"
#include "alad/layers.hpp"
#include "alad/networks.hpp"
#include "alad/optim.hpp"
#include "alad/scoring.hpp"

namespace alad {

// Standard-GAN baseline. Scoring requires recovering a latent code per test
// sample by gradient descent, which is what makes it slow next to the
// encoder-based model.
struct AnoganBundle {
  std::string dataset;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;

  Mlp G, D;
  int d_feature_tap = -1;  // pre-logit feature layer of D
  EmaState ema;

  AnoganBundle() = default;
  AnoganBundle(const AnoganBundle&) = delete;
  AnoganBundle& operator=(const AnoganBundle&) = delete;
  AnoganBundle(AnoganBundle&&) = delete;
  AnoganBundle& operator=(AnoganBundle&&) = delete;

  Var generate(Graph& g, Var z, const FwdCtx& ctx) { return G.forward(g, z, ctx); }

  struct DOut {
    Var logit;
    Var features;
  };
  DOut discriminate(Graph& g, Var x, const FwdCtx& ctx) {
    auto [logit, feat] = D.forward_tap(g, x, ctx, d_feature_tap);
    return {logit, feat};
  }

  std::vector<Param*> g_params() { return G.params(); }
  std::vector<Param*> d_params() { return D.params(); }
  std::vector<Param*> all_params() {
    auto out = G.params();
    for (Param* p : D.params()) out.push_back(p);
    return out;
  }
  std::vector<std::pair<std::string, Tensor*>> buffers() {
    auto out = G.buffers();
    for (auto& b : D.buffers()) out.push_back(std::move(b));
    return out;
  }

  std::string fingerprint_text() const {
    return "anogan|" + dataset + "|in" + std::to_string(input_dim) + "|z" +
           std::to_string(latent_dim) + "|" + G.describe() + "|" + D.describe();
  }
};

inline std::unique_ptr<AnoganBundle> build_anogan(const TrainConfig& cfg, std::size_t input_dim,
                                                  Rng& rng) {
  const double sl = cfg.lrelu_slope;
  std::vector<LayerSpec> gspec, dspec;
  int tap = -1;
  if (cfg.dataset == "kdd99" || cfg.dataset == "custom") {
    gspec = {LayerSpec::Dense(64), LayerSpec::Relu(), LayerSpec::Dense(128), LayerSpec::Relu(),
             LayerSpec::Dense(input_dim)};
    dspec = {LayerSpec::Dense(256), LayerSpec::LRelu(sl), LayerSpec::Dropout(0.2),
             LayerSpec::Dense(128), LayerSpec::LRelu(sl), LayerSpec::Dropout(0.2),
             LayerSpec::Dense(128), LayerSpec::LRelu(sl), LayerSpec::Dropout(0.2),
             LayerSpec::Dense(1)};
    tap = 7;  // post-activation of the last 128-unit layer
  } else if (cfg.dataset == "arrhythmia") {
    gspec = {LayerSpec::Dense(128), LayerSpec::Relu(), LayerSpec::Dense(256), LayerSpec::Relu(),
             LayerSpec::Dense(input_dim)};
    dspec = {LayerSpec::Dense(256), LayerSpec::LRelu(sl), LayerSpec::Dropout(0.2),
             LayerSpec::Dense(128), LayerSpec::LRelu(sl), LayerSpec::Dropout(0.5),
             LayerSpec::Dense(1)};
    tap = 4;
  } else if (cfg.dataset == "toy2d") {
    gspec = {LayerSpec::Dense(32), LayerSpec::Relu(), LayerSpec::Dense(32), LayerSpec::Relu(),
             LayerSpec::Dense(input_dim)};
    dspec = {LayerSpec::Dense(32), LayerSpec::LRelu(sl), LayerSpec::Dropout(0.2),
             LayerSpec::Dense(1)};
    tap = 1;
  } else {
    throw ConfigError("unknown dataset id '" + cfg.dataset +
                      "' (valid: kdd99, arrhythmia, toy2d, custom)");
  }
  auto b = std::make_unique<AnoganBundle>();
  b->dataset = cfg.dataset;
  b->input_dim = input_dim;
  b->latent_dim = cfg.latent_dim;
  b->G = Mlp("G", cfg.latent_dim, gspec, rng);
  b->D = Mlp("D", input_dim, dspec, rng);
  b->d_feature_tap = tap;
  b->ema = EmaState(b->all_params(), cfg.ema_decay);
  return b;
}

struct AnoganStepLosses {
  double v_d = 0.0, g_loss = 0.0;
};

inline AnoganStepLosses anogan_train_step(AnoganBundle& b, Adam& adam_d, Adam& adam_g,
                                          const Tensor& x_batch, Rng& rng) {
  if (b.ema.swapped()) throw UsageError("training step attempted under ema swap");
  AnoganStepLosses out;
  {
    Tensor z = sample_latent(x_batch.rows(), b.latent_dim, rng);
    Graph g;
    const FwdCtx frozen{true, false, &rng};
    const FwdCtx dtrain{true, true, &rng};
    Var gz = b.generate(g, g.input(z), frozen);
    Var v_d = g.add(loss_real(g, b.discriminate(g, g.input(x_batch), dtrain).logit),
                    loss_fake(g, b.discriminate(g, gz, dtrain).logit));
    out.v_d = g.scalar_value(v_d);
    if (!std::isfinite(out.v_d)) throw NumericError("non-finite anogan discriminator loss");
    adam_d.zero_grad();
    g.backward(v_d);
    adam_d.step();
  }
  {
    Tensor z = sample_latent(x_batch.rows(), b.latent_dim, rng);
    Graph g;
    const FwdCtx gtrain{true, true, &rng};
    const FwdCtx dfrozen{true, false, &rng};
    Var gz = b.generate(g, g.input(z), gtrain);
    Var gl = loss_real(g, b.discriminate(g, gz, dfrozen).logit);  // non-saturating
    out.g_loss = g.scalar_value(gl);
    if (!std::isfinite(out.g_loss)) throw NumericError("non-finite anogan generator loss");
    adam_g.zero_grad();
    g.backward(gl);
    adam_g.step();
  }
  b.ema.update();
  return out;
}

struct AnoganTrainResult {
  std::unique_ptr<AnoganBundle> bundle;
  std::vector<AnoganStepLosses> history;  // per-epoch means
};

inline AnoganTrainResult anogan_train(const Tensor& train_x, const TrainConfig& cfg) {
  if (train_x.size() == 0 || train_x.rows() == 0) throw ConfigError("anogan_train: empty dataset");
  const std::size_t n = train_x.rows(), d = train_x.cols();
  if (n < cfg.batch_size && cfg.epochs > 0)
    throw ConfigError("anogan_train: dataset smaller than one batch");

  Rng master(cfg.seed);
  Rng init_rng = master.fork(0);
  Rng step_rng = master.fork(1);

  AnoganTrainResult res;
  res.bundle = build_anogan(cfg, d, init_rng);
  Adam adam_d(res.bundle->d_params(), cfg.adam());
  Adam adam_g(res.bundle->g_params(), cfg.adam());

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Tensor batch({cfg.batch_size, d});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = master.fork(1000 + epoch);
    shuffle_rng.shuffle(idx);
    AnoganStepLosses sum;
    std::size_t steps = 0;
    for (std::size_t off = 0; off + cfg.batch_size <= n; off += cfg.batch_size) {
      for (std::size_t r = 0; r < cfg.batch_size; ++r)
        for (std::size_t c = 0; c < d; ++c) batch(r, c) = train_x(idx[off + r], c);
      AnoganStepLosses l = anogan_train_step(*res.bundle, adam_d, adam_g, batch, step_rng);
      sum.v_d += l.v_d;
      sum.g_loss += l.g_loss;
      ++steps;
    }
    if (steps > 0) {
      sum.v_d /= static_cast<double>(steps);
      sum.g_loss /= static_cast<double>(steps);
    }
    res.history.push_back(sum);
  }
  return res;
}

struct RecoveryConfig {
  int n_steps = 500;
  double step_size = 0.01;
  double lambda_mix = 0.1;  // weight of the feature term
  int restarts = 1;
};

namespace detail {

struct RecoveryEval {
  double total;                    // summed over the batch
  std::vector<double> per_sample;  // (1-lambda)*|x - G(z)|_1 + lambda*|f(x) - f(G(z))|_1 per row
};

/// Builds the recovery loss on g; z enters as a trainable leaf so backward
/// leaves d total / dz in zp.grad.
inline Var recovery_loss(Graph& g, AnoganBundle& b, Param& zp, const Tensor& x,
                         const Tensor& fx, double lambda, RecoveryEval* eval) {
  const FwdCtx infer{false, false, nullptr};
  Var zv = g.param(zp);
  Var gz = b.generate(g, zv, infer);
  Var resid = g.abs_val(g.sub(g.input(x), gz));
  Var fgz = b.discriminate(g, gz, infer).features;
  Var fresid = g.abs_val(g.sub(g.input(fx), fgz));
  Var total = g.add(g.scale(g.sum_all(resid), 1.0 - lambda), g.scale(g.sum_all(fresid), lambda));
  if (eval) {
    eval->total = g.scalar_value(total);
    const Tensor& R = g.value(resid);
    const Tensor& F = g.value(fresid);
    eval->per_sample.assign(x.rows(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double sr = 0.0, sf = 0.0;
      for (std::size_t c = 0; c < R.cols(); ++c) sr += R(r, c);
      for (std::size_t c = 0; c < F.cols(); ++c) sf += F(r, c);
      eval->per_sample[r] = (1.0 - lambda) * sr + lambda * sf;
    }
  }
  return total;
}

}  // namespace detail

struct RecoveryResult {
  Tensor z;                        // best latent codes, one row per sample
  std::vector<double> per_sample;  // loss at the recovered codes
};

/// Gradient-descent inversion of the generator: per restart, initialize
/// z ~ N(0, I) (or at `init`), take n_steps of plain gradient descent on
/// L(z) = (1-lambda)*|x - G(z)|_1 + lambda*|f_D(x) - f_D(G(z))|_1,
/// then keep the best code per sample across restarts.
inline RecoveryResult latent_recovery(AnoganBundle& b, const Tensor& x, const RecoveryConfig& cfg,
                                      Rng& rng, const Tensor* init = nullptr) {
  if (!b.ema.swapped()) throw UsageError("latent recovery requires an active ema swap");
  if (cfg.n_steps < 0) throw ArgumentError("latent_recovery: n_steps must be >= 0");
  if (cfg.restarts < 1) throw ArgumentError("latent_recovery: restarts must be >= 1");
  if (x.rank() != 2 || x.cols() != b.input_dim) throw ShapeError("latent_recovery: input shape");
  const std::size_t n = x.rows();

  Tensor fx;
  {
    Graph g;
    const FwdCtx infer{false, false, nullptr};
    fx = g.value(b.discriminate(g, g.input(x), infer).features);
  }

  RecoveryResult best;
  best.z = Tensor({n, b.latent_dim});
  best.per_sample.assign(n, std::numeric_limits<double>::infinity());

  int failed = 0;
  for (int r = 0; r < cfg.restarts; ++r) {
    Param zp("z", init && r == 0 ? *init : sample_latent(n, b.latent_dim, rng));
    bool ok = true;
    for (int step = 0; step < cfg.n_steps; ++step) {
      Graph g;
      zp.zero_grad();
      detail::RecoveryEval ev;
      Var total = detail::recovery_loss(g, b, zp, x, fx, cfg.lambda_mix, &ev);
      if (!std::isfinite(ev.total)) {
        ok = false;
        break;
      }
      g.backward(total);
      for (std::size_t i = 0; i < zp.value.size(); ++i)
        zp.value[i] -= cfg.step_size * zp.grad[i];
    }
    if (!ok) {
      ++failed;
      continue;
    }
    Graph g;
    detail::RecoveryEval ev;
    detail::recovery_loss(g, b, zp, x, fx, cfg.lambda_mix, &ev);
    if (!std::isfinite(ev.total)) {
      ++failed;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (ev.per_sample[i] < best.per_sample[i]) {
        best.per_sample[i] = ev.per_sample[i];
        for (std::size_t c = 0; c < b.latent_dim; ++c) best.z(i, c) = zp.value(i, c);
      }
    }
  }
  if (failed == cfg.restarts)
    throw NumericError("latent_recovery: all " + std::to_string(cfg.restarts) +
                       " restarts produced non-finite losses");
  return best;
}

/// A(x) = L(z*) at the recovered code; higher = more anomalous.
inline ScoreReport anogan_score(AnoganBundle& b, const Tensor& x, const RecoveryConfig& cfg,
                                Rng& rng) {
  RecoveryResult rec = latent_recovery(b, x, cfg, rng);
  ScoreReport rep;
  rep.variant = ScoreVariant::l1;  // reconstruction-flavored; provenance set by caller
  rep.sample_ids.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) rep.sample_ids[i] = i;
  rep.scores = std::move(rec.per_sample);
  return rep;
}

}  // namespace alad
