#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "alad/errors.hpp"
#include "alad/graph.hpp"
#include "alad/layers.hpp"
#include "alad/optim.hpp"
#include "alad/rng.hpp"
#include "alad/tensor.hpp"

namespace alad {

struct TrainConfig {
  std::string dataset = "toy2d";
  std::size_t batch_size = 50;
  std::size_t epochs = 200;
  std::size_t latent_dim = 2;
  double alpha = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lrelu_slope = 0.2;
  double ema_decay = 0.999;
  std::uint64_t seed = 1;
  bool use_sn = true;
  bool use_dzz = true;
  bool literal_minimax = false;
  int sn_power_iters = 1;
  double train_subsample = 1.0;  // fraction of the training split actually used

  AdamConfig adam() const { return {alpha, beta1, beta2, adam_eps}; }

  static TrainConfig defaults_for(const std::string& dataset) {
    TrainConfig c;
    c.dataset = dataset;
    if (dataset == "kdd99") {
      c.batch_size = 50;
      c.latent_dim = 32;
      c.epochs = 100;
      c.alpha = 1e-5;
    } else if (dataset == "arrhythmia") {
      c.batch_size = 32;
      c.latent_dim = 64;
      c.epochs = 1000;
      c.alpha = 1e-5;
    } else if (dataset == "toy2d") {
      c.batch_size = 50;
      c.latent_dim = 2;
      c.epochs = 200;
      c.alpha = 1e-3;
    } else if (dataset == "custom") {
      c.batch_size = 50;
      c.latent_dim = 32;
      c.epochs = 100;
      c.alpha = 1e-5;
    } else {
      throw ConfigError("unknown dataset id '" + dataset +
                        "' (valid: kdd99, arrhythmia, toy2d, custom)");
    }
    return c;
  }
};

struct LossBreakdown {
  double v_dxz = 0.0, v_dxx = 0.0, v_dzz = 0.0;  // discriminator-side values
  double g_xz = 0.0, g_xx = 0.0, g_zz = 0.0;     // generator/encoder-side values

  double d_total() const { return v_dxz + v_dxx + v_dzz; }
  double g_total() const { return g_xz + g_xx + g_zz; }
  bool finite() const {
    return std::isfinite(v_dxz) && std::isfinite(v_dxx) && std::isfinite(v_dzz) &&
           std::isfinite(g_xz) && std::isfinite(g_xx) && std::isfinite(g_zz);
  }
};

// -E[log sigmoid(l)] as mean softplus(-l); the "labeled real" half of a
// sigmoid cross-entropy computed from logits.
inline Var loss_real(Graph& g, Var logits) { return g.mean_all(g.softplus(g.neg(logits))); }

/// -E[log(1 - sigmoid(l))] as mean softplus(l).
inline Var loss_fake(Graph& g, Var logits) { return g.mean_all(g.softplus(logits)); }

// The five networks: encoder E, generator G, joint discriminator D_xz,
// data-space cycle discriminator D_xx (whose pre-logit feature layer drives
// the anomaly score) and latent cycle discriminator D_zz. Discriminator
// forwards return logits; probabilities exist only inside losses and the
// logit-score variant.
struct NetworkBundle {
  std::string dataset;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  bool use_sn = true;
  bool use_dzz = true;

  Mlp E, G, Dxz_x, Dxz_z, Dxz_joint, Dxx, Dzz;
  int dxx_feature_tap = -1;
  EmaState ema;

  NetworkBundle() = default;
  NetworkBundle(const NetworkBundle&) = delete;
  NetworkBundle& operator=(const NetworkBundle&) = delete;
  NetworkBundle(NetworkBundle&&) = delete;
  NetworkBundle& operator=(NetworkBundle&&) = delete;

  Var encode(Graph& g, Var x, const FwdCtx& ctx) { return E.forward(g, x, ctx); }
  Var generate(Graph& g, Var z, const FwdCtx& ctx) { return G.forward(g, z, ctx); }

  Var dxz_logit(Graph& g, Var x, Var z, const FwdCtx& ctx) {
    Var xb = Dxz_x.forward(g, x, ctx);
    Var zb = Dxz_z.forward(g, z, ctx);
    return Dxz_joint.forward(g, g.concat_cols(xb, zb), ctx);
  }

  struct DxxOut {
    Var logit;
    Var features;
  };
  DxxOut dxx(Graph& g, Var a, Var b, const FwdCtx& ctx) {
    auto [logit, feat] = Dxx.forward_tap(g, g.concat_cols(a, b), ctx, dxx_feature_tap);
    return {logit, feat};
  }

  Var dzz_logit(Graph& g, Var a, Var b, const FwdCtx& ctx) {
    return Dzz.forward(g, g.concat_cols(a, b), ctx);
  }

  std::vector<Param*> eg_params() {
    auto out = E.params();
    for (Param* p : G.params()) out.push_back(p);
    return out;
  }

  std::vector<Param*> disc_params() {
    std::vector<Param*> out;
    for (Mlp* m : {&Dxz_x, &Dxz_z, &Dxz_joint, &Dxx, &Dzz})
      for (Param* p : m->params()) out.push_back(p);
    return out;
  }

  std::vector<Param*> all_params() {
    auto out = eg_params();
    for (Param* p : disc_params()) out.push_back(p);
    return out;
  }

  std::vector<std::pair<std::string, Tensor*>> buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (Mlp* m : {&E, &G, &Dxz_x, &Dxz_z, &Dxz_joint, &Dxx, &Dzz})
      for (auto& b : m->buffers()) out.push_back(std::move(b));
    return out;
  }

  void power_iterate(int n_iters) {
    for (Mlp* m : {&E, &Dxz_x, &Dxz_z, &Dxz_joint, &Dxx, &Dzz}) m->power_iterate(n_iters);
  }

  std::string fingerprint_text() const {
    std::string s = "alad|" + dataset + "|in" + std::to_string(input_dim) + "|z" +
                    std::to_string(latent_dim) + "|sn" + (use_sn ? "1" : "0") + "|dzz" +
                    (use_dzz ? "1" : "0");
    for (const Mlp* m : {&E, &G, &Dxz_x, &Dxz_z, &Dxz_joint, &Dxx, &Dzz})
      s += "|" + m->describe();
    return s;
  }
};

namespace detail {

inline std::vector<LayerSpec> dense_block(std::size_t units, bool sn, bool bn, const char* act,
                                          double slope, double drop) {
  std::vector<LayerSpec> rows;
  rows.push_back(LayerSpec::Dense(units, sn));
  if (bn) rows.push_back(LayerSpec::BatchNorm());
  if (std::string(act) == "lrelu") rows.push_back(LayerSpec::LRelu(slope));
  else if (std::string(act) == "relu") rows.push_back(LayerSpec::Relu());
  if (drop > 0.0) rows.push_back(LayerSpec::Dropout(drop));
  return rows;
}

inline void append(std::vector<LayerSpec>& dst, std::vector<LayerSpec> rows) {
  for (auto& r : rows) dst.push_back(r);
}

struct ArchPlan {
  std::vector<LayerSpec> e, g, dxz_x, dxz_z, dxz_joint, dxx, dzz;
  int dxx_tap = -1;
};

// Layer tables per dataset family. Discriminator final rows produce logits;
// the sigmoid lives in the loss. hidden(...) rows are dense+bn?+act+dropout.
inline ArchPlan plan_for(const TrainConfig& cfg, std::size_t input_dim) {
  const double sl = cfg.lrelu_slope;
  const bool sn = cfg.use_sn;
  ArchPlan p;
  auto hid = [&](std::vector<LayerSpec>& dst, std::size_t u, bool snf, bool bn, const char* act,
                 double drop) { append(dst, dense_block(u, snf, bn, act, sl, drop)); };

  if (cfg.dataset == "kdd99" || cfg.dataset == "custom") {
    hid(p.e, 64, sn, false, "lrelu", 0.0);
    p.e.push_back(LayerSpec::Dense(cfg.latent_dim, sn));
    hid(p.g, 64, false, false, "relu", 0.0);
    hid(p.g, 128, false, false, "relu", 0.0);
    p.g.push_back(LayerSpec::Dense(input_dim));
    hid(p.dxz_x, 128, sn, true, "lrelu", 0.0);
    hid(p.dxz_z, 128, sn, false, "lrelu", 0.5);
    hid(p.dxz_joint, 128, sn, false, "lrelu", 0.5);
    p.dxz_joint.push_back(LayerSpec::Dense(1, sn));
    hid(p.dxx, 128, sn, false, "lrelu", 0.2);
    p.dxx.push_back(LayerSpec::Dense(1, sn));
    p.dxx_tap = 1;  // post-activation of the 128-unit layer
    hid(p.dzz, 32, sn, false, "lrelu", 0.2);
    p.dzz.push_back(LayerSpec::Dense(1, sn));
  } else if (cfg.dataset == "arrhythmia") {
    hid(p.e, 256, sn, false, "lrelu", 0.0);
    hid(p.e, 128, sn, false, "lrelu", 0.0);
    p.e.push_back(LayerSpec::Dense(cfg.latent_dim, sn));
    hid(p.g, 128, false, false, "relu", 0.0);
    hid(p.g, 256, false, false, "relu", 0.0);
    p.g.push_back(LayerSpec::Dense(input_dim));
    hid(p.dxz_x, 128, sn, true, "lrelu", 0.0);
    hid(p.dxz_z, 128, sn, false, "lrelu", 0.5);
    hid(p.dxz_joint, 256, sn, false, "lrelu", 0.5);
    p.dxz_joint.push_back(LayerSpec::Dense(1, sn));
    hid(p.dxx, 256, sn, false, "lrelu", 0.2);
    hid(p.dxx, 128, sn, false, "lrelu", 0.2);
    p.dxx.push_back(LayerSpec::Dense(1, sn));
    p.dxx_tap = 4;  // post-activation of the 128-unit layer
    hid(p.dzz, 64, sn, false, "lrelu", 0.2);
    hid(p.dzz, 32, sn, false, "lrelu", 0.2);
    p.dzz.push_back(LayerSpec::Dense(1, sn));
  } else if (cfg.dataset == "toy2d") {
    hid(p.e, 32, sn, false, "lrelu", 0.0);
    p.e.push_back(LayerSpec::Dense(cfg.latent_dim, sn));
    hid(p.g, 32, false, false, "relu", 0.0);
    hid(p.g, 32, false, false, "relu", 0.0);
    p.g.push_back(LayerSpec::Dense(input_dim));
    hid(p.dxz_x, 32, sn, true, "lrelu", 0.0);
    hid(p.dxz_z, 32, sn, false, "lrelu", 0.5);
    hid(p.dxz_joint, 32, sn, false, "lrelu", 0.5);
    p.dxz_joint.push_back(LayerSpec::Dense(1, sn));
    hid(p.dxx, 32, sn, false, "lrelu", 0.2);
    p.dxx.push_back(LayerSpec::Dense(1, sn));
    p.dxx_tap = 1;
    hid(p.dzz, 16, sn, false, "lrelu", 0.2);
    p.dzz.push_back(LayerSpec::Dense(1, sn));
  } else {
    throw ConfigError("unknown dataset id '" + cfg.dataset +
                      "' (valid: kdd99, arrhythmia, toy2d, custom)");
  }
  return p;
}

}  // namespace detail

inline std::unique_ptr<NetworkBundle> build_networks(const TrainConfig& cfg, std::size_t input_dim,
                                                     Rng& rng) {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (cfg.dataset == "kdd99" && input_dim != 121)
    throw ConfigError("kdd99 architecture expects input_dim 121");
  if (cfg.dataset == "arrhythmia" && input_dim != 274)
    throw ConfigError("arrhythmia architecture expects input_dim 274");
  if (cfg.dataset == "toy2d" && input_dim != 2)
    throw ConfigError("toy2d architecture expects input_dim 2");

  detail::ArchPlan plan = detail::plan_for(cfg, input_dim);
  auto b = std::make_unique<NetworkBundle>();
  b->dataset = cfg.dataset;
  b->input_dim = input_dim;
  b->latent_dim = cfg.latent_dim;
  b->use_sn = cfg.use_sn;
  b->use_dzz = cfg.use_dzz;
  b->E = Mlp("E", input_dim, plan.e, rng);
  b->G = Mlp("G", cfg.latent_dim, plan.g, rng);
  b->Dxz_x = Mlp("Dxz.x", input_dim, plan.dxz_x, rng);
  b->Dxz_z = Mlp("Dxz.z", cfg.latent_dim, plan.dxz_z, rng);
  b->Dxz_joint = Mlp("Dxz.joint", b->Dxz_x.out_dim() + b->Dxz_z.out_dim(), plan.dxz_joint, rng);
  b->Dxx = Mlp("Dxx", 2 * input_dim, plan.dxx, rng);
  b->Dzz = Mlp("Dzz", 2 * cfg.latent_dim, plan.dzz, rng);
  b->dxx_feature_tap = plan.dxx_tap;

  if (b->E.out_dim() != cfg.latent_dim || b->G.in_dim() != cfg.latent_dim)
    throw ConfigError("encoder output dim and generator input dim must equal latent_dim");

  // shadows for the networks read at inference: E, G and the feature net Dxx
  auto ema_params = b->eg_params();
  for (Param* p : b->Dxx.params()) ema_params.push_back(p);
  b->ema = EmaState(std::move(ema_params), cfg.ema_decay);
  return b;
}

inline Tensor sample_latent(std::size_t batch, std::size_t latent_dim, Rng& rng) {
  Tensor z({batch, latent_dim});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return z;
}

struct DLosses {
  Var total;
  double v_dxz = 0.0, v_dxx = 0.0, v_dzz = 0.0;
};

/// Discriminator-side values, one sigmoid cross-entropy per discriminator.
/// E and G run frozen so gradients reach discriminator parameters only.
inline DLosses discriminator_losses(Graph& g, NetworkBundle& b, const Tensor& x, const Tensor& z,
                                    Rng& rng, bool training = true, bool use_dropout = true) {
  const FwdCtx frozen{training, false, &rng, use_dropout};
  const FwdCtx dtrain{training, true, &rng, use_dropout};
  Var xin = g.input(x);
  Var zin = g.input(z);

  Var ex = b.encode(g, xin, frozen);
  Var gz = b.generate(g, zin, frozen);
  Var gex = b.generate(g, ex, frozen);

  Var v_xz = g.add(loss_real(g, b.dxz_logit(g, xin, ex, dtrain)),
                   loss_fake(g, b.dxz_logit(g, gz, zin, dtrain)));
  Var v_xx = g.add(loss_real(g, b.dxx(g, xin, xin, dtrain).logit),
                   loss_fake(g, b.dxx(g, xin, gex, dtrain).logit));

  DLosses out;
  out.v_dxz = g.scalar_value(v_xz);
  out.v_dxx = g.scalar_value(v_xx);
  Var total = g.add(v_xz, v_xx);
  if (b.use_dzz) {
    Var egz = b.encode(g, gz, frozen);
    Var v_zz = g.add(loss_real(g, b.dzz_logit(g, zin, zin, dtrain)),
                     loss_fake(g, b.dzz_logit(g, zin, egz, dtrain)));
    out.v_dzz = g.scalar_value(v_zz);
    total = g.add(total, v_zz);
  }
  out.total = total;
  return out;
}

struct GLosses {
  Var total;
  double g_xz = 0.0, g_xx = 0.0, g_zz = 0.0;
};

/// Generator/encoder-side values. Discriminators run frozen; gradients reach
/// E and G only. Default is the non-saturating form; literal_minimax keeps
/// the saddle-point objective verbatim.
inline GLosses generator_encoder_losses(Graph& g, NetworkBundle& b, const Tensor& x,
                                        const Tensor& z, Rng& rng, bool training = true,
                                        bool literal_minimax = false, bool use_dropout = true) {
  const FwdCtx eg_train{training, true, &rng, use_dropout};
  const FwdCtx dfrozen{training, false, &rng, use_dropout};
  Var xin = g.input(x);
  Var zin = g.input(z);

  Var ex = b.encode(g, xin, eg_train);
  Var gz = b.generate(g, zin, eg_train);
  Var gex = b.generate(g, ex, eg_train);

  Var l_real_xz = b.dxz_logit(g, xin, ex, dfrozen);
  Var l_fake_xz = b.dxz_logit(g, gz, zin, dfrozen);
  Var l_fake_xx = b.dxx(g, xin, gex, dfrozen).logit;

  Var g_xz = literal_minimax
                 ? g.neg(g.add(loss_real(g, l_real_xz), loss_fake(g, l_fake_xz)))
                 : g.add(loss_real(g, l_fake_xz), loss_fake(g, l_real_xz));
  Var g_xx = literal_minimax ? g.neg(loss_fake(g, l_fake_xx)) : loss_real(g, l_fake_xx);

  GLosses out;
  out.g_xz = g.scalar_value(g_xz);
  out.g_xx = g.scalar_value(g_xx);
  Var total = g.add(g_xz, g_xx);
  if (b.use_dzz) {
    Var egz = b.encode(g, gz, eg_train);
    Var l_fake_zz = b.dzz_logit(g, zin, egz, dfrozen);
    Var g_zz = literal_minimax ? g.neg(loss_fake(g, l_fake_zz)) : loss_real(g, l_fake_zz);
    out.g_zz = g.scalar_value(g_zz);
    total = g.add(total, g_zz);
  }
  out.total = total;
  return out;
}

/// One alternating round: a joint Adam step on all discriminators, then a
/// joint Adam step on E and G with a fresh latent draw, then an EMA update.
inline LossBreakdown train_step(NetworkBundle& b, Adam& adam_d, Adam& adam_eg,
                                const Tensor& x_batch, Rng& rng, const TrainConfig& cfg) {
  if (b.ema.swapped()) throw UsageError("training step attempted under ema swap");
  if (x_batch.rows() < 2) throw ArgumentError("train_step: batch size must be >= 2");

  b.power_iterate(cfg.sn_power_iters);

  LossBreakdown out;
  {
    Tensor z = sample_latent(x_batch.rows(), b.latent_dim, rng);
    Graph g;
    DLosses d = discriminator_losses(g, b, x_batch, z, rng, true);
    out.v_dxz = d.v_dxz;
    out.v_dxx = d.v_dxx;
    out.v_dzz = d.v_dzz;
    if (!std::isfinite(out.d_total()))
      throw NumericError("non-finite discriminator loss (v_dxz=" + std::to_string(d.v_dxz) +
                         ", v_dxx=" + std::to_string(d.v_dxx) +
                         ", v_dzz=" + std::to_string(d.v_dzz) + ")");
    adam_d.zero_grad();
    g.backward(d.total);
    adam_d.step();
  }
  {
    Tensor z = sample_latent(x_batch.rows(), b.latent_dim, rng);
    Graph g;
    GLosses ge = generator_encoder_losses(g, b, x_batch, z, rng, true, cfg.literal_minimax);
    out.g_xz = ge.g_xz;
    out.g_xx = ge.g_xx;
    out.g_zz = ge.g_zz;
    if (!std::isfinite(out.g_total()))
      throw NumericError("non-finite generator/encoder loss (g_xz=" + std::to_string(ge.g_xz) +
                         ", g_xx=" + std::to_string(ge.g_xx) +
                         ", g_zz=" + std::to_string(ge.g_zz) + ")");
    adam_eg.zero_grad();
    g.backward(ge.total);
    adam_eg.step();
  }
  b.ema.update();
  return out;
}

struct TrainResult {
  std::unique_ptr<NetworkBundle> bundle;
  std::vector<LossBreakdown> history;  // per-epoch means
};

/// Full training run over nominal-only data with seeded per-epoch
/// reshuffling. Partial trailing batches are dropped (batch statistics need
/// a full batch).
template <typename EpochFn>
TrainResult train_loop_cb(const Tensor& train_x, const TrainConfig& cfg, EpochFn&& per_epoch) {
  if (train_x.size() == 0 || train_x.rows() == 0) throw ConfigError("train_loop: empty dataset");
  const std::size_t n = train_x.rows();
  const std::size_t d = train_x.cols();
  if (n < cfg.batch_size && cfg.epochs > 0)
    throw ConfigError("train_loop: dataset smaller than one batch");

  Rng master(cfg.seed);
  Rng init_rng = master.fork(0);
  Rng step_rng = master.fork(1);

  TrainResult res;
  res.bundle = build_networks(cfg, d, init_rng);
  Adam adam_d(res.bundle->disc_params(), cfg.adam());
  Adam adam_eg(res.bundle->eg_params(), cfg.adam());

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Tensor batch({cfg.batch_size, d});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = master.fork(1000 + epoch);
    shuffle_rng.shuffle(idx);
    LossBreakdown epoch_sum;
    std::size_t steps = 0;
    for (std::size_t off = 0; off + cfg.batch_size <= n; off += cfg.batch_size) {
      for (std::size_t r = 0; r < cfg.batch_size; ++r)
        for (std::size_t c = 0; c < d; ++c) batch(r, c) = train_x(idx[off + r], c);
      LossBreakdown lb = train_step(*res.bundle, adam_d, adam_eg, batch, step_rng, cfg);
      epoch_sum.v_dxz += lb.v_dxz;
      epoch_sum.v_dxx += lb.v_dxx;
      epoch_sum.v_dzz += lb.v_dzz;
      epoch_sum.g_xz += lb.g_xz;
      epoch_sum.g_xx += lb.g_xx;
      epoch_sum.g_zz += lb.g_zz;
      ++steps;
    }
    if (steps > 0) {
      const double inv = 1.0 / static_cast<double>(steps);
      epoch_sum.v_dxz *= inv;
      epoch_sum.v_dxx *= inv;
      epoch_sum.v_dzz *= inv;
      epoch_sum.g_xz *= inv;
      epoch_sum.g_xx *= inv;
      epoch_sum.g_zz *= inv;
    }
    res.history.push_back(epoch_sum);
    per_epoch(epoch, *res.bundle, epoch_sum);
  }
  return res;
}

inline TrainResult train_loop(const Tensor& train_x, const TrainConfig& cfg) {
  return train_loop_cb(train_x, cfg, [](std::size_t, NetworkBundle&, const LossBreakdown&) {});
}

}  // namespace alad
