#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alad/errors.hpp"
#include "alad/graph.hpp"
#include "alad/rng.hpp"
#include "alad/tensor.hpp"

namespace alad {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.99;

/// Xavier/Glorot uniform init: entries drawn from
/// [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
inline Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw ArgumentError("xavier_init: dims must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

enum class LayerKind { dense, leaky_relu, relu, sigmoid, tanh_act, dropout, batch_norm };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;           // dense only
  double dropout_rate = 0.0;       // dropout only
  double lrelu_slope = 0.2;        // leaky_relu only
  bool use_spectral_norm = false;  // dense only
  bool use_batch_norm = false;     // set on dense rows expanded by builders

  static LayerSpec Dense(std::size_t units, bool sn = false) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    s.use_spectral_norm = sn;
    return s;
  }
  static LayerSpec LRelu(double slope = 0.2) {
    LayerSpec s;
    s.kind = LayerKind::leaky_relu;
    s.lrelu_slope = slope;
    return s;
  }
  static LayerSpec Relu() { return LayerSpec{LayerKind::relu}; }
  static LayerSpec Sigmoid() { return LayerSpec{LayerKind::sigmoid}; }
  static LayerSpec Tanh() { return LayerSpec{LayerKind::tanh_act}; }
  static LayerSpec Dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.dropout_rate = rate;
    return s;
  }
  static LayerSpec BatchNorm() { return LayerSpec{LayerKind::batch_norm}; }

  void validate() const {
    if (kind == LayerKind::dense && units == 0) throw ArgumentError("dense layer needs units > 0");
    if (kind == LayerKind::dropout && (dropout_rate < 0.0 || dropout_rate >= 1.0))
      throw ArgumentError("dropout rate must be in [0,1)");
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case LayerKind::dense:
        os << "dense" << units << (use_spectral_norm ? "+sn" : "");
        break;
      case LayerKind::leaky_relu: os << "lrelu" << lrelu_slope; break;
      case LayerKind::relu: os << "relu"; break;
      case LayerKind::sigmoid: os << "sigmoid"; break;
      case LayerKind::tanh_act: os << "tanh"; break;
      case LayerKind::dropout: os << "drop" << dropout_rate; break;
      case LayerKind::batch_norm: os << "bn"; break;
    }
    return os.str();
  }
};

/// Unit-norm power-iteration buffers for one weight matrix.
struct SnState {
  Tensor u, v;
};

/// One power-iteration round: v <- normalize(W^T u), u <- normalize(W v).
inline void power_iteration(const Tensor& w, SnState& s, int n_iters) {
  if (w.rank() != 2) throw ShapeError("power_iteration: rank-2 weight required");
  if (n_iters < 1) throw ArgumentError("power_iteration: n_iters must be >= 1");
  const std::size_t n = w.rows(), m = w.cols();
  auto normalize = [](Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
    s = std::sqrt(s);
    if (s < 1e-12) s = 1e-12;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] /= s;
  };
  for (int it = 0; it < n_iters; ++it) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += w(i, j) * s.u[i];
      s.v[j] = acc;
    }
    normalize(s.v);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += w(i, j) * s.v[j];
      s.u[i] = acc;
    }
    normalize(s.u);
  }
}

/// sigma = u^T W v, floored away from zero.
inline double spectral_sigma(const Tensor& w, const SnState& s) {
  const std::size_t n = w.rows(), m = w.cols();
  double sigma = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double wv = 0.0;
    for (std::size_t j = 0; j < m; ++j) wv += w(i, j) * s.v[j];
    sigma += s.u[i] * wv;
  }
  sigma = std::fabs(sigma);
  return sigma < 1e-12 ? 1e-12 : sigma;
}

/// Updates the buffers with n_iters rounds and returns W / sigma.
inline Tensor spectral_normalized(const Tensor& w, SnState& s, int n_iters) {
  power_iteration(w, s, n_iters);
  const double sigma = spectral_sigma(w, s);
  Tensor out = w;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sigma;
  return out;
}

/// Per-forward execution context.
struct FwdCtx {
  bool training = false;    // batch statistics + dropout masks when true
  bool trainable = false;   // attach parameters as differentiable leaves
  Rng* rng = nullptr;       // required when training with dropout
  bool use_dropout = true;  // gradient checks run training-mode without masks
};

// Sequential dense network executing a LayerSpec list. Owns weights, biases,
// batch-norm parameters/buffers and spectral-norm buffers.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::string name, std::size_t in_dim, std::vector<LayerSpec> specs, Rng& rng)
      : name_(std::move(name)), in_dim_(in_dim), specs_(std::move(specs)) {
    std::size_t cur = in_dim_;
    std::size_t di = 0, bi = 0;
    for (const LayerSpec& s : specs_) {
      s.validate();
      if (s.kind == LayerKind::dense) {
        DenseUnit d;
        d.W = Param(name_ + ".dense" + std::to_string(di) + ".W", xavier_init(cur, s.units, rng));
        d.b = Param(name_ + ".dense" + std::to_string(di) + ".b", Tensor({s.units}));
        d.sn = s.use_spectral_norm;
        d.sn_state.u = Tensor({cur});
        d.sn_state.v = Tensor({s.units});
        for (std::size_t i = 0; i < cur; ++i) d.sn_state.u[i] = rng.normal();
        for (std::size_t i = 0; i < s.units; ++i) d.sn_state.v[i] = rng.normal();
        norm_buf(d.sn_state.u);
        norm_buf(d.sn_state.v);
        dense_.push_back(std::move(d));
        cur = s.units;
        ++di;
      } else if (s.kind == LayerKind::batch_norm) {
        BnUnit b;
        b.gamma = Param(name_ + ".bn" + std::to_string(bi) + ".gamma", Tensor::full({cur}, 1.0));
        b.beta = Param(name_ + ".bn" + std::to_string(bi) + ".beta", Tensor({cur}));
        b.run_mean = Tensor({cur});
        b.run_var = Tensor::full({cur}, 1.0);
        bn_.push_back(std::move(b));
        ++bi;
      }
    }
    out_dim_ = cur;
  }

  Mlp(const Mlp&) = delete;
  Mlp& operator=(const Mlp&) = delete;
  Mlp(Mlp&&) = default;
  Mlp& operator=(Mlp&&) = default;

  Var forward(Graph& g, Var x, const FwdCtx& ctx) {
    return forward_tap(g, x, ctx, -1).first;
  }

  /// Runs the network and additionally returns the activation right after
  /// spec row `tap_after` (-1 to disable).
  std::pair<Var, Var> forward_tap(Graph& g, Var x, const FwdCtx& ctx, int tap_after) {
    Var cur = x;
    Var tapped{};
    std::size_t di = 0, bi = 0;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const LayerSpec& s = specs_[i];
      switch (s.kind) {
        case LayerKind::dense: {
          DenseUnit& d = dense_[di++];
          Var w = d.sn ? g.spectral_weight(d.W, d.sn_state.u, d.sn_state.v, ctx.trainable)
                       : (ctx.trainable ? g.param(d.W) : g.input(d.W.value));
          Var b = ctx.trainable ? g.param(d.b) : g.input(d.b.value);
          cur = g.add_bias(g.matmul(cur, w), b);
          break;
        }
        case LayerKind::batch_norm: {
          BnUnit& b = bn_[bi++];
          Var gm = ctx.trainable ? g.param(b.gamma) : g.input(b.gamma.value);
          Var bt = ctx.trainable ? g.param(b.beta) : g.input(b.beta.value);
          cur = ctx.training
                    ? g.batch_norm_train(cur, gm, bt, b.run_mean, b.run_var, kBatchNormMomentum,
                                         kBatchNormEps)
                    : g.batch_norm_infer(cur, gm, bt, b.run_mean, b.run_var, kBatchNormEps);
          break;
        }
        case LayerKind::leaky_relu: cur = g.leaky_relu(cur, s.lrelu_slope); break;
        case LayerKind::relu: cur = g.relu(cur); break;
        case LayerKind::sigmoid: cur = g.sigmoid(cur); break;
        case LayerKind::tanh_act: cur = g.tanh_act(cur); break;
        case LayerKind::dropout:
          if (ctx.training && ctx.use_dropout && s.dropout_rate > 0.0) {
            if (!ctx.rng) throw ArgumentError("dropout in training mode needs an rng");
            cur = g.dropout(cur, s.dropout_rate, *ctx.rng);
          }
          break;
      }
      if (static_cast<int>(i) == tap_after) tapped = cur;
    }
    return {cur, tapped};
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (DenseUnit& d : dense_) {
      out.push_back(&d.W);
      out.push_back(&d.b);
    }
    for (BnUnit& b : bn_) {
      out.push_back(&b.gamma);
      out.push_back(&b.beta);
    }
    return out;
  }

  struct SnHandle {
    Param* w;
    SnState* state;
  };
  std::vector<SnHandle> sn_weights() {
    std::vector<SnHandle> out;
    for (DenseUnit& d : dense_)
      if (d.sn) out.push_back({&d.W, &d.sn_state});
    return out;
  }

  /// Non-trainable buffers (batch-norm running stats, power-iteration
  /// vectors), named for checkpointing.
  std::vector<std::pair<std::string, Tensor*>> buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t i = 0; i < bn_.size(); ++i) {
      out.push_back({name_ + ".bn" + std::to_string(i) + ".run_mean", &bn_[i].run_mean});
      out.push_back({name_ + ".bn" + std::to_string(i) + ".run_var", &bn_[i].run_var});
    }
    std::size_t di = 0;
    for (DenseUnit& d : dense_) {
      if (d.sn) {
        out.push_back({name_ + ".dense" + std::to_string(di) + ".sn_u", &d.sn_state.u});
        out.push_back({name_ + ".dense" + std::to_string(di) + ".sn_v", &d.sn_state.v});
      }
      ++di;
    }
    return out;
  }

  void power_iterate(int n_iters) {
    for (DenseUnit& d : dense_)
      if (d.sn) power_iteration(d.W.value, d.sn_state, n_iters);
  }

  const std::string& name() const { return name_; }
  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }

  std::string describe() const {
    std::ostringstream os;
    os << name_ << ":in" << in_dim_;
    for (const LayerSpec& s : specs_) os << "/" << s.describe();
    return os.str();
  }

 private:
  static void norm_buf(Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
    s = std::sqrt(s);
    if (s < 1e-12) s = 1.0;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] /= s;
  }

  struct DenseUnit {
    Param W, b;
    bool sn = false;
    SnState sn_state;
  };
  struct BnUnit {
    Param gamma, beta;
    Tensor run_mean, run_var;
  };

  std::string name_;
  std::size_t in_dim_ = 0, out_dim_ = 0;
  std::vector<LayerSpec> specs_;
  std::vector<DenseUnit> dense_;
  std::vector<BnUnit> bn_;
};

}  // namespace alad
