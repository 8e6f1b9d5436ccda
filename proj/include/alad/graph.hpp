#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "alad/errors.hpp"
#include "alad/rng.hpp"
#include "alad/tensor.hpp"

namespace alad {

/// A named trainable tensor with a persistent gradient buffer.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

// Eager reverse-mode tape over dense tensors. Every op appends a node whose
// parents all have smaller ids, so reverse creation order is a valid
// topological order and backward() is a single sweep from the root down.
// A graph is built for one loss evaluation and discarded afterwards.
class Graph {
 public:
  struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
  };

  Graph() { nodes_.reserve(96); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ---- leaves ----

  /// Non-trainable leaf referencing external data (copied in).
  Var input(const Tensor& t) { return make(t, false, nullptr); }

  Var constant(Tensor t) { return make(std::move(t), false, nullptr); }

  /// Trainable leaf. After backward(), the accumulated gradient is added
  /// into p.grad.
  Var param(Param& p) {
    Var v = make(p.value, true, nullptr);
    param_sinks_.push_back({v.id, &p});
    return v;
  }

  /// Spectrally normalized weight view W / sigma with sigma = u^T W v.
  /// u and v are unit-norm power-iteration buffers treated as constants;
  /// sigma still depends on W, so the backward pass applies
  ///   dW = (G - sum(G .* What) * u v^T) / sigma.
  Var spectral_weight(Param& w, const Tensor& u, const Tensor& v, bool trainable) {
    const Tensor& W = w.value;
    if (W.rank() != 2) throw ShapeError("spectral_weight: weight must be rank 2");
    const std::size_t n = W.rows(), m = W.cols();
    if (u.size() != n || v.size() != m) throw ShapeError("spectral_weight: buffer size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double wv = 0.0;
      for (std::size_t j = 0; j < m; ++j) wv += W(i, j) * v[j];
      s += u[i] * wv;
    }
    // after a power-iteration round s = |W v| >= 0, but stale buffers can
    // leave it negative; the gradient of |s| carries the sign
    const double sign = s < 0.0 ? -1.0 : 1.0;
    double sigma = std::fabs(s);
    if (sigma < 1e-12) sigma = 1e-12;  // zero-matrix floor
    Tensor out(W.shape());
    const double inv = 1.0 / sigma;
    for (std::size_t i = 0; i < W.size(); ++i) out[i] = W[i] * inv;

    if (!trainable) return make(std::move(out), false, nullptr);

    Param* wp = &w;
    Tensor uc = u, vc = v;
    Var self = make(std::move(out), true, nullptr);
    const std::int32_t sid = self.id;
    nodes_[sid].back = [sid, wp, uc, vc, sigma, sign](Graph& g) {
      const Tensor& G = g.nodes_[sid].grad;
      const Tensor& What = g.nodes_[sid].value;
      double dot = 0.0;
      for (std::size_t i = 0; i < G.size(); ++i) dot += G[i] * What[i];
      const std::size_t n = What.rows(), m = What.cols();
      const double inv = 1.0 / sigma;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          wp->grad(i, j) += (G(i, j) - dot * sign * uc[i] * vc[j]) * inv;
    };
    return self;
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
      throw ShapeError("matmul: " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
    Tensor out({A.rows(), B.cols()});
    gemm_nn(A.data(), B.data(), out.data(), A.rows(), A.cols(), B.cols());
    return binary(std::move(out), a, b, [](Graph& g, std::int32_t self, std::int32_t ai, std::int32_t bi) {
      const Tensor& d = g.nodes_[self].grad;
      const Tensor& A = g.nodes_[ai].value;
      const Tensor& B = g.nodes_[bi].value;
      if (g.nodes_[ai].requires_grad)
        gemm_nt(d.data(), B.data(), g.nodes_[ai].grad.data(), d.rows(), d.cols(), B.rows());
      if (g.nodes_[bi].requires_grad)
        gemm_tn(A.data(), d.data(), g.nodes_[bi].grad.data(), A.rows(), A.cols(), d.cols());
    });
  }

  /// Broadcast a length-m bias over the rows of x[B x m].
  Var add_bias(Var x, Var bias) {
    const Tensor& X = val(x);
    const Tensor& Bv = val(bias);
    if (X.rank() != 2 || Bv.size() != X.cols()) throw ShapeError("add_bias: size mismatch");
    Tensor out = X;
    const std::size_t B = X.rows(), m = X.cols();
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < m; ++c) out(r, c) += Bv[c];
    return binary(std::move(out), x, bias, [](Graph& g, std::int32_t self, std::int32_t xi, std::int32_t bi) {
      const Tensor& d = g.nodes_[self].grad;
      if (g.nodes_[xi].requires_grad) {
        Tensor& dx = g.nodes_[xi].grad;
        for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
      }
      if (g.nodes_[bi].requires_grad) {
        Tensor& db = g.nodes_[bi].grad;
        const std::size_t B = d.rows(), m = d.cols();
        for (std::size_t r = 0; r < B; ++r)
          for (std::size_t c = 0; c < m; ++c) db[c] += d(r, c);
      }
    });
  }

  Var concat_cols(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.rows() != B.rows())
      throw ShapeError("concat_cols: row mismatch");
    const std::size_t rows = A.rows(), ca = A.cols(), cb = B.cols();
    Tensor out({rows, ca + cb});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < ca; ++c) out(r, c) = A(r, c);
      for (std::size_t c = 0; c < cb; ++c) out(r, ca + c) = B(r, c);
    }
    return binary(std::move(out), a, b, [ca, cb](Graph& g, std::int32_t self, std::int32_t ai, std::int32_t bi) {
      const Tensor& d = g.nodes_[self].grad;
      const std::size_t rows = d.rows();
      if (g.nodes_[ai].requires_grad) {
        Tensor& da = g.nodes_[ai].grad;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < ca; ++c) da(r, c) += d(r, c);
      }
      if (g.nodes_[bi].requires_grad) {
        Tensor& db = g.nodes_[bi].grad;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cb; ++c) db(r, c) += d(r, ca + c);
      }
    });
  }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    return elementwise2(a, b, [](double x, double y) { return x + y; },
                        [](double, double, double d) { return std::pair{d, d}; });
  }

  Var sub(Var a, Var b) {
    return elementwise2(a, b, [](double x, double y) { return x - y; },
                        [](double, double, double d) { return std::pair{d, -d}; });
  }

  Var mul(Var a, Var b) {
    return elementwise2(a, b, [](double x, double y) { return x * y; },
                        [](double x, double y, double d) { return std::pair{d * y, d * x}; });
  }

  Var scale(Var x, double c) {
    return elementwise1(x, [c](double v) { return c * v; }, [c](double, double, double d) { return c * d; });
  }

  Var neg(Var x) { return scale(x, -1.0); }

  Var square(Var x) {
    return elementwise1(x, [](double v) { return v * v; }, [](double v, double, double d) { return 2.0 * v * d; });
  }

  Var abs_val(Var x) {
    return elementwise1(x, [](double v) { return std::fabs(v); },
                        [](double v, double, double d) { return v > 0.0 ? d : (v < 0.0 ? -d : 0.0); });
  }

  Var relu(Var x) { return leaky_relu(x, 0.0); }

  Var leaky_relu(Var x, double slope) {
    return elementwise1(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
                        [slope](double v, double, double d) { return v > 0.0 ? d : slope * d; });
  }

  Var sigmoid(Var x) {
    return elementwise1(x, [](double v) { return stable_sigmoid(v); },
                        [](double, double y, double d) { return d * y * (1.0 - y); });
  }

  Var tanh_act(Var x) {
    return elementwise1(x, [](double v) { return std::tanh(v); },
                        [](double, double y, double d) { return d * (1.0 - y * y); });
  }

  /// log(1 + e^x) without overflow; gradient is sigmoid(x).
  Var softplus(Var x) {
    return elementwise1(x, [](double v) { return stable_softplus(v); },
                        [](double v, double, double d) { return d * stable_sigmoid(v); });
  }

  // ---- stochastic / normalization ----

  /// Inverted dropout: zero with probability rate, scale survivors by
  /// 1/(1-rate). Callers apply it only in training mode; rate 0 is identity.
  Var dropout(Var x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ArgumentError("dropout rate must be in [0,1)");
    if (rate == 0.0) return x;
    const Tensor& X = val(x);
    Tensor mask(X.shape());
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(keep) ? inv_keep : 0.0;
    Tensor out(X.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * mask[i];
    Var self = make(std::move(out), nodes_[x.id].requires_grad, nullptr);
    if (nodes_[self.id].requires_grad) {
      const std::int32_t sid = self.id, xid = x.id;
      auto m = std::make_shared<Tensor>(std::move(mask));
      nodes_[sid].back = [sid, xid, m](Graph& g) {
        const Tensor& d = g.nodes_[sid].grad;
        Tensor& dx = g.nodes_[xid].grad;
        for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] * (*m)[i];
      };
    }
    return self;
  }

  /// Batch norm in training mode: normalize by batch statistics and update
  /// the running buffers in place. Backward is the full batch-norm gradient:
  ///   dx = (gamma/s) * (d - mean(d) - xhat * mean(d .* xhat))  per column.
  Var batch_norm_train(Var x, Var gamma, Var beta, Tensor& run_mean, Tensor& run_var,
                       double momentum, double eps) {
    const Tensor& X = val(x);
    if (X.rank() != 2) throw ShapeError("batch_norm: rank-2 input required");
    const std::size_t B = X.rows(), n = X.cols();
    if (B < 2) throw ArgumentError("batch_norm: degenerate batch (need at least 2 rows in training)");
    const Tensor& G = val(gamma);
    const Tensor& Bt = val(beta);
    if (G.size() != n || Bt.size() != n) throw ShapeError("batch_norm: parameter size mismatch");

    Tensor mean({n}), var({n});
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < B; ++r) s += X(r, c);
      mean[c] = s / static_cast<double>(B);
    }
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < B; ++r) {
        const double d = X(r, c) - mean[c];
        s += d * d;
      }
      var[c] = s / static_cast<double>(B);
    }
    for (std::size_t c = 0; c < n; ++c) {
      run_mean[c] = momentum * run_mean[c] + (1.0 - momentum) * mean[c];
      run_var[c] = momentum * run_var[c] + (1.0 - momentum) * var[c];
    }

    auto xhat = std::make_shared<Tensor>(Shape{B, n});
    auto inv_std = std::make_shared<Tensor>(Shape{n});
    for (std::size_t c = 0; c < n; ++c) (*inv_std)[c] = 1.0 / std::sqrt(var[c] + eps);
    Tensor out({B, n});
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const double xh = (X(r, c) - mean[c]) * (*inv_std)[c];
        (*xhat)(r, c) = xh;
        out(r, c) = G[c] * xh + Bt[c];
      }

    const bool rg = nodes_[x.id].requires_grad || nodes_[gamma.id].requires_grad ||
                    nodes_[beta.id].requires_grad;
    Var self = make(std::move(out), rg, nullptr);
    if (!rg) return self;
    const std::int32_t sid = self.id, xid = x.id, gid = gamma.id, bid = beta.id;
    nodes_[sid].back = [sid, xid, gid, bid, xhat, inv_std](Graph& g) {
      const Tensor& d = g.nodes_[sid].grad;
      const std::size_t B = d.rows(), n = d.cols();
      const Tensor& G = g.nodes_[gid].value;
      std::vector<double> sum_d(n, 0.0), sum_dx(n, 0.0);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          sum_d[c] += d(r, c);
          sum_dx[c] += d(r, c) * (*xhat)(r, c);
        }
      if (g.nodes_[bid].requires_grad) {
        Tensor& db = g.nodes_[bid].grad;
        for (std::size_t c = 0; c < n; ++c) db[c] += sum_d[c];
      }
      if (g.nodes_[gid].requires_grad) {
        Tensor& dg = g.nodes_[gid].grad;
        for (std::size_t c = 0; c < n; ++c) dg[c] += sum_dx[c];
      }
      if (g.nodes_[xid].requires_grad) {
        Tensor& dx = g.nodes_[xid].grad;
        const double invB = 1.0 / static_cast<double>(B);
        for (std::size_t r = 0; r < B; ++r)
          for (std::size_t c = 0; c < n; ++c)
            dx(r, c) += G[c] * (*inv_std)[c] *
                        (d(r, c) - sum_d[c] * invB - (*xhat)(r, c) * sum_dx[c] * invB);
      }
    };
    return self;
  }

  /// Batch norm in inference mode: normalize by the running buffers.
  Var batch_norm_infer(Var x, Var gamma, Var beta, const Tensor& run_mean, const Tensor& run_var,
                       double eps) {
    const Tensor& X = val(x);
    if (X.rank() != 2) throw ShapeError("batch_norm: rank-2 input required");
    const std::size_t B = X.rows(), n = X.cols();
    const Tensor& G = val(gamma);
    const Tensor& Bt = val(beta);
    auto xhat = std::make_shared<Tensor>(Shape{B, n});
    auto inv_std = std::make_shared<Tensor>(Shape{n});
    for (std::size_t c = 0; c < n; ++c) (*inv_std)[c] = 1.0 / std::sqrt(run_var[c] + eps);
    Tensor out({B, n});
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const double xh = (X(r, c) - run_mean[c]) * (*inv_std)[c];
        (*xhat)(r, c) = xh;
        out(r, c) = G[c] * xh + Bt[c];
      }
    const bool rg = nodes_[x.id].requires_grad || nodes_[gamma.id].requires_grad ||
                    nodes_[beta.id].requires_grad;
    Var self = make(std::move(out), rg, nullptr);
    if (!rg) return self;
    const std::int32_t sid = self.id, xid = x.id, gid = gamma.id, bid = beta.id;
    nodes_[sid].back = [sid, xid, gid, bid, xhat, inv_std](Graph& g) {
      const Tensor& d = g.nodes_[sid].grad;
      const std::size_t B = d.rows(), n = d.cols();
      const Tensor& G = g.nodes_[gid].value;
      if (g.nodes_[bid].requires_grad) {
        Tensor& db = g.nodes_[bid].grad;
        for (std::size_t r = 0; r < B; ++r)
          for (std::size_t c = 0; c < n; ++c) db[c] += d(r, c);
      }
      if (g.nodes_[gid].requires_grad) {
        Tensor& dg = g.nodes_[gid].grad;
        for (std::size_t r = 0; r < B; ++r)
          for (std::size_t c = 0; c < n; ++c) dg[c] += d(r, c) * (*xhat)(r, c);
      }
      if (g.nodes_[xid].requires_grad) {
        Tensor& dx = g.nodes_[xid].grad;
        for (std::size_t r = 0; r < B; ++r)
          for (std::size_t c = 0; c < n; ++c) dx(r, c) += d(r, c) * G[c] * (*inv_std)[c];
      }
    };
    return self;
  }

  // ---- reductions ----

  Var sum_all(Var x) { return reduce(x, false); }
  Var mean_all(Var x) { return reduce(x, true); }

  // ---- access / backward ----

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  double scalar_value(Var v) const {
    const Tensor& t = value(v);
    if (t.size() != 1) throw ShapeError("scalar_value: node is not scalar");
    return t[0];
  }

  /// Reverse sweep from a scalar root. Gradients accumulate into node
  /// buffers and, for param leaves, into the bound Param::grad.
  void backward(Var root) {
    if (ran_backward_) throw UsageError("backward already ran on this graph");
    ran_backward_ = true;
    Node& r = nodes_.at(root.id);
    if (r.value.size() != 1) throw ShapeError("backward: root must be scalar");
    if (!r.requires_grad) return;
    r.grad.fill(1.0);
    for (std::int32_t id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.requires_grad && n.back) n.back(*this);
    }
    for (auto& [id, p] : param_sinks_) {
      const Tensor& g = nodes_[id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

  static double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  static double stable_softplus(double x) {
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Graph&)> back;
  };

  Var make(Tensor value, bool requires_grad, std::function<void(Graph&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad = Tensor(n.value.shape());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  const Tensor& val(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw ArgumentError("invalid graph var");
    return nodes_[v.id].value;
  }

  template <typename Back3>
  Var binary(Tensor out, Var a, Var b, Back3 fn) {
    const bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var self = make(std::move(out), rg, nullptr);
    if (rg) {
      const std::int32_t sid = self.id, ai = a.id, bi = b.id;
      nodes_[sid].back = [fn, sid, ai, bi](Graph& g) { fn(g, sid, ai, bi); };
    }
    return self;
  }

  template <typename F, typename DF>
  Var elementwise1(Var x, F fwd, DF dfn) {
    const Tensor& X = val(x);
    Tensor out(X.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(X[i]);
    const bool rg = nodes_[x.id].requires_grad;
    Var self = make(std::move(out), rg, nullptr);
    if (rg) {
      const std::int32_t sid = self.id, xid = x.id;
      nodes_[sid].back = [sid, xid, dfn](Graph& g) {
        const Tensor& d = g.nodes_[sid].grad;
        const Tensor& y = g.nodes_[sid].value;
        const Tensor& xv = g.nodes_[xid].value;
        Tensor& dx = g.nodes_[xid].grad;
        for (std::size_t i = 0; i < d.size(); ++i) dx[i] += dfn(xv[i], y[i], d[i]);
      };
    }
    return self;
  }

  template <typename F, typename DF>
  Var elementwise2(Var a, Var b, F fwd, DF dfn) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ShapeError("elementwise op: shape mismatch");
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(A[i], B[i]);
    const bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var self = make(std::move(out), rg, nullptr);
    if (rg) {
      const std::int32_t sid = self.id, ai = a.id, bi = b.id;
      nodes_[sid].back = [sid, ai, bi, dfn](Graph& g) {
        const Tensor& d = g.nodes_[sid].grad;
        const Tensor& A = g.nodes_[ai].value;
        const Tensor& B = g.nodes_[bi].value;
        const bool ga = g.nodes_[ai].requires_grad, gb = g.nodes_[bi].requires_grad;
        for (std::size_t i = 0; i < d.size(); ++i) {
          auto [da, db] = dfn(A[i], B[i], d[i]);
          if (ga) g.nodes_[ai].grad[i] += da;
          if (gb) g.nodes_[bi].grad[i] += db;
        }
      };
    }
    return self;
  }

  Var reduce(Var x, bool mean) {
    const Tensor& X = val(x);
    double s = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) s += X[i];
    const double denom = mean ? static_cast<double>(X.size()) : 1.0;
    Var self = make(Tensor::scalar(s / denom), nodes_[x.id].requires_grad, nullptr);
    if (nodes_[self.id].requires_grad) {
      const std::int32_t sid = self.id, xid = x.id;
      nodes_[sid].back = [sid, xid, denom](Graph& g) {
        const double d = g.nodes_[sid].grad[0] / denom;
        Tensor& dx = g.nodes_[xid].grad;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d;
      };
    }
    return self;
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::int32_t, Param*>> param_sinks_;
  bool ran_backward_ = false;
};

using Var = Graph::Var;

}  // namespace alad
