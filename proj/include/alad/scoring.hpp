#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "alad/errors.hpp"
#include "alad/graph.hpp"
#include "alad/networks.hpp"

namespace alad {

enum class ScoreVariant { features, logits, l1, l2 };

inline std::string to_string(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::features: return "features";
    case ScoreVariant::logits: return "logits";
    case ScoreVariant::l1: return "l1";
    case ScoreVariant::l2: return "l2";
  }
  return "?";
}

inline ScoreVariant parse_variant(const std::string& s) {
  if (s == "features") return ScoreVariant::features;
  if (s == "logits") return ScoreVariant::logits;
  if (s == "l1") return ScoreVariant::l1;
  if (s == "l2") return ScoreVariant::l2;
  throw ArgumentError("unknown score variant '" + s + "' (valid: features, logits, l1, l2)");
}

struct ScoreReport {
  std::vector<std::size_t> sample_ids;
  std::vector<double> scores;
  ScoreVariant variant = ScoreVariant::features;
  std::string checkpoint_id;
  std::uint64_t seed = 0;
};

namespace detail {
inline void require_scoring_state(const NetworkBundle& b, const Tensor& x) {
  if (!b.ema.swapped())
    throw UsageError("scoring requires an active ema swap (use EmaState::Swap)");
  if (x.rank() != 2 || x.cols() != b.input_dim)
    throw ShapeError("scoring input has " + shape_str(x.shape()) + ", model expects n x " +
                     std::to_string(b.input_dim));
}
}  // namespace detail

/// x' = G(E(x)) in inference mode (running batch-norm statistics, dropout
/// off). Requires an active EMA swap.
inline Tensor reconstruct(NetworkBundle& b, const Tensor& x) {
  detail::require_scoring_state(b, x);
  Graph g;
  const FwdCtx infer{false, false, nullptr};
  Var xin = g.input(x);
  Var xr = b.generate(g, b.encode(g, xin, infer), infer);
  return g.value(xr);
}

/// Anomaly scores for one batch, higher = more anomalous for all variants
/// except logits, which is kept exactly as log D_xx(x, x') and documented as
/// such. features uses the L1 distance between the D_xx feature layer at
/// (x, x) and (x, x').
inline ScoreReport anomaly_score(NetworkBundle& b, const Tensor& x,
                                 ScoreVariant variant = ScoreVariant::features) {
  detail::require_scoring_state(b, x);
  const std::size_t n = x.rows();

  Graph g;
  const FwdCtx infer{false, false, nullptr};
  Var xin = g.input(x);
  Var xr = b.generate(g, b.encode(g, xin, infer), infer);

  ScoreReport rep;
  rep.variant = variant;
  rep.sample_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) rep.sample_ids[i] = i;
  rep.scores.assign(n, 0.0);

  switch (variant) {
    case ScoreVariant::features: {
      Var fa = b.dxx(g, xin, xin, infer).features;
      Var fd = b.dxx(g, xin, xr, infer).features;
      const Tensor& A = g.value(fa);
      const Tensor& D = g.value(fd);
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) s += std::fabs(D(r, c) - A(r, c));
        rep.scores[r] = s;
      }
      break;
    }
    case ScoreVariant::logits: {
      Var logit = b.dxx(g, xin, xr, infer).logit;
      const Tensor& L = g.value(logit);
      // log sigmoid(l) = -softplus(-l)
      for (std::size_t r = 0; r < n; ++r) rep.scores[r] = -Graph::stable_softplus(-L(r, 0));
      break;
    }
    case ScoreVariant::l1: {
      const Tensor& R = g.value(xr);
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) s += std::fabs(x(r, c) - R(r, c));
        rep.scores[r] = s;
      }
      break;
    }
    case ScoreVariant::l2: {
      const Tensor& R = g.value(xr);
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
          const double d = x(r, c) - R(r, c);
          s += d * d;
        }
        rep.scores[r] = std::sqrt(s);
      }
      break;
    }
  }
  for (double s : rep.scores)
    if (!std::isfinite(s)) throw NumericError("non-finite anomaly score");
  return rep;
}

/// `sample_id,score` rows preceded by a provenance comment.
inline void write_score_csv(std::ostream& os, const ScoreReport& rep) {
  os << "# variant=" << to_string(rep.variant) << " checkpoint=" << rep.checkpoint_id
     << " seed=" << rep.seed << "\n";
  os << "sample_id,score\n";
  os.precision(17);
  for (std::size_t i = 0; i < rep.scores.size(); ++i)
    os << rep.sample_ids[i] << "," << rep.scores[i] << "\n";
}

}  // namespace alad
