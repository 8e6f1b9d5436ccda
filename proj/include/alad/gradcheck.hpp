#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "alad/errors.hpp"
#include "alad/graph.hpp"

namespace alad {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  // components whose analytic and numeric magnitudes both fall below the
  // dead zone are compared absolutely instead; see below
  double max_dead_abs_error = 0.0;
  std::size_t dead_components = 0;
};

/// Central-difference gradient check. `build` constructs the scalar loss on
/// a fresh graph at the current parameter values; it must be deterministic
/// (fix any rng draws outside). Relative error uses
/// max(|analytic|, |numeric|, 1e-8) as denominator.
///
/// A nonzero `dead_zone` splits the criterion: components where both
/// |analytic| and |numeric| are below it are reported via
/// max_dead_abs_error rather than the relative maximum. Central differences
/// cannot resolve a true gradient of exactly zero better than
/// eps*|f|/(2h), which against the 1e-8 floor reads as ~1e-3 "error";
/// batch-norm inputs are shift-invariant, so such components are routine.
inline GradcheckResult finite_difference_gradcheck(const std::function<Var(Graph&)>& build,
                                                   const std::vector<Param*>& params,
                                                   double h = 1e-5, double dead_zone = 0.0) {
  if (h <= 0.0) throw ArgumentError("gradcheck: h must be positive");

  auto eval = [&]() {
    Graph g;
    Var loss = build(g);
    return g.scalar_value(loss);
  };

  for (Param* p : params) p->zero_grad();
  {
    Graph g;
    Var loss = build(g);
    const double v = g.scalar_value(loss);
    if (!std::isfinite(v)) throw NumericError("gradcheck: loss is not finite");
    g.backward(loss);
  }

  GradcheckResult res;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double fp = eval();
      p->value[i] = saved - h;
      const double fm = eval();
      p->value[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("gradcheck: non-finite value while perturbing " + p->name + "[" +
                           std::to_string(i) + "]");
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      if (std::fabs(analytic) < dead_zone && std::fabs(numeric) < dead_zone) {
        res.max_dead_abs_error = std::max(res.max_dead_abs_error, std::fabs(analytic - numeric));
        ++res.dead_components;
        continue;
      }
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(analytic - numeric) / denom;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p->name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace alad
