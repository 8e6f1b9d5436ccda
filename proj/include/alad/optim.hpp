#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alad/errors.hpp"
#include "alad/graph.hpp"
#include "alad/tensor.hpp"

namespace alad {

struct AdamConfig {
  double alpha = 1e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. One instance owns the moment buffers for one
// parameter group; it never touches parameters outside its group.
class Adam {
 public:
  Adam() = default;

  Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    slots_.reserve(params_.size());
    for (Param* p : params_) slots_.push_back({Tensor(p->value.shape()), Tensor(p->value.shape())});
  }

  void zero_grad() {
    for (Param* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param* p = params_[k];
      if (!p->grad.all_finite())
        throw NumericError("adam: non-finite gradient for parameter " + p->name);
      Tensor& m = slots_[k].m;
      Tensor& v = slots_[k].v;
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p->value[i] -= cfg_.alpha * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  std::int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Tensor m, v;
  };
  std::vector<Param*> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

// Exponential moving average of a parameter group, used in place of the live
// weights at inference. shadow <- decay * shadow + (1 - decay) * live.
class EmaState {
 public:
  EmaState() = default;

  EmaState(std::vector<Param*> params, double decay) : params_(std::move(params)), decay_(decay) {
    if (decay < 0.0 || decay >= 1.0) throw ArgumentError("ema decay must be in [0,1)");
    shadows_.reserve(params_.size());
    for (Param* p : params_) shadows_.push_back(p->value);
  }

  void update() {
    if (swapped_) throw UsageError("ema update while swap is active");
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& s = shadows_[k];
      const Tensor& live = params_[k]->value;
      if (!s.same_shape(live)) throw NumericError("ema: shape drift on " + params_[k]->name);
      for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = decay_ * s[i] + (1.0 - decay_) * live[i];
    }
  }

  bool swapped() const { return swapped_; }
  double decay() const { return decay_; }
  std::size_t size() const { return params_.size(); }
  const Tensor& shadow(std::size_t k) const { return shadows_[k]; }
  Tensor& shadow_mut(std::size_t k) { return shadows_[k]; }
  const std::vector<Param*>& params() const { return params_; }

  /// Scoped swap: while alive, the live parameter slots hold the shadow
  /// values. Restores the originals bit-exactly on release.
  class Swap {
   public:
    explicit Swap(EmaState& ema) : ema_(ema) {
      if (ema_.swapped_) throw UsageError("nested ema swap");
      ema_.do_swap();
      ema_.swapped_ = true;
    }
    ~Swap() {
      ema_.do_swap();
      ema_.swapped_ = false;
    }
    Swap(const Swap&) = delete;
    Swap& operator=(const Swap&) = delete;

   private:
    EmaState& ema_;
  };

 private:
  void do_swap() {
    for (std::size_t k = 0; k < params_.size(); ++k)
      params_[k]->value.vec().swap(shadows_[k].vec());
  }

  std::vector<Param*> params_;
  std::vector<Tensor> shadows_;
  double decay_ = 0.999;
  bool swapped_ = false;
};

}  // namespace alad
