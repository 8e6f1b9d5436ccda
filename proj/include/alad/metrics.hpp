#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "alad/errors.hpp"

namespace alad {

struct TimingStats {
  double mean_ms_per_batch = 0.0;
  double std_ms = 0.0;
  std::size_t batch_size = 0;
  std::size_t reps = 0;
};

struct EvalResult {
  double precision = 0.0, recall = 0.0, f1 = 0.0, auroc = 0.0;
  double threshold_q = 0.0;
  std::size_t n_test = 0;
  TimingStats timing;
};

/// Marks the ceil(q*N) highest-scoring samples anomalous. Ties resolve by
/// stable input order.
inline std::vector<std::uint8_t> threshold_top_q(const std::vector<double>& scores, double q) {
  if (scores.empty()) throw ArgumentError("threshold_top_q: empty scores");
  if (q <= 0.0 || q >= 1.0) throw ArgumentError("threshold_top_q: q must be in (0,1)");
  const std::size_t n = scores.size();
  const std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::uint8_t> pred(n, 0);
  for (std::size_t i = 0; i < k && i < n; ++i) pred[order[i]] = 1;
  return pred;
}

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Positive class = anomaly. 0/0 cases resolve to 0.
inline Prf precision_recall_f1(const std::vector<std::uint8_t>& pred,
                               const std::vector<std::uint8_t>& labels) {
  if (pred.size() != labels.size()) throw ArgumentError("precision_recall_f1: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && labels[i]) ++tp;
    else if (pred[i] && !labels[i]) ++fp;
    else if (!pred[i] && labels[i]) ++fn;
  }
  Prf out;
  out.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall > 0.0)
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

/// Rank-based AUROC (Mann-Whitney) with midrank tie handling: the fraction
/// of (anomalous, nominal) pairs where the anomalous score is higher, ties
/// counting one half.
inline double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw ArgumentError("auroc: length mismatch");
  std::size_t n1 = 0, n0 = 0;
  for (auto l : labels) (l ? n1 : n0)++;
  if (n1 == 0 || n0 == 0) throw ArgumentError("auroc: undefined, both classes must be present");

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

/// Wall-clock mean/stddev per call of `score_batch` after discarding warmup
/// runs. Single-threaded by construction.
inline TimingStats timing_benchmark(const std::function<void()>& score_batch,
                                    std::size_t batch_size, int warmup, int reps) {
  if (reps < 3) throw ArgumentError("timing_benchmark: reps must be >= 3");
  for (int i = 0; i < warmup; ++i) score_batch();
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    score_batch();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  TimingStats st;
  st.batch_size = batch_size;
  st.reps = static_cast<std::size_t>(reps);
  st.mean_ms_per_batch = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
  double acc = 0.0;
  for (double v : ms) acc += (v - st.mean_ms_per_batch) * (v - st.mean_ms_per_batch);
  st.std_ms = std::sqrt(acc / ms.size());
  return st;
}

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / v.size());
}

}  // namespace alad
