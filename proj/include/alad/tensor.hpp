#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alad/errors.hpp"

namespace alad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// Dense row-major float64 array. The value carrier for every network in the
// toolkit; gradients live in a sibling tensor owned by Param or graph nodes.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
    validate_shape();
  }

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor row_vector(std::initializer_list<double> vals) {
    return Tensor({1, vals.size()}, std::vector<double>(vals));
  }

  static Tensor vector(std::initializer_list<double> vals) {
    return Tensor({vals.size()}, std::vector<double>(vals));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> flat;
    flat.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix initializer");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(flat));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { require_rank2(); return shape_[0]; }
  std::size_t cols() const { require_rank2(); return shape_[1]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  Tensor row(std::size_t r) const {
    require_rank2();
    Tensor out({1, shape_[1]});
    for (std::size_t c = 0; c < shape_[1]; ++c) out[c] = (*this)(r, c);
    return out;
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_)
      if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape_));
  }
  void require_rank2() const {
    if (shape_.size() != 2) throw ShapeError("rank-2 tensor required, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

// ---- matmul kernels -------------------------------------------------------
// Plain loops ordered for row-major access; the compiler vectorizes the inner
// axpy/dot loops. All kernels accumulate into c.

/// c[r x n] += a[r x k] * b[k x n]
inline void gemm_nn(const double* a, const double* b, double* c,
                    std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

/// c[k x n] += a^T * b  with a[r x k], b[r x n]
inline void gemm_tn(const double* a, const double* b, double* c,
                    std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < r; ++p) {
    const double* ap = a + p * k;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

/// c[r x k] += a * b^T  with a[r x n], b[k x n]
inline void gemm_nt(const double* a, const double* b, double* c,
                    std::size_t r, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double* bj = b + j * n;
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

}  // namespace alad
