#pragma once

#include <cassert>
#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace roadrank {

/// Dense row-major matrix of doubles. Vectors are stored as 1×n matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// out += v · M  (v is a row vector of length M.rows)
inline void add_vec_mat(std::span<const double> v, const Matrix& m,
                        std::span<double> out) {
  assert(v.size() == m.rows && out.size() == m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double a = v[r];
    if (a == 0.0) continue;
    const double* mr = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += a * mr[c];
  }
}

// out += M · g  (g has length M.cols); used to push gradients back through v · M
inline void add_mat_vec(const Matrix& m, std::span<const double> g,
                        std::span<double> out) {
  assert(g.size() == m.cols && out.size() == m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* mr = m.data.data() + r * m.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += mr[c] * g[c];
    out[r] += s;
  }
}

// G += vᵀ g  (outer product accumulation)
inline void add_outer(std::span<const double> v, std::span<const double> g,
                      Matrix& grad) {
  assert(v.size() == grad.rows && g.size() == grad.cols);
  for (std::size_t r = 0; r < grad.rows; ++r) {
    const double a = v[r];
    if (a == 0.0) continue;
    double* gr = grad.data.data() + r * grad.cols;
    for (std::size_t c = 0; c < grad.cols; ++c) gr[c] += a * g[c];
  }
}

}  // namespace roadrank
