#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace rldyn {

/// Dense row-major matrix of 64-bit floats. The single value type of the
/// whole toolkit; vectors are N x 1 (or 1 x N) matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, size rows * cols

  Matrix() = default;

  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::size_t r, std::size_t c,
                          std::initializer_list<double> values) {
    Matrix m(r, c);
    if (values.size() != m.data.size()) {
      throw std::invalid_argument("Matrix::from_rows: got " +
                                  std::to_string(values.size()) +
                                  " values for a " + std::to_string(r) + "x" +
                                  std::to_string(c) + " matrix");
    }
    std::size_t i = 0;
    for (double v : values) m.data[i++] = v;
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return rows * cols; }
  bool empty() const { return size() == 0; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  double scalar() const {
    if (!is_scalar()) throw std::logic_error("Matrix::scalar on non-1x1 matrix");
    return data[0];
  }
};

bool all_finite(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Frobenius norm.
double frobenius_norm(const Matrix& m);

void require_same_shape(const Matrix& a, const Matrix& b, const char* where);

}  // namespace rldyn
