// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace muonvr {

// Dense row-major matrix of doubles.  Deliberately small: just the
// storage plus the handful of operations the optimizer needs, all with
// a fixed summation order so runs are reproducible bit for bit.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols);
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// a += s * b
void add_scaled(Matrix& a, const Matrix& b, double s);

double frobenius_norm(const Matrix& a);
// Frobenius inner product <a, b>.
double frobenius_dot(const Matrix& a, const Matrix& b);

namespace kernels {

// Reference single-threaded product.
void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out);

// Row-partitioned OpenMP product.  Each output element is accumulated
// in the same k-order as the serial kernel, so the two agree exactly.
void matmul_parallel(const Matrix& a, const Matrix& b, Matrix& out);

}  // namespace kernels

}  // namespace muonvr
