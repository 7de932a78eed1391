// SPDX-License-Identifier: Apache-2.0
#include "muonvr/matrix.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "muonvr/errors.hpp"
#include "muonvr/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace muonvr {

namespace {

std::string shape_str(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

// Below this many multiply-adds the parallel kernel is not worth the
// fork-join overhead.
constexpr long kParallelFlopCutoff = 1L << 18;

void matmul_rows(const Matrix& a, const Matrix& b, Matrix& out, int row_begin, int row_end) {
  const int n = b.cols();
  const int kk = a.cols();
  const double* bd = b.data();
  for (int i = row_begin; i < row_end; ++i) {
    double* out_row = out.data() + static_cast<std::size_t>(i) * n;
    std::memset(out_row, 0, sizeof(double) * static_cast<std::size_t>(n));
    const double* a_row = a.data() + static_cast<std::size_t>(i) * kk;
    for (int k = 0; k < kk; ++k) {
      const double aik = a_row[k];
      const double* b_row = bd + static_cast<std::size_t>(k) * n;
      for (int j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw InvalidConstants("matrix dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0) throw InvalidConstants("matrix dimensions must be non-negative");
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeMismatch("matrix data length does not match " + shape_str(*this));
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  const long flops = 2L * a.rows() * a.cols() * b.cols();
  if (flops >= kParallelFlopCutoff && effective_threads() > 1) {
    kernels::matmul_parallel(a, b, out);
  } else {
    kernels::matmul_serial(a, b, out);
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  double* o = out.data();
  const double* bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += bd[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a;
  double* o = out.data();
  const double* bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] -= bd[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  double* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] *= s;
  return out;
}

void add_scaled(Matrix& a, const Matrix& b, double s) {
  require_same_shape(a, b, "add_scaled");
  double* o = a.data();
  const double* bd = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] += s * bd[i];
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  const double* d = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += d[i] * d[i];
  return std::sqrt(s);
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_dot");
  double s = 0.0;
  const double* ad = a.data();
  const double* bd = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += ad[i] * bd[i];
  return s;
}

namespace kernels {

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out) {
  matmul_rows(a, b, out, 0, a.rows());
}

void matmul_parallel(const Matrix& a, const Matrix& b, Matrix& out) {
#ifdef _OPENMP
  const int threads = effective_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int i = 0; i < a.rows(); ++i) matmul_rows(a, b, out, i, i + 1);
#else
  matmul_rows(a, b, out, 0, a.rows());
#endif
}

}  // namespace kernels

}  // namespace muonvr
