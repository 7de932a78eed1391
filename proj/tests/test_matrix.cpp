// SPDX-License-Identifier: Apache-2.0
#include "muonvr/matrix.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "muonvr/errors.hpp"
#include "muonvr/parallel.hpp"
#include "muonvr/rng.hpp"

namespace {

using muonvr::Matrix;

Matrix random_matrix(int rows, int cols, muonvr::Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Straight triple loop with the same accumulation order the library
// promises: fixed k-order per output element.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("construction and element access") {
  Matrix m(2, 3);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.size() == 6);
  CHECK_FALSE(m.empty());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m(i, j) == 0.0);

  m(1, 2) = 5.5;
  CHECK(m(1, 2) == 5.5);
  CHECK(m.data()[1 * 3 + 2] == 5.5);  // row-major layout

  Matrix empty;
  CHECK(empty.empty());
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 0);
}

TEST_CASE("construction from data vector") {
  Matrix m(2, 2, {1.0, 2.0, 3.0, 4.0});
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 3.0);
  CHECK(m(1, 1) == 4.0);

  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), muonvr::ShapeMismatch);
  CHECK_THROWS_AS(Matrix(-1, 2), muonvr::InvalidConstants);
}

TEST_CASE("identity") {
  Matrix id = Matrix::identity(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(id(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("transpose") {
  Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix t = muonvr::transpose(m);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(t(j, i) == m(i, j));
}

TEST_CASE("matmul against a hand-computed product") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  Matrix c = muonvr::matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == 58.0);   // 1*7 + 2*9 + 3*11
  CHECK(c(0, 1) == 64.0);   // 1*8 + 2*10 + 3*12
  CHECK(c(1, 0) == 139.0);  // 4*7 + 5*9 + 6*11
  CHECK(c(1, 1) == 154.0);  // 4*8 + 5*10 + 6*12
}

TEST_CASE("matmul shape mismatch") {
  Matrix a(2, 3);
  Matrix b(2, 3);
  CHECK_THROWS_AS(muonvr::matmul(a, b), muonvr::ShapeMismatch);
}

TEST_CASE("elementwise operations") {
  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix b(2, 2, {10, 20, 30, 40});

  Matrix s = muonvr::add(a, b);
  CHECK(s(0, 0) == 11.0);
  CHECK(s(1, 1) == 44.0);

  Matrix d = muonvr::sub(b, a);
  CHECK(d(0, 0) == 9.0);
  CHECK(d(1, 1) == 36.0);

  Matrix sc = muonvr::scale(a, -2.0);
  CHECK(sc(0, 0) == -2.0);
  CHECK(sc(1, 1) == -8.0);

  Matrix acc = a;
  muonvr::add_scaled(acc, b, 0.5);
  CHECK(acc(0, 0) == 6.0);   // 1 + 0.5*10
  CHECK(acc(1, 1) == 24.0);  // 4 + 0.5*40

  Matrix wrong(3, 2);
  CHECK_THROWS_AS(muonvr::add(a, wrong), muonvr::ShapeMismatch);
  CHECK_THROWS_AS(muonvr::sub(a, wrong), muonvr::ShapeMismatch);
  CHECK_THROWS_AS(muonvr::add_scaled(acc, wrong, 1.0), muonvr::ShapeMismatch);
}

TEST_CASE("frobenius norm and inner product") {
  Matrix m(2, 2, {3, 4, 0, 0});
  CHECK(muonvr::frobenius_norm(m) == doctest::Approx(5.0).epsilon(1e-15));

  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix b(2, 2, {5, 6, 7, 8});
  // 1*5 + 2*6 + 3*7 + 4*8 = 70
  CHECK(muonvr::frobenius_dot(a, b) == 70.0);
  CHECK(muonvr::frobenius_dot(a, a) ==
        doctest::Approx(muonvr::frobenius_norm(a) * muonvr::frobenius_norm(a)).epsilon(1e-14));

  Matrix wrong(1, 4);
  CHECK_THROWS_AS(muonvr::frobenius_dot(a, wrong), muonvr::ShapeMismatch);
}

TEST_CASE("all_finite flags NaN and infinity") {
  Matrix m(2, 2, {1, 2, 3, 4});
  CHECK(m.all_finite());
  m(0, 1) = std::nan("");
  CHECK_FALSE(m.all_finite());
  m(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("matmul agrees with the naive triple loop bit for bit") {
  muonvr::Rng rng(42);
  for (auto [r, k, c] : {std::tuple{1, 1, 1}, {3, 5, 2}, {8, 8, 8}, {17, 4, 31}, {64, 32, 16}}) {
    Matrix a = random_matrix(r, k, rng);
    Matrix b = random_matrix(k, c, rng);
    CHECK(bitwise_equal(muonvr::matmul(a, b), naive_matmul(a, b)));
  }
}

TEST_CASE("serial and parallel kernels are bit-identical") {
  muonvr::Rng rng(7);
  for (auto [r, k, c] : {std::tuple{2, 3, 4}, {16, 16, 16}, {63, 65, 64}, {128, 64, 96}}) {
    Matrix a = random_matrix(r, k, rng);
    Matrix b = random_matrix(k, c, rng);
    Matrix serial(r, c);
    Matrix parallel(r, c);
    muonvr::kernels::matmul_serial(a, b, serial);
    muonvr::kernels::matmul_parallel(a, b, parallel);
    CHECK(bitwise_equal(serial, parallel));
  }
}

TEST_CASE("kernel agreement is independent of the thread cap") {
  muonvr::Rng rng(11);
  Matrix a = random_matrix(96, 48, rng);
  Matrix b = random_matrix(48, 80, rng);
  Matrix reference(96, 80);
  muonvr::kernels::matmul_serial(a, b, reference);
  for (int threads : {1, 2, 4, 0}) {
    muonvr::set_max_threads(threads);
    Matrix out(96, 80);
    muonvr::kernels::matmul_parallel(a, b, out);
    CHECK(bitwise_equal(out, reference));
  }
  muonvr::set_max_threads(0);
}

TEST_CASE("parallel_for covers every index exactly once") {
  const long n = 1000;
  std::vector<int> hits(n, 0);
  muonvr::parallel_for(n, [&](long i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (long i = 0; i < n; ++i) CHECK(hits[static_cast<std::size_t>(i)] == 1);
}
