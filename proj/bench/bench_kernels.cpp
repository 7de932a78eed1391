// SPDX-License-Identifier: Apache-2.0
//
// Timing comparison of the serial and OpenMP matmul kernels, the
// iterative orthogonalizer on top of them, and a seed-parallel sweep.
// The parallel kernels must agree bit for bit with the serial ones, so
// the benchmark also cross-checks outputs while timing.
#include <chrono>
#include <cstdio>
#include <vector>

#include "muonvr/linalg.hpp"
#include "muonvr/matrix.hpp"
#include "muonvr/parallel.hpp"
#include "muonvr/rng.hpp"

using namespace muonvr;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bench_matmul(int n, int reps) {
  Rng rng(11);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);

  Matrix serial_out(n, n);
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) kernels::matmul_serial(a, b, serial_out);
  const double serial_s = seconds_since(t0) / reps;

  Matrix parallel_out(n, n);
  t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) kernels::matmul_parallel(a, b, parallel_out);
  const double parallel_s = seconds_since(t0) / reps;

  const double* lhs = serial_out.data();
  const double* rhs = parallel_out.data();
  bool identical = true;
  for (std::size_t i = 0; i < serial_out.size(); ++i) identical &= lhs[i] == rhs[i];
  std::printf("matmul %4dx%-4d  serial %8.3f ms  parallel %8.3f ms  speedup %5.2fx  %s\n", n, n,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              identical ? "bit-identical" : "MISMATCH");
}

void bench_orthogonalize(int rows, int cols, int reps) {
  Rng rng(13);
  const Matrix m = random_matrix(rows, cols, rng);

  auto t0 = std::chrono::steady_clock::now();
  Matrix exact(1, 1);
  for (int r = 0; r < reps; ++r) exact = polar_factor_exact(m);
  const double exact_s = seconds_since(t0) / reps;

  t0 = std::chrono::steady_clock::now();
  Matrix iter(1, 1);
  for (int r = 0; r < reps; ++r) iter = newton_schulz(m, 30, kNewtonSchulzConvergent);
  const double iter_s = seconds_since(t0) / reps;

  const double gap = frobenius_norm(sub(exact, iter));
  std::printf("orth   %4dx%-4d  exact  %8.3f ms  iterative %7.3f ms  gap %.2e\n", rows, cols,
              exact_s * 1e3, iter_s * 1e3, gap);
}

void bench_sweep(int num_seeds, int steps, int n) {
  std::vector<double> results(num_seeds);
  const auto work = [&](long i) {
    Rng rng = Rng(99).substream(static_cast<std::uint64_t>(i));
    Matrix x = random_matrix(n, n, rng);
    for (int s = 0; s < steps; ++s) {
      const Matrix o = polar_factor_exact(x);
      add_scaled(x, o, -0.01);
    }
    results[i] = frobenius_norm(x);
  };

  set_max_threads(1);
  auto t0 = std::chrono::steady_clock::now();
  parallel_for(num_seeds, work);
  const double serial_s = seconds_since(t0);
  const std::vector<double> serial_results = results;

  set_max_threads(0);
  t0 = std::chrono::steady_clock::now();
  parallel_for(num_seeds, work);
  const double parallel_s = seconds_since(t0);

  const bool identical = serial_results == results;
  std::printf("sweep  %d seeds x %d steps  serial %7.3f s  parallel %7.3f s  speedup %5.2fx  %s\n",
              num_seeds, steps, serial_s, parallel_s, serial_s / parallel_s,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", effective_threads());
  bench_matmul(64, 50);
  bench_matmul(256, 10);
  bench_matmul(512, 3);
  bench_orthogonalize(64, 32, 20);
  bench_orthogonalize(256, 128, 3);
  bench_sweep(16, 200, 32);
  return 0;
}
