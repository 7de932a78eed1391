// SPDX-License-Identifier: Apache-2.0
#include "muonvr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "muonvr/errors.hpp"

namespace muonvr {

namespace {

// Off-diagonal pivots below this relative size count as annihilated.
constexpr double kJacobiTol = 1e-15;

double row_dot(const Matrix& a, int r1, int r2) {
  const double* x = a.data() + static_cast<std::size_t>(r1) * a.cols();
  const double* y = a.data() + static_cast<std::size_t>(r2) * a.cols();
  double s = 0.0;
  for (int i = 0; i < a.cols(); ++i) s += x[i] * y[i];
  return s;
}

void rotate_rows(Matrix& a, int p, int q, double c, double s) {
  double* x = a.data() + static_cast<std::size_t>(p) * a.cols();
  double* y = a.data() + static_cast<std::size_t>(q) * a.cols();
  for (int i = 0; i < a.cols(); ++i) {
    const double xp = x[i];
    const double yq = y[i];
    x[i] = c * xp - s * yq;
    y[i] = s * xp + c * yq;
  }
}

}  // namespace

SvdResult compact_svd(const Matrix& a, double rank_tol, int max_sweeps) {
  if (a.empty()) throw InvalidConstants("compact_svd: empty input");
  if (rank_tol <= 0.0) throw InvalidConstants("compact_svd: rank_tol must be positive");
  const int m = a.rows();
  const int n = a.cols();
  const bool transposed = m < n;

  // Work on the tall orientation, with its columns stored contiguously
  // as rows of wt.  One-sided Jacobi orthogonalizes those columns; vt
  // accumulates the applied rotations.
  Matrix wt = transposed ? a : transpose(a);
  const int nc = wt.rows();  // columns of the tall matrix
  Matrix vt = Matrix::identity(nc);

  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (int p = 0; p < nc - 1; ++p) {
      for (int q = p + 1; q < nc; ++q) {
        const double app = row_dot(wt, p, p);
        const double aqq = row_dot(wt, q, q);
        const double apq = row_dot(wt, p, q);
        if (std::abs(apq) <= kJacobiTol * std::sqrt(app * aqq)) continue;
        converged = false;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_rows(wt, p, q, c, s);
        rotate_rows(vt, p, q, c, s);
      }
    }
  }
  if (!converged) {
    throw ConvergenceFailure("compact_svd: sweep budget exhausted (" + std::to_string(max_sweeps) + ")");
  }

  std::vector<double> norms(nc);
  for (int j = 0; j < nc; ++j) norms[j] = std::sqrt(row_dot(wt, j, j));
  std::vector<int> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return norms[i] > norms[j]; });

  const double sigma_max = norms[order[0]];
  int rank = 0;
  while (rank < nc && norms[order[rank]] > rank_tol * sigma_max) ++rank;
  if (sigma_max == 0.0) rank = 0;

  // Left factor of the tall orientation: normalized columns, now laid
  // out as rows of u_tall_t (rank x max(m, n)).
  Matrix u_tall_t(rank, wt.cols());
  Matrix v_tall_t(rank, nc);
  std::vector<double> sigma(rank);
  for (int j = 0; j < rank; ++j) {
    const int src = order[j];
    sigma[j] = norms[src];
    const double inv = 1.0 / norms[src];
    for (int i = 0; i < wt.cols(); ++i) u_tall_t(j, i) = wt(src, i) * inv;
    for (int i = 0; i < nc; ++i) v_tall_t(j, i) = vt(src, i);
  }

  SvdResult out;
  out.rank = rank;
  out.sigma = std::move(sigma);
  if (transposed) {
    out.u = transpose(v_tall_t);
    out.v = transpose(u_tall_t);
  } else {
    out.u = transpose(u_tall_t);
    out.v = transpose(v_tall_t);
  }

  for (int j = 0; j < rank; ++j) {
    double lead = 0.0;
    for (int i = 0; i < out.u.rows(); ++i) {
      if (out.u(i, j) != 0.0) {
        lead = out.u(i, j);
        break;
      }
    }
    if (lead < 0.0) {
      for (int i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
      for (int i = 0; i < out.v.rows(); ++i) out.v(i, j) = -out.v(i, j);
    }
  }
  return out;
}

double nuclear_norm(const Matrix& a) {
  const SvdResult svd = compact_svd(a);
  double s = 0.0;
  for (double v : svd.sigma) s += v;
  return s;
}

Matrix polar_factor_exact(const Matrix& a, double rank_tol) {
  if (a.empty()) throw InvalidConstants("polar_factor_exact: empty input");
  if (frobenius_norm(a) == 0.0) return Matrix::zeros(a.rows(), a.cols());
  const SvdResult svd = compact_svd(a, rank_tol);
  return matmul(svd.u, transpose(svd.v));
}

Matrix newton_schulz(const Matrix& m, int steps, const NewtonSchulzCoeffs& coeffs) {
  if (m.empty()) throw InvalidConstants("newton_schulz: empty input");
  if (steps < 0) throw InvalidConstants("newton_schulz: negative step count");
  const double norm = frobenius_norm(m);
  if (norm == 0.0) throw InvalidConstants("newton_schulz: zero input");

  const bool transposed = m.rows() < m.cols();
  Matrix y = transposed ? transpose(m) : m;
  y = scale(y, 1.0 / norm);
  const int nc = y.cols();
  const double guard = 10.0 * std::sqrt(static_cast<double>(nc));

  for (int k = 0; k < steps; ++k) {
    // (y y^T) y = y (y^T y): form the small right Gram.
    const Matrix g = matmul(transpose(y), y);
    Matrix p = matmul(g, g);
    double* pd = p.data();
    const double* gd = g.data();
    for (std::size_t i = 0; i < p.size(); ++i) pd[i] = coeffs.c * pd[i] + coeffs.b * gd[i];
    for (int i = 0; i < nc; ++i) p(i, i) += coeffs.a;
    y = matmul(y, p);
    if (frobenius_norm(y) > guard) {
      throw DivergenceDetected("newton_schulz: iterate norm exceeded guard at step " + std::to_string(k + 1));
    }
  }
  return transposed ? transpose(y) : y;
}

}  // namespace muonvr
