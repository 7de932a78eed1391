// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "muonvr/matrix.hpp"

namespace muonvr {

// Compact SVD a = u * diag(sigma) * v^T keeping only singular values
// above rank_tol * sigma_max.  u is m x r, v is n x r, sigma is sorted
// descending and strictly positive.  Signs are fixed so the first
// nonzero entry of every column of u is non-negative.
struct SvdResult {
  Matrix u;
  std::vector<double> sigma;
  Matrix v;
  int rank = 0;
};

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr int kDefaultSvdSweeps = 100;

// One-sided Jacobi on the tall orientation of a.  Throws
// ConvergenceFailure if the sweep budget runs out and InvalidConstants
// for an empty input.
SvdResult compact_svd(const Matrix& a, double rank_tol = kDefaultRankTol,
                      int max_sweeps = kDefaultSvdSweeps);

// Sum of singular values.
double nuclear_norm(const Matrix& a);

// Semi-orthogonal polar factor u_r * v_r^T: singular values above the
// rank cutoff map to 1, the null space stays put.  The zero matrix
// maps to the zero matrix.
Matrix polar_factor_exact(const Matrix& a, double rank_tol = kDefaultRankTol);

// Coefficients of the odd quintic y <- a*y + b*(y y^T)y + c*(y y^T)^2 y.
struct NewtonSchulzCoeffs {
  double a;
  double b;
  double c;
};

// Converges to the polar factor (cubic order near 1); default.
inline constexpr NewtonSchulzCoeffs kNewtonSchulzConvergent{1.875, -1.25, 0.375};

// Aggressive tuning common in training code.  It does not converge to the
// polar factor: iterates settle into an oscillation whose singular values
// stay within roughly [0.68, 1.14].  That is enough to condition an update
// direction, but keep the convergent set when accuracy matters.
inline constexpr NewtonSchulzCoeffs kNewtonSchulzFast{3.4445, -4.7750, 2.0315};

// Iterative approximation to polar_factor_exact(m).  The input must be
// nonzero; it is pre-normalized by its Frobenius norm and wrapped in a
// transpose when m has more columns than rows.  Throws
// DivergenceDetected if an iterate's norm exceeds 10*sqrt(min(m,n)).
// Caveat: on rank-deficient inputs, rounding noise in the null space is
// amplified by the linear coefficient each step, so very large step
// counts (hundreds) eventually degrade the result; the default 30 keeps
// that error below ~1e-6.
Matrix newton_schulz(const Matrix& m, int steps,
                     const NewtonSchulzCoeffs& coeffs = kNewtonSchulzConvergent);

}  // namespace muonvr
