// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "muonvr/matrix.hpp"
#include "muonvr/rng.hpp"

namespace muonvr {

// A stochastic gradient and the same-sample gradient at a second
// point.  Both come from one draw of the sample, which is what the
// variance-reduced momentum correction needs.
struct SamplePair {
  Matrix grad_at_x;
  Matrix grad_at_prev;
  std::uint64_t sample_id = 0;
};

// A smooth objective over an m x n parameter matrix with a stochastic
// first-order oracle.  Instances are immutable after construction; all
// randomness flows through the caller's Rng.
class Problem {
 public:
  virtual ~Problem() = default;

  const std::string& name() const { return name_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  // Gradient-Lipschitz constant (measured for the data-driven kinds).
  double smoothness_l() const { return smoothness_l_; }
  // sqrt of the stochastic gradient's variance bound.
  double noise_sigma() const { return noise_sigma_; }
  std::optional<double> gradient_dominance_mu() const { return gradient_dominance_mu_; }
  std::optional<double> optimal_value() const { return optimal_value_; }

  // Fixed starting iterate, derived from the construction seed.
  const Matrix& initial_point() const { return initial_point_; }

  virtual double value(const Matrix& x) const = 0;
  virtual Matrix gradient(const Matrix& x) const = 0;

  // One-point oracle: draws a sample and evaluates at x.
  Matrix sample_gradient(const Matrix& x, Rng& rng) const;

  // Two-point oracle: draws one sample and evaluates at both points.
  SamplePair sample_pair(const Matrix& x, const Matrix& x_prev, Rng& rng) const;

 protected:
  Problem(std::string name, int rows, int cols);

  // Single implementation behind both oracles.  g_prev is null for the
  // one-point form.
  virtual void sample_grads(const Matrix& x, const Matrix* x_prev, Rng& rng,
                            Matrix& g_x, Matrix* g_prev, std::uint64_t& sample_id) const = 0;

  void check_point_shape(const Matrix& x, const char* who) const;

  std::string name_;
  int rows_;
  int cols_;
  double smoothness_l_ = 0.0;
  double noise_sigma_ = 0.0;
  std::optional<double> gradient_dominance_mu_;
  std::optional<double> optimal_value_;
  Matrix initial_point_;
};

// Diagonal quadratic: f(x) = 0.5 * sum h_ij (x_ij - x*_ij)^2 with
// curvatures h_ij log-uniform in [mu, l].  The stochastic gradient
// adds one Gaussian noise matrix with E||noise||_F^2 = sigma^2, shared
// across both points of a pair.
std::unique_ptr<Problem> make_stochastic_quadratic(std::uint64_t seed, int m, int n,
                                                   double l, double mu, double sigma,
                                                   double init_scale = 1.0);

// Separable non-convex objective with per-entry shape
// g(x) = x^2 + 3 sin(2x), shifted so the minimum value is 0.  Additive
// Gaussian noise as in the quadratic.  The stored gradient-dominance
// constant comes from a 1-D scan; see pl_scan in this header.
std::unique_ptr<Problem> make_pl_nonconvex(std::uint64_t seed, int m, int n, double sigma,
                                           double init_scale = 0.15);

// Low-rank least squares f(x) = 0.5 * ||a - x b^T||_F^2 with a rank-k
// signal plus entry noise of scale sigma.  The stochastic gradient
// subsamples rows of the residual with replacement; smoothness and
// noise level are measured at construction.
std::unique_ptr<Problem> make_matrix_factorization(std::uint64_t seed, int m, int n, int k,
                                                   double sigma, int batch_rows = 0);

// Two-layer tanh classifier on Gaussian clusters; only the hidden
// weight matrix (width x input_dim) is trained, the rest stays frozen
// at construction (biases at zero, output weights random).  Samples
// are mini-batches from a fixed partition of the dataset, so averaging
// the oracle over all batches recovers the full-batch gradient.
std::unique_ptr<Problem> make_tiny_mlp(std::uint64_t seed, int width, int dataset_size,
                                       double label_noise, int input_dim = 16,
                                       int num_classes = 4, int batch = 32);

// Result of scanning r(x) = g'(x)^2 / (2 (g(x) - g_min)) for the 1-D
// section g(x) = x^2 + 3 sin(2x) over [-10, 10].
struct PlScanResult {
  double x_min;        // global minimizer
  double g_min;        // minimum value before shifting
  double mu;           // infimum of r over the scan grid
  double mu_arg;       // where the infimum is attained
};

PlScanResult pl_scan(double resolution = 1e-4);

// Monte-Carlo probes used by tests and by the data-driven problem
// constructors.
double estimate_gradient_variance(const Problem& problem, const Matrix& x, int num_samples,
                                  Rng& rng);
Matrix estimate_gradient_mean(const Problem& problem, const Matrix& x, int num_samples,
                              Rng& rng);

}  // namespace muonvr
