// SPDX-License-Identifier: Apache-2.0
#include "muonvr/problems.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "muonvr/errors.hpp"
#include "muonvr/linalg.hpp"

namespace muonvr {

Problem::Problem(std::string name, int rows, int cols)
    : name_(std::move(name)), rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw InvalidConstants(name_ + ": parameter shape must be positive");
}

void Problem::check_point_shape(const Matrix& x, const char* who) const {
  if (x.rows() != rows_ || x.cols() != cols_) {
    throw ShapeMismatch(name_ + "::" + who + ": expected " + std::to_string(rows_) + "x" +
                        std::to_string(cols_));
  }
}

Matrix Problem::sample_gradient(const Matrix& x, Rng& rng) const {
  check_point_shape(x, "sample_gradient");
  Matrix g(rows_, cols_);
  std::uint64_t id = 0;
  sample_grads(x, nullptr, rng, g, nullptr, id);
  return g;
}

SamplePair Problem::sample_pair(const Matrix& x, const Matrix& x_prev, Rng& rng) const {
  check_point_shape(x, "sample_pair");
  check_point_shape(x_prev, "sample_pair");
  SamplePair pair;
  pair.grad_at_x = Matrix(rows_, cols_);
  pair.grad_at_prev = Matrix(rows_, cols_);
  sample_grads(x, &x_prev, rng, pair.grad_at_x, &pair.grad_at_prev, pair.sample_id);
  return pair;
}

namespace {

// ---------------------------------------------------------------------------
// Additive-noise problems: quadratic and the separable non-convex one.

class AdditiveNoiseProblem : public Problem {
 protected:
  AdditiveNoiseProblem(std::string name, int rows, int cols, double sigma)
      : Problem(std::move(name), rows, cols) {
    if (sigma < 0.0) throw InvalidConstants(name_ + ": sigma must be non-negative");
    noise_sigma_ = sigma;
    entry_noise_scale_ = sigma / std::sqrt(static_cast<double>(rows) * cols);
  }

  void sample_grads(const Matrix& x, const Matrix* x_prev, Rng& rng, Matrix& g_x,
                    Matrix* g_prev, std::uint64_t& sample_id) const override {
    sample_id = rng.next_u64();
    g_x = gradient(x);
    if (x_prev != nullptr) *g_prev = gradient(*x_prev);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        const double noise = entry_noise_scale_ * rng.normal();
        g_x(i, j) += noise;
        if (g_prev != nullptr) (*g_prev)(i, j) += noise;
      }
    }
  }

 private:
  double entry_noise_scale_;
};

class StochasticQuadratic : public AdditiveNoiseProblem {
 public:
  StochasticQuadratic(std::uint64_t seed, int m, int n, double l, double mu, double sigma,
                      double init_scale)
      : AdditiveNoiseProblem("stochastic_quadratic", m, n, sigma), h_(m, n), x_star_(m, n) {
    if (!(mu > 0.0) || !(l >= mu)) {
      throw InvalidConstants("stochastic_quadratic: need l >= mu > 0");
    }
    Rng rng = Rng(seed).substream(1);
    double h_min = l;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        h_(i, j) = std::exp(rng.uniform(std::log(mu), std::log(l)));
        h_min = std::min(h_min, h_(i, j));
      }
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) x_star_(i, j) = rng.normal();
    }
    initial_point_ = x_star_;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) initial_point_(i, j) += init_scale * rng.normal();
    }
    smoothness_l_ = l;
    gradient_dominance_mu_ = h_min;
    optimal_value_ = 0.0;
  }

  double value(const Matrix& x) const override {
    check_point_shape(x, "value");
    double s = 0.0;
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        const double d = x(i, j) - x_star_(i, j);
        s += h_(i, j) * d * d;
      }
    }
    return 0.5 * s;
  }

  Matrix gradient(const Matrix& x) const override {
    check_point_shape(x, "gradient");
    Matrix g(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) g(i, j) = h_(i, j) * (x(i, j) - x_star_(i, j));
    }
    return g;
  }

 private:
  Matrix h_;
  Matrix x_star_;
};

double pl_section(double x) { return x * x + 3.0 * std::sin(2.0 * x); }
double pl_section_deriv(double x) { return 2.0 * x + 6.0 * std::cos(2.0 * x); }
double pl_section_deriv2(double x) { return 2.0 - 12.0 * std::sin(2.0 * x); }

class SeparableNonconvex : public AdditiveNoiseProblem {
 public:
  SeparableNonconvex(std::uint64_t seed, int m, int n, double sigma, double init_scale)
      : AdditiveNoiseProblem("pl_nonconvex", m, n, sigma) {
    const PlScanResult scan = pl_scan();
    g_min_ = scan.g_min;
    smoothness_l_ = 14.0;  // |g''| <= 2 + 12
    gradient_dominance_mu_ = scan.mu;
    optimal_value_ = 0.0;
    Rng rng = Rng(seed).substream(1);
    initial_point_ = Matrix(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) initial_point_(i, j) = scan.x_min + init_scale * rng.normal();
    }
  }

  double value(const Matrix& x) const override {
    check_point_shape(x, "value");
    double s = 0.0;
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) s += pl_section(x(i, j)) - g_min_;
    }
    return s;
  }

  Matrix gradient(const Matrix& x) const override {
    check_point_shape(x, "gradient");
    Matrix g(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) g(i, j) = pl_section_deriv(x(i, j));
    }
    return g;
  }

 private:
  double g_min_;
};

// ---------------------------------------------------------------------------
// Row-subsampled least squares.

class MatrixFactorization : public Problem {
 public:
  MatrixFactorization(std::uint64_t seed, int m, int n, int k, double sigma, int batch_rows)
      : Problem("matrix_factorization", m, n), a_(m, n), b_(n, n) {
    if (k < 1 || k > std::min(m, n)) throw InvalidConstants("matrix_factorization: bad rank k");
    if (sigma < 0.0) throw InvalidConstants("matrix_factorization: sigma must be non-negative");
    batch_rows_ = batch_rows > 0 ? batch_rows : std::max(1, m / 8);
    if (batch_rows_ > m) throw InvalidConstants("matrix_factorization: batch_rows exceeds rows");

    Rng rng = Rng(seed).substream(1);
    const double bscale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) b_(i, j) = bscale * rng.normal();
    }
    Matrix left(m, k);
    Matrix right(n, k);
    const double fscale = 1.0 / std::sqrt(static_cast<double>(k));
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < k; ++j) left(i, j) = fscale * rng.normal();
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) right(i, j) = rng.normal();
    }
    a_ = matmul(left, transpose(right));
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a_(i, j) += sigma * rng.normal();
    }

    // b is square and generically invertible, so the residual can be
    // driven to zero and sigma_min(b)^2 is an exact gradient-dominance
    // constant for this least-squares objective.
    const SvdResult bsvd = compact_svd(b_);
    smoothness_l_ = bsvd.sigma.front() * bsvd.sigma.front();
    gradient_dominance_mu_ = bsvd.sigma.back() * bsvd.sigma.back();
    optimal_value_ = 0.0;

    initial_point_ = Matrix(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) initial_point_(i, j) = rng.normal();
    }

    // Measured batch-gradient noise level at a spread of probe points.
    Rng probe = Rng(seed).substream(2);
    double worst = 0.0;
    for (int p = 0; p < 8; ++p) {
      Matrix x = initial_point_;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) x(i, j) += (p == 0 ? 0.0 : probe.normal());
      }
      worst = std::max(worst, estimate_gradient_variance(*this, x, 2000, probe));
    }
    noise_sigma_ = 1.1 * std::sqrt(worst);
  }

  double value(const Matrix& x) const override {
    check_point_shape(x, "value");
    const Matrix r = sub(a_, matmul(x, transpose(b_)));
    const double f = frobenius_norm(r);
    return 0.5 * f * f;
  }

  Matrix gradient(const Matrix& x) const override {
    check_point_shape(x, "gradient");
    const Matrix r = sub(a_, matmul(x, transpose(b_)));
    return scale(matmul(r, b_), -1.0);
  }

 protected:
  void sample_grads(const Matrix& x, const Matrix* x_prev, Rng& rng, Matrix& g_x,
                    Matrix* g_prev, std::uint64_t& sample_id) const override {
    std::vector<int> batch(batch_rows_);
    for (int i = 0; i < batch_rows_; ++i) batch[i] = static_cast<int>(rng.uniform_int(rows_));
    sample_id = static_cast<std::uint64_t>(batch[0]);
    subsampled_gradient(x, batch, g_x);
    if (x_prev != nullptr) subsampled_gradient(*x_prev, batch, *g_prev);
  }

 private:
  // Gradient of (m / batch) * 0.5 * sum over sampled rows of the
  // squared residual; rows drawn with replacement keep it unbiased.
  void subsampled_gradient(const Matrix& x, const std::vector<int>& batch, Matrix& out) const {
    const double w = static_cast<double>(rows_) / static_cast<double>(batch.size());
    Matrix rows_residual(static_cast<int>(batch.size()), cols_);
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
      const int i = batch[bi];
      for (int j = 0; j < cols_; ++j) {
        double r = a_(i, j);
        for (int l = 0; l < cols_; ++l) r -= x(i, l) * b_(j, l);
        rows_residual(static_cast<int>(bi), j) = r;
      }
    }
    out = Matrix(rows_, cols_);
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
      const int i = batch[bi];
      for (int j = 0; j < cols_; ++j) {
        double g = 0.0;
        for (int l = 0; l < cols_; ++l) g += rows_residual(static_cast<int>(bi), l) * b_(l, j);
        out(i, j) -= w * g;
      }
    }
  }

  Matrix a_;
  Matrix b_;
  int batch_rows_;
};

// ---------------------------------------------------------------------------
// Two-layer tanh classifier, hidden weights trained.

class TinyMlp : public Problem {
 public:
  TinyMlp(std::uint64_t seed, int width, int dataset_size, double label_noise, int input_dim,
          int num_classes, int batch)
      : Problem("tiny_mlp", width, input_dim),
        width_(width),
        input_dim_(input_dim),
        num_classes_(num_classes),
        batch_(batch),
        dataset_size_(dataset_size),
        points_(dataset_size, input_dim),
        w2_(num_classes, width) {
    if (width < 1 || input_dim < 1 || num_classes < 2) {
      throw InvalidConstants("tiny_mlp: bad architecture");
    }
    if (batch < 1 || dataset_size < batch || dataset_size % batch != 0) {
      throw InvalidConstants("tiny_mlp: batch must divide dataset_size");
    }
    if (label_noise < 0.0 || label_noise > 1.0) {
      throw InvalidConstants("tiny_mlp: label_noise must lie in [0, 1]");
    }
    num_batches_ = dataset_size / batch;

    Rng rng = Rng(seed).substream(1);
    Matrix centers(num_classes, input_dim);
    for (int c = 0; c < num_classes; ++c) {
      for (int j = 0; j < input_dim; ++j) centers(c, j) = 2.0 * rng.normal();
    }
    labels_.resize(dataset_size);
    for (int i = 0; i < dataset_size; ++i) {
      const int c = i % num_classes;  // balanced classes
      labels_[i] = c;
      for (int j = 0; j < input_dim; ++j) points_(i, j) = centers(c, j) + rng.normal();
      if (rng.uniform() < label_noise) labels_[i] = static_cast<int>(rng.uniform_int(num_classes));
    }
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(width));
    for (int c = 0; c < num_classes; ++c) {
      for (int j = 0; j < width; ++j) w2_(c, j) = w2_scale * rng.normal();
    }
    initial_point_ = Matrix(width, input_dim);
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (int i = 0; i < width; ++i) {
      for (int j = 0; j < input_dim; ++j) initial_point_(i, j) = w1_scale * rng.normal();
    }

    probe_constants(seed);
  }

  double value(const Matrix& x) const override {
    check_point_shape(x, "value");
    double total = 0.0;
    for (int b = 0; b < num_batches_; ++b) total += batch_loss(x, b, nullptr);
    return total / num_batches_;
  }

  Matrix gradient(const Matrix& x) const override {
    check_point_shape(x, "gradient");
    Matrix g(width_, input_dim_);
    Matrix gb(width_, input_dim_);
    for (int b = 0; b < num_batches_; ++b) {
      batch_loss(x, b, &gb);
      add_scaled(g, gb, 1.0 / num_batches_);
    }
    return g;
  }

  int num_batches() const { return num_batches_; }

  // Exposed for tests: loss and gradient on one mini-batch.
  double batch_objective(const Matrix& x, int batch_index, Matrix* grad) const {
    return batch_loss(x, batch_index, grad);
  }

 protected:
  void sample_grads(const Matrix& x, const Matrix* x_prev, Rng& rng, Matrix& g_x,
                    Matrix* g_prev, std::uint64_t& sample_id) const override {
    const int b = static_cast<int>(rng.uniform_int(num_batches_));
    sample_id = static_cast<std::uint64_t>(b);
    batch_loss(x, b, &g_x);
    if (x_prev != nullptr) batch_loss(*x_prev, b, g_prev);
  }

 private:
  double batch_loss(const Matrix& x, int batch_index, Matrix* grad) const {
    const int row0 = batch_index * batch_;
    // hidden activations for the batch
    Matrix h(batch_, width_);
    for (int i = 0; i < batch_; ++i) {
      const int r = row0 + i;
      for (int u = 0; u < width_; ++u) {
        double pre = 0.0;
        for (int j = 0; j < input_dim_; ++j) pre += x(u, j) * points_(r, j);
        h(i, u) = std::tanh(pre);
      }
    }
    double loss = 0.0;
    Matrix dpre(batch_, width_);
    std::vector<double> logits(num_classes_);
    for (int i = 0; i < batch_; ++i) {
      double zmax = -1e300;
      for (int c = 0; c < num_classes_; ++c) {
        double z = 0.0;
        for (int u = 0; u < width_; ++u) z += w2_(c, u) * h(i, u);
        logits[c] = z;
        zmax = std::max(zmax, z);
      }
      double total = 0.0;
      for (int c = 0; c < num_classes_; ++c) total += std::exp(logits[c] - zmax);
      const int y = labels_[row0 + i];
      loss += -(logits[y] - zmax) + std::log(total);
      if (grad != nullptr) {
        for (int u = 0; u < width_; ++u) {
          double dh = 0.0;
          for (int c = 0; c < num_classes_; ++c) {
            const double p = std::exp(logits[c] - zmax) / total;
            const double dz = (p - (c == y ? 1.0 : 0.0)) / batch_;
            dh += dz * w2_(c, u);
          }
          dpre(i, u) = dh * (1.0 - h(i, u) * h(i, u));
        }
      }
    }
    if (grad != nullptr) {
      *grad = Matrix(width_, input_dim_);
      for (int u = 0; u < width_; ++u) {
        for (int j = 0; j < input_dim_; ++j) {
          double g = 0.0;
          for (int i = 0; i < batch_; ++i) g += dpre(i, u) * points_(row0 + i, j);
          (*grad)(u, j) = g;
        }
      }
    }
    return loss / batch_;
  }

  // Measured smoothness (max observed gradient-Lipschitz ratio, plus a
  // power refinement at the initial point) and batch-gradient noise.
  void probe_constants(std::uint64_t seed) {
    Rng rng = Rng(seed).substream(2);
    double l_max = 0.0;
    for (int p = 0; p < 200; ++p) {
      Matrix x1 = initial_point_;
      Matrix x2 = initial_point_;
      const double spread = (p % 2 == 0) ? 0.5 : 2.0;
      for (int i = 0; i < width_; ++i) {
        for (int j = 0; j < input_dim_; ++j) {
          x1(i, j) += spread * rng.normal();
          x2(i, j) = x1(i, j) + 1e-3 * rng.normal();
        }
      }
      const Matrix dg = sub(gradient(x1), gradient(x2));
      const double dx = frobenius_norm(sub(x1, x2));
      if (dx > 0.0) l_max = std::max(l_max, frobenius_norm(dg) / dx);
    }
    Matrix dir(width_, input_dim_);
    for (int i = 0; i < width_; ++i) {
      for (int j = 0; j < input_dim_; ++j) dir(i, j) = rng.normal();
    }
    const Matrix g0 = gradient(initial_point_);
    for (int it = 0; it < 25; ++it) {
      const double dn = frobenius_norm(dir);
      if (dn == 0.0) break;
      dir = scale(dir, 1e-4 / dn);
      Matrix x1 = initial_point_;
      add_scaled(x1, dir, 1.0);
      const Matrix dg = sub(gradient(x1), g0);
      l_max = std::max(l_max, frobenius_norm(dg) / 1e-4);
      dir = dg;
    }
    smoothness_l_ = 1.1 * l_max;

    double var_max = 0.0;
    for (int p = 0; p < 6; ++p) {
      Matrix x = initial_point_;
      for (int i = 0; i < width_ && p > 0; ++i) {
        for (int j = 0; j < input_dim_; ++j) x(i, j) += 0.5 * rng.normal();
      }
      // exact finite-population variance across the batch partition
      const Matrix full = gradient(x);
      double var = 0.0;
      Matrix gb(width_, input_dim_);
      for (int b = 0; b < num_batches_; ++b) {
        batch_loss(x, b, &gb);
        const double d = frobenius_norm(sub(gb, full));
        var += d * d;
      }
      var_max = std::max(var_max, var / num_batches_);
    }
    noise_sigma_ = 1.1 * std::sqrt(var_max);
  }

  int width_;
  int input_dim_;
  int num_classes_;
  int batch_;
  int dataset_size_;
  int num_batches_;
  Matrix points_;
  Matrix w2_;
  std::vector<int> labels_;
};

}  // namespace

PlScanResult pl_scan(double resolution) {
  if (resolution <= 0.0) throw InvalidConstants("pl_scan: resolution must be positive");
  const double lo = -10.0;
  const double hi = 10.0;
  const long steps = static_cast<long>((hi - lo) / resolution);

  double x_best = lo;
  double g_best = pl_section(lo);
  for (long i = 1; i <= steps; ++i) {
    const double x = lo + resolution * static_cast<double>(i);
    const double g = pl_section(x);
    if (g < g_best) {
      g_best = g;
      x_best = x;
    }
  }
  // Newton refinement of the minimizer.
  for (int it = 0; it < 50; ++it) {
    const double d1 = pl_section_deriv(x_best);
    const double d2 = pl_section_deriv2(x_best);
    if (d2 <= 0.0) break;
    const double step = d1 / d2;
    x_best -= step;
    if (std::abs(step) < 1e-15) break;
  }
  g_best = pl_section(x_best);

  PlScanResult out;
  out.x_min = x_best;
  out.g_min = g_best;
  out.mu = 1e300;
  out.mu_arg = x_best;
  for (long i = 0; i <= steps; ++i) {
    const double x = lo + resolution * static_cast<double>(i);
    const double gap = pl_section(x) - g_best;
    if (gap < 1e-9) continue;
    const double d = pl_section_deriv(x);
    const double r = d * d / (2.0 * gap);
    if (r < out.mu) {
      out.mu = r;
      out.mu_arg = x;
    }
  }
  return out;
}

std::unique_ptr<Problem> make_stochastic_quadratic(std::uint64_t seed, int m, int n, double l,
                                                   double mu, double sigma, double init_scale) {
  return std::make_unique<StochasticQuadratic>(seed, m, n, l, mu, sigma, init_scale);
}

std::unique_ptr<Problem> make_pl_nonconvex(std::uint64_t seed, int m, int n, double sigma,
                                           double init_scale) {
  return std::make_unique<SeparableNonconvex>(seed, m, n, sigma, init_scale);
}

std::unique_ptr<Problem> make_matrix_factorization(std::uint64_t seed, int m, int n, int k,
                                                   double sigma, int batch_rows) {
  return std::make_unique<MatrixFactorization>(seed, m, n, k, sigma, batch_rows);
}

std::unique_ptr<Problem> make_tiny_mlp(std::uint64_t seed, int width, int dataset_size,
                                       double label_noise, int input_dim, int num_classes,
                                       int batch) {
  return std::make_unique<TinyMlp>(seed, width, dataset_size, label_noise, input_dim, num_classes,
                                   batch);
}

double estimate_gradient_variance(const Problem& problem, const Matrix& x, int num_samples,
                                  Rng& rng) {
  if (num_samples < 2) throw InvalidConstants("estimate_gradient_variance: need >= 2 samples");
  // Welford's recurrence avoids the cancellation of the sum-of-squares
  // shortcut, so noise-free oracles report a variance of exactly zero.
  Matrix mean(problem.rows(), problem.cols());
  double sum_sq_dev = 0.0;
  for (int s = 0; s < num_samples; ++s) {
    const Matrix g = problem.sample_gradient(x, rng);
    const Matrix delta = sub(g, mean);
    add_scaled(mean, delta, 1.0 / (s + 1));
    sum_sq_dev += frobenius_dot(delta, sub(g, mean));
  }
  return std::max(sum_sq_dev / (num_samples - 1), 0.0);
}

Matrix estimate_gradient_mean(const Problem& problem, const Matrix& x, int num_samples, Rng& rng) {
  if (num_samples < 1) throw InvalidConstants("estimate_gradient_mean: need >= 1 sample");
  Matrix mean(problem.rows(), problem.cols());
  for (int s = 0; s < num_samples; ++s) {
    add_scaled(mean, problem.sample_gradient(x, rng), 1.0);
  }
  return scale(mean, 1.0 / num_samples);
}

}  // namespace muonvr
