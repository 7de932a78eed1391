// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "muonvr/optimizer.hpp"
#include "muonvr/problems.hpp"
#include "muonvr/schedule.hpp"
#include "muonvr/trace.hpp"

namespace muonvr {

// ---------------------------------------------------------------------------
// Per-step descent audit.
//
// On a trace with full diagnostics, checks at every step
//   f(x_{t+1}) <= f(x_t) - eta_t ||m_t||_F
//                 + (eta_t a / 2) ||grad_t - m_t||_F^2
//                 + eta_t k / (2 a) + l eta_t^2 k / 2
// where k = min(m, n) bounds the squared norm of the orthogonalized
// direction and a is the trade-off weight.  The inequality is pathwise
// for exact orthogonalization, so violations beyond the numeric slack
// 1e-9 * (1 + |f(x_t)|) indicate a real defect.

struct DescentAudit {
  long checked = 0;
  long violations = 0;
  double worst_margin = 0.0;  // min over t of rhs - lhs, no slack applied
};

// Fixed trade-off weight a > 0.
DescentAudit check_descent_inequality(const Trace& trace, double alpha);
// Step-dependent weight a_t = eta_t^(-1/3) / l, the choice used in the
// analysis of the decaying schedules.
DescentAudit check_descent_inequality_adaptive(const Trace& trace);

// ---------------------------------------------------------------------------
// Deterministic sequence inequalities.
//
// Step-dominance form: given e_t >= 0, forcing a_t >= 0 and
// alpha_t = t^(-p) with p in (0, 1], the premise
//   e_{t+1} <= (1 - alpha_{t+1}) e_t + a_{t+1}
// implies  alpha_t e_t <= 2 (e_t - e_{t+1} + a_{t+1})  for every t.
//
// Weighted form: with eps_t = t^(-p), the premise
//   a_{t+1} <= (1 - eps_{t+1}) a_t + b_{t+1}
// implies  sqrt(eps_t) a_t
//            <= 4 (a_t / sqrt(eps_t) - a_{t+1} / sqrt(eps_{t+1})
//                  + b_{t+1} / sqrt(eps_{t+1})).
//
// Inputs are 0-based with seq[i] the value at step i+1; forcing[i]
// enters the transition from seq[i-1] to seq[i] (forcing[0] unused).
// Both throw PremiseViolated when the hypothesis fails.

struct SeqCheckReport {
  long checked = 0;
  long violations = 0;
  double worst_margin = 0.0;
};

SeqCheckReport check_seq_step_dominance(const std::vector<double>& seq,
                                        const std::vector<double>& forcing, double p);
SeqCheckReport check_seq_weighted(const std::vector<double>& seq,
                                  const std::vector<double>& forcing, double p);

// Randomized premise-satisfying instance for either inequality.
struct SeqInstance {
  std::vector<double> seq;
  std::vector<double> forcing;
  double p = 0.5;
};

enum class SeqInequalityKind { kStepDominance, kWeighted };

SeqInstance make_seq_instance(SeqInequalityKind kind, std::uint64_t seed);

struct SeqSuiteReport {
  int instances = 0;
  long checked = 0;
  long violations = 0;
  double worst_margin = 0.0;
};

SeqSuiteReport run_seq_inequality_suite(SeqInequalityKind kind, int instances, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte-Carlo audit of the momentum-error recursion.
//
// Runs num_seeds independent trajectories and, at each transition,
// compares a paired estimate against the deterministic part of the
// one-step bound:
//   EMA:        E s_{t+1} <= b_{t+1} E s_t
//                 + b_{t+1}^2/(1-b_{t+1}) l^2 eta_t^2 k + (1-b_{t+1})^2 sigma^2
//   same-pair:  E s_{t+1} <= b_{t+1} E s_t + 2 b_{t+1}^2 l^2 E ||dx_t||^2
//                 + 2 (1-b_{t+1})^2 sigma^2
// with s_t the squared momentum error.  Estimate terms sharing a seed
// are paired before averaging, so each row is mean(D) vs bound + 3 SE.

struct RecursionCheckRow {
  long t = 0;  // transition t -> t+1
  double paired_mean = 0.0;
  double bound = 0.0;
  double stderr_mean = 0.0;
  double margin = 0.0;  // bound + 3*SE - paired_mean
  bool ok = true;
};

struct RecursionCheckReport {
  std::vector<RecursionCheckRow> rows;
  // same-pair option only: E s_1 <= sigma^2
  bool has_initial = false;
  RecursionCheckRow initial;
  long violations = 0;
  double worst_margin = 0.0;
};

RecursionCheckReport check_momentum_error_recursion(const Problem& problem, MuonOption option,
                                                    const Schedule& schedule, long total_steps,
                                                    int num_seeds, std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// Exact decomposition of the same-pair momentum error.
//
// At one transition, splits ||s_{t+1}||^2 into the three terms of the
// correction-weight algebra and cross-checks the aggregate formula for
// the residual term, which must vanish when gamma = 1.

struct GammaTermReport {
  double direct_mean = 0.0;        // mean ||s_{t+1}||^2
  double reconstructed_mean = 0.0; // mean of the three-term split
  double identity_gap = 0.0;       // |direct - reconstructed|, exact algebra
  double residual_formula = 0.0;   // residual from aggregate quantities
  double residual_terms = 0.0;     // mean of the two gamma-dependent terms
  double residual_gap = 0.0;
  double stderr_direct = 0.0;
};

GammaTermReport check_gamma_term_decomposition(const Problem& problem, double beta, double gamma,
                                               double eta, long t_check, int num_seeds,
                                               std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// Empirical convergence-rate fits.

enum class RateMetric {
  kErgodicGradAvg,  // running minimum of (1/t) integral of E||grad||
  kSuboptGap,       // E f(x_t) - f*
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  long points = 0;
};

// Least squares of log10(metric) on log10(t) over sampled steps in
// [t_lo, t_hi].  Traces must share a sampling pattern and carry
// diagnostics at the sampled steps.
RateFit fit_rate(const std::vector<Trace>& traces, RateMetric metric, long t_lo, long t_hi);

// Flatness fit of the normalized gap u(t) = gap(t) * t^q / (ln t)^2:
// slope of log10(u) on log10(t), plus the excursion ratio
// max u / u(start) over the window.
struct NormalizedGapReport {
  RateFit fit;
  double start_value = 0.0;
  double max_value = 0.0;
  double ratio = 0.0;
};

NormalizedGapReport check_normalized_gap(const std::vector<Trace>& traces, double q, long t_lo,
                                         long t_hi);

// Seed-mean running average of the true gradient norm at the last
// sampled step; the ranking metric used by the comparison command.
double final_ergodic_grad(const std::vector<Trace>& traces);

}  // namespace muonvr
