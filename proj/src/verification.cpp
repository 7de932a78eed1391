// SPDX-License-Identifier: Apache-2.0
#include "muonvr/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "muonvr/errors.hpp"
#include "muonvr/parallel.hpp"

namespace muonvr {

namespace {

void require_full_diagnostics(const Trace& trace) {
  if (trace.records.empty()) throw MissingDiagnostics("trace has no records");
  long expect = 1;
  for (const StepRecord& r : trace.records) {
    if (r.t != expect) {
      throw MissingDiagnostics("trace steps are not consecutive from 1 (saw t=" +
                               std::to_string(r.t) + ", expected " + std::to_string(expect) + ")");
    }
    if (!r.has_diagnostics) {
      throw MissingDiagnostics("record at t=" + std::to_string(r.t) + " lacks diagnostics");
    }
    ++expect;
  }
}

DescentAudit descent_audit_impl(const Trace& trace, double fixed_alpha, bool adaptive) {
  require_full_diagnostics(trace);
  const double l = trace.meta.smoothness_l;
  if (!(l > 0.0)) throw ValidationError("descent audit needs a positive smoothness constant");
  if (!adaptive && !(fixed_alpha > 0.0)) {
    throw InvalidConstants("descent audit: alpha must be positive");
  }
  const int k = std::min(trace.meta.rows, trace.meta.cols);
  if (k < 1) throw ValidationError("descent audit needs the parameter shape in the metadata");

  DescentAudit audit;
  audit.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const StepRecord& r = trace.records[i];
    const double f_next = trace.records[i + 1].f;
    const double alpha = adaptive ? std::pow(r.eta, -1.0 / 3.0) / l : fixed_alpha;
    const double err = r.momentum_err_fnorm;
    const double rhs = r.f - r.eta * r.momentum_fnorm + 0.5 * r.eta * alpha * err * err +
                       r.eta * k / (2.0 * alpha) + 0.5 * l * r.eta * r.eta * k;
    const double margin = rhs - f_next;
    audit.checked += 1;
    audit.worst_margin = std::min(audit.worst_margin, margin);
    if (margin < -1e-9 * (1.0 + std::abs(r.f))) audit.violations += 1;
  }
  if (audit.checked == 0) audit.worst_margin = 0.0;
  return audit;
}

double premise_rhs(double prev, double forcing, double decay) {
  return (1.0 - decay) * prev + forcing;
}

}  // namespace

DescentAudit check_descent_inequality(const Trace& trace, double alpha) {
  return descent_audit_impl(trace, alpha, false);
}

DescentAudit check_descent_inequality_adaptive(const Trace& trace) {
  return descent_audit_impl(trace, 0.0, true);
}

// ---------------------------------------------------------------------------

SeqCheckReport check_seq_step_dominance(const std::vector<double>& seq,
                                        const std::vector<double>& forcing, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidConstants("step-dominance check: p must lie in (0, 1]");
  if (seq.size() != forcing.size() || seq.size() < 2) {
    throw InvalidConstants("step-dominance check: need matching sequences of length >= 2");
  }
  const std::size_t n = seq.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(seq[i] >= 0.0) || !(forcing[i] >= 0.0)) {
      throw PremiseViolated("step-dominance check: sequences must be non-negative");
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double alpha = std::pow(static_cast<double>(i + 1), -p);
    const double rhs = premise_rhs(seq[i - 1], forcing[i], alpha);
    // Tolerate rounding so sequences meeting the premise with equality pass.
    if (seq[i] > rhs + 1e-12 * std::max({1.0, seq[i - 1], rhs})) {
      throw PremiseViolated("step-dominance premise fails at t=" + std::to_string(i + 1));
    }
  }
  SeqCheckReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double alpha_t = std::pow(static_cast<double>(i + 1), -p);
    const double lhs = alpha_t * seq[i];
    const double rhs = 2.0 * (seq[i] - seq[i + 1] + forcing[i + 1]);
    const double margin = rhs - lhs;
    rep.checked += 1;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)})) rep.violations += 1;
  }
  if (rep.checked == 0) rep.worst_margin = 0.0;
  return rep;
}

SeqCheckReport check_seq_weighted(const std::vector<double>& seq,
                                  const std::vector<double>& forcing, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidConstants("weighted check: p must lie in (0, 1]");
  if (seq.size() != forcing.size() || seq.size() < 2) {
    throw InvalidConstants("weighted check: need matching sequences of length >= 2");
  }
  const std::size_t n = seq.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(seq[i] >= 0.0) || !(forcing[i] >= 0.0)) {
      throw PremiseViolated("weighted check: sequences must be non-negative");
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double eps = std::pow(static_cast<double>(i + 1), -p);
    const double rhs = premise_rhs(seq[i - 1], forcing[i], eps);
    // Tolerate rounding so sequences meeting the premise with equality pass.
    if (seq[i] > rhs + 1e-12 * std::max({1.0, seq[i - 1], rhs})) {
      throw PremiseViolated("weighted premise fails at t=" + std::to_string(i + 1));
    }
  }
  SeqCheckReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double rt_eps_t = std::pow(static_cast<double>(i + 1), -0.5 * p);
    const double rt_eps_next = std::pow(static_cast<double>(i + 2), -0.5 * p);
    const double lhs = rt_eps_t * seq[i];
    const double rhs =
        4.0 * (seq[i] / rt_eps_t - seq[i + 1] / rt_eps_next + forcing[i + 1] / rt_eps_next);
    const double margin = rhs - lhs;
    rep.checked += 1;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)})) rep.violations += 1;
  }
  if (rep.checked == 0) rep.worst_margin = 0.0;
  return rep;
}

SeqInstance make_seq_instance(SeqInequalityKind kind, std::uint64_t seed) {
  (void)kind;  // both forms share the same premise shape
  Rng rng(seed);
  SeqInstance inst;
  inst.p = rng.uniform() < 0.1 ? 1.0 : rng.uniform(0.05, 1.0);
  const long horizon = 2 + static_cast<long>(rng.uniform_int(999));
  const double scl = std::pow(10.0, rng.uniform(-3.0, 3.0));
  inst.seq.resize(horizon);
  inst.forcing.resize(horizon);
  inst.seq[0] = std::abs(rng.normal()) * scl;
  inst.forcing[0] = 0.0;
  for (long i = 1; i < horizon; ++i) {
    inst.forcing[i] = rng.uniform() < 0.2 ? 0.0 : std::abs(rng.normal()) * scl;
    const double decay = std::pow(static_cast<double>(i + 1), -inst.p);
    const double rhs = premise_rhs(inst.seq[i - 1], inst.forcing[i], decay);
    const double theta = rng.uniform() < 0.2 ? 1.0 : rng.uniform();
    inst.seq[i] = theta * rhs;
  }
  return inst;
}

SeqSuiteReport run_seq_inequality_suite(SeqInequalityKind kind, int instances, std::uint64_t seed) {
  SeqSuiteReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < instances; ++i) {
    const SeqInstance inst = make_seq_instance(kind, seed + static_cast<std::uint64_t>(i));
    const SeqCheckReport one = kind == SeqInequalityKind::kStepDominance
                                   ? check_seq_step_dominance(inst.seq, inst.forcing, inst.p)
                                   : check_seq_weighted(inst.seq, inst.forcing, inst.p);
    rep.instances += 1;
    rep.checked += one.checked;
    rep.violations += one.violations;
    rep.worst_margin = std::min(rep.worst_margin, one.worst_margin);
  }
  if (rep.instances == 0) rep.worst_margin = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

RecursionCheckReport check_momentum_error_recursion(const Problem& problem, MuonOption option,
                                                    const Schedule& schedule, long total_steps,
                                                    int num_seeds, std::uint64_t base_seed) {
  if (num_seeds < 100) {
    throw InsufficientSeeds("momentum-error recursion check needs at least 100 seeds");
  }
  if (total_steps < 2) throw InvalidConstants("momentum-error recursion check: need >= 2 steps");
  if (option != MuonOption::kMvr1Gamma0 && option != MuonOption::kMvr2) {
    throw ValidationError("momentum-error recursion check covers the EMA and same-pair options");
  }

  const std::size_t t_count = static_cast<std::size_t>(total_steps);
  std::vector<std::vector<double>> s_sq(num_seeds);
  std::vector<std::vector<double>> upd_sq(num_seeds);

  StepOptions opts;
  opts.option = option;
  opts.schedule = schedule;
  opts.orthogonalizer = Orthogonalizer::kExact;
  opts.diagnostics = true;

  parallel_for(num_seeds, [&](long i) {
    Rng rng = Rng(base_seed).substream(static_cast<std::uint64_t>(i));
    MuonState state = MuonState::init(problem.initial_point());
    auto& s_row = s_sq[i];
    auto& u_row = upd_sq[i];
    s_row.resize(t_count);
    u_row.resize(t_count);
    for (long t = 1; t <= total_steps; ++t) {
      const StepRecord rec = muon_step(state, problem, rng, opts);
      s_row[t - 1] = rec.momentum_err_fnorm * rec.momentum_err_fnorm;
      u_row[t - 1] = rec.update_fnorm * rec.update_fnorm;
    }
  });

  const double l = problem.smoothness_l();
  const double sigma_sq = problem.noise_sigma() * problem.noise_sigma();
  const int k = std::min(problem.rows(), problem.cols());

  RecursionCheckReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();

  const ScheduleValue sv1 = schedule_eval(schedule, 1);
  const double gamma_eff = option == MuonOption::kMvr1Gamma0 ? 0.0 : sv1.gamma;
  const double init_coeff = 1.0 - sv1.beta + gamma_eff * sv1.beta;
  if (std::abs(init_coeff - 1.0) < 1e-12) {
    double mean = 0.0;
    for (int i = 0; i < num_seeds; ++i) mean += s_sq[i][0];
    mean /= num_seeds;
    double var = 0.0;
    for (int i = 0; i < num_seeds; ++i) {
      const double d = s_sq[i][0] - mean;
      var += d * d;
    }
    var /= (num_seeds - 1);
    rep.has_initial = true;
    rep.initial.t = 1;
    rep.initial.paired_mean = mean;
    rep.initial.bound = sigma_sq;
    rep.initial.stderr_mean = std::sqrt(var / num_seeds);
    rep.initial.margin = rep.initial.bound + 3.0 * rep.initial.stderr_mean - mean;
    rep.initial.ok = rep.initial.margin >= -1e-12 * (1.0 + sigma_sq);
    if (!rep.initial.ok) rep.violations += 1;
    rep.worst_margin = std::min(rep.worst_margin, rep.initial.margin);
  }

  for (long t = 1; t < total_steps; ++t) {
    const double eta_t = schedule_eval(schedule, t).eta;
    const double beta_next = schedule_eval(schedule, t + 1).beta;
    RecursionCheckRow row;
    row.t = t;

    double mean = 0.0;
    double bound_extra = 0.0;
    std::vector<double> paired(num_seeds);
    if (option == MuonOption::kMvr1Gamma0) {
      for (int i = 0; i < num_seeds; ++i) paired[i] = s_sq[i][t] - beta_next * s_sq[i][t - 1];
      bound_extra = beta_next * beta_next / (1.0 - beta_next) * l * l * eta_t * eta_t * k +
                    (1.0 - beta_next) * (1.0 - beta_next) * sigma_sq;
    } else {
      for (int i = 0; i < num_seeds; ++i) {
        paired[i] = s_sq[i][t] - beta_next * s_sq[i][t - 1] -
                    2.0 * beta_next * beta_next * l * l * upd_sq[i][t - 1];
      }
      bound_extra = 2.0 * (1.0 - beta_next) * (1.0 - beta_next) * sigma_sq;
    }
    for (int i = 0; i < num_seeds; ++i) mean += paired[i];
    mean /= num_seeds;
    double var = 0.0;
    for (int i = 0; i < num_seeds; ++i) {
      const double d = paired[i] - mean;
      var += d * d;
    }
    var /= (num_seeds - 1);

    row.paired_mean = mean;
    row.bound = bound_extra;
    row.stderr_mean = std::sqrt(var / num_seeds);
    row.margin = row.bound + 3.0 * row.stderr_mean - mean;
    row.ok = row.margin >= -1e-12 * (1.0 + std::abs(row.bound));
    if (!row.ok) rep.violations += 1;
    rep.worst_margin = std::min(rep.worst_margin, row.margin);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------

GammaTermReport check_gamma_term_decomposition(const Problem& problem, double beta, double gamma,
                                               double eta, long t_check, int num_seeds,
                                               std::uint64_t base_seed) {
  if (num_seeds < 100) throw InsufficientSeeds("decomposition check needs at least 100 seeds");
  if (t_check < 1) throw InvalidConstants("decomposition check: t_check must be >= 1");

  Schedule sched;
  sched.kind = ScheduleKind::kConstant;
  sched.eta0 = eta;
  sched.beta0 = beta;
  sched.gamma0 = gamma;
  StepOptions opts;
  opts.option = MuonOption::kMvr2;
  opts.schedule = sched;
  opts.orthogonalizer = Orthogonalizer::kExact;
  opts.diagnostics = false;

  struct PerSeed {
    double direct, t1, t2, t3, d_delta, dot_de, dot_dr, dot_ds;
  };
  std::vector<PerSeed> acc(num_seeds);

  parallel_for(num_seeds, [&](long i) {
    Rng rng = Rng(base_seed).substream(static_cast<std::uint64_t>(i));
    MuonState state = MuonState::init(problem.initial_point());
    for (long t = 0; t < t_check; ++t) muon_step(state, problem, rng, opts);

    const Matrix grad_now = problem.gradient(state.prev_x);
    const Matrix grad_next = problem.gradient(state.x);
    const Matrix s_t = sub(state.m, grad_now);
    const SamplePair pair = problem.sample_pair(state.x, state.prev_x, rng);
    const Matrix delta = sub(pair.grad_at_x, pair.grad_at_prev);
    const Matrix noise_next = sub(pair.grad_at_x, grad_next);
    const Matrix mean_delta = sub(grad_next, grad_now);

    // s_{t+1} = a + b with b the gamma-weighted correction residual
    Matrix a = scale(noise_next, 1.0 - beta);
    add_scaled(a, s_t, beta);
    add_scaled(a, delta, beta);
    add_scaled(a, mean_delta, -beta);
    const Matrix b = scale(delta, beta * (gamma - 1.0));
    const Matrix s_next = add(a, b);

    PerSeed& p = acc[i];
    p.direct = frobenius_dot(s_next, s_next);
    p.t1 = frobenius_dot(a, a);
    p.t2 = frobenius_dot(b, b);
    p.t3 = 2.0 * beta * (gamma - 1.0) * frobenius_dot(delta, a);
    p.d_delta = frobenius_dot(delta, delta);
    // same plug-in moment the aggregate formula uses for E<delta, mean shift>
    p.dot_de = frobenius_dot(delta, mean_delta);
    p.dot_dr = frobenius_dot(delta, noise_next);
    p.dot_ds = frobenius_dot(delta, s_t);
  });

  double direct = 0, recon = 0, resid_terms = 0, d_delta = 0, d_mean = 0, dot_dr = 0, dot_ds = 0;
  for (const PerSeed& p : acc) {
    direct += p.direct;
    recon += p.t1 + p.t2 + p.t3;
    resid_terms += p.t2 + p.t3;
    d_delta += p.d_delta;
    d_mean += p.dot_de;
    dot_dr += p.dot_dr;
    dot_ds += p.dot_ds;
  }
  const double inv = 1.0 / num_seeds;
  direct *= inv;
  recon *= inv;
  resid_terms *= inv;
  d_delta *= inv;
  d_mean *= inv;
  dot_dr *= inv;
  dot_ds *= inv;

  double var = 0.0;
  for (const PerSeed& p : acc) {
    const double d = p.direct - direct;
    var += d * d;
  }
  var /= (num_seeds - 1);

  GammaTermReport rep;
  rep.direct_mean = direct;
  rep.reconstructed_mean = recon;
  rep.identity_gap = std::abs(direct - recon);
  rep.stderr_direct = std::sqrt(var * inv);
  rep.residual_terms = resid_terms;
  if (d_delta > 0.0) {
    const double b_hat = (1.0 - beta) * dot_dr + beta * dot_ds;
    const double a_hat = (b_hat + beta * (d_delta - d_mean)) / d_delta;
    const double w = beta * (1.0 - gamma) - a_hat;
    rep.residual_formula = d_delta * w * w - a_hat * a_hat * d_delta;
  } else {
    rep.residual_formula = 0.0;
  }
  rep.residual_gap = std::abs(rep.residual_formula - rep.residual_terms);
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct SeriesPoint {
  double t;
  double value;
};

std::vector<SeriesPoint> metric_series(const std::vector<Trace>& traces, RateMetric metric) {
  const std::vector<AggregateRow> agg = aggregate_traces(traces);
  for (const Trace& tr : traces) {
    for (const StepRecord& r : tr.records) {
      if (!r.has_diagnostics) {
        throw MissingDiagnostics("rate fit needs diagnostics at every sampled step");
      }
    }
  }
  std::vector<SeriesPoint> pts;
  pts.reserve(agg.size());
  if (metric == RateMetric::kErgodicGradAvg) {
    double integral = 0.0;
    for (std::size_t i = 0; i < agg.size(); ++i) {
      const double t = static_cast<double>(agg[i].t);
      const double g = agg[i].mean[1];
      if (i == 0) {
        integral = g * t;
      } else {
        const double t_prev = static_cast<double>(agg[i - 1].t);
        integral += 0.5 * (g + agg[i - 1].mean[1]) * (t - t_prev);
      }
      pts.push_back({t, integral / t});
    }
    // running minimum
    double best = std::numeric_limits<double>::infinity();
    for (SeriesPoint& p : pts) {
      best = std::min(best, p.value);
      p.value = best;
    }
  } else {
    double f_star = 0.0;
    bool have = false;
    for (const Trace& tr : traces) {
      if (tr.meta.optimal_value) {
        if (have && *tr.meta.optimal_value != f_star) {
          throw ValidationError("rate fit: traces disagree on the optimal value");
        }
        f_star = *tr.meta.optimal_value;
        have = true;
      }
    }
    if (!have) throw ValidationError("suboptimality fit needs a known optimal value");
    for (const AggregateRow& row : agg) {
      pts.push_back({static_cast<double>(row.t), row.mean[0] - f_star});
    }
  }
  return pts;
}

RateFit loglog_fit(const std::vector<SeriesPoint>& pts) {
  if (pts.size() < 2) throw DegenerateWindow("rate fit: fewer than two usable points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const SeriesPoint& p : pts) {
    const double x = std::log10(p.t);
    const double y = std::log10(p.value);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double n = static_cast<double>(pts.size());
  const double det = n * sxx - sx * sx;
  if (det <= 0.0) throw DegenerateWindow("rate fit: window has no spread in t");
  RateFit fit;
  fit.points = static_cast<long>(pts.size());
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0.0;
  const double mean_y = sy / n;
  double ss_tot = 0.0;
  for (const SeriesPoint& p : pts) {
    const double x = std::log10(p.t);
    const double y = std::log10(p.value);
    const double e = y - (fit.intercept + fit.slope * x);
    ss_res += e * e;
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

std::vector<SeriesPoint> window_positive(const std::vector<SeriesPoint>& pts, long t_lo,
                                         long t_hi) {
  if (t_lo < 1 || t_hi <= t_lo) throw DegenerateWindow("rate fit: bad window");
  std::vector<SeriesPoint> out;
  for (const SeriesPoint& p : pts) {
    if (p.t >= static_cast<double>(t_lo) && p.t <= static_cast<double>(t_hi) && p.value > 0.0) {
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

RateFit fit_rate(const std::vector<Trace>& traces, RateMetric metric, long t_lo, long t_hi) {
  return loglog_fit(window_positive(metric_series(traces, metric), t_lo, t_hi));
}

double final_ergodic_grad(const std::vector<Trace>& traces) {
  const std::vector<SeriesPoint> pts = metric_series(traces, RateMetric::kErgodicGradAvg);
  if (pts.empty()) throw DegenerateWindow("no sampled steps");
  return pts.back().value;
}

NormalizedGapReport check_normalized_gap(const std::vector<Trace>& traces, double q, long t_lo,
                                         long t_hi) {
  std::vector<SeriesPoint> pts =
      window_positive(metric_series(traces, RateMetric::kSuboptGap), std::max(t_lo, 2L), t_hi);
  for (SeriesPoint& p : pts) {
    const double lt = std::log(p.t);
    p.value = p.value * std::pow(p.t, q) / (lt * lt);
  }
  if (pts.empty()) throw DegenerateWindow("normalized gap: no usable points in window");
  NormalizedGapReport rep;
  rep.start_value = pts.front().value;
  rep.max_value = pts.front().value;
  for (const SeriesPoint& p : pts) rep.max_value = std::max(rep.max_value, p.value);
  rep.ratio = rep.start_value > 0.0 ? rep.max_value / rep.start_value
                                    : std::numeric_limits<double>::infinity();
  rep.fit = loglog_fit(pts);
  return rep;
}

}  // namespace muonvr
