// SPDX-License-Identifier: Apache-2.0
#include "muonvr/optimizer.hpp"

#include <cmath>

#include "muonvr/errors.hpp"

namespace muonvr {

std::string muon_option_name(MuonOption option) {
  switch (option) {
    case MuonOption::kMvr1Gamma0: return "mvr1_gamma0";
    case MuonOption::kMvr1: return "mvr1";
    case MuonOption::kMvr2: return "mvr2";
    case MuonOption::kPractical: return "practical";
  }
  return "unknown";
}

MuonOption muon_option_from_name(const std::string& name) {
  if (name == "mvr1_gamma0") return MuonOption::kMvr1Gamma0;
  if (name == "mvr1") return MuonOption::kMvr1;
  if (name == "mvr2") return MuonOption::kMvr2;
  if (name == "practical") return MuonOption::kPractical;
  throw ValidationError("unknown momentum option: " + name);
}

std::string orthogonalizer_name(Orthogonalizer o) {
  return o == Orthogonalizer::kExact ? "exact" : "newton_schulz";
}

Orthogonalizer orthogonalizer_from_name(const std::string& name) {
  if (name == "exact") return Orthogonalizer::kExact;
  if (name == "newton_schulz") return Orthogonalizer::kNewtonSchulz;
  throw ValidationError("unknown orthogonalizer: " + name);
}

MuonState MuonState::init(const Matrix& x0) {
  MuonState s;
  s.x = x0;
  s.m = Matrix::zeros(x0.rows(), x0.cols());
  s.prev_grad = Matrix::zeros(x0.rows(), x0.cols());
  s.prev_x = x0;
  s.c = Matrix::zeros(x0.rows(), x0.cols());
  s.t = 1;
  return s;
}

const Matrix& momentum_update_mvr1(MuonState& state, const Matrix& g, double beta, double gamma) {
  Matrix m = scale(state.m, beta);
  add_scaled(m, g, 1.0 - beta + gamma * beta);
  add_scaled(m, state.prev_grad, -gamma * beta);
  state.m = std::move(m);
  state.prev_grad = g;
  return state.m;
}

const Matrix& momentum_update_mvr2(MuonState& state, const Matrix& g_x, const Matrix& g_prev,
                                   double beta, double gamma) {
  Matrix m = scale(state.m, beta);
  add_scaled(m, g_x, 1.0 - beta + gamma * beta);
  add_scaled(m, g_prev, -gamma * beta);
  state.m = std::move(m);
  return state.m;
}

const Matrix& momentum_update_two_accumulator(MuonState& state, const Matrix& g, double beta_prev,
                                              double beta) {
  Matrix c = scale(state.c, beta_prev);
  add_scaled(c, g, 1.0 - beta_prev);
  state.c = std::move(c);
  Matrix m = scale(state.c, beta);
  add_scaled(m, g, 1.0 - beta);
  state.m = std::move(m);
  return state.m;
}

const Matrix& momentum_update_practical(MuonState& state, const Matrix& g, double mu) {
  Matrix c = scale(state.c, mu);
  add_scaled(c, g, 1.0);
  state.c = std::move(c);
  Matrix m = scale(state.c, mu);
  add_scaled(m, g, 1.0);
  state.m = std::move(m);
  return state.m;
}

namespace {

Matrix orthogonalize(const Matrix& m, const StepOptions& options) {
  if (frobenius_norm(m) == 0.0) return Matrix::zeros(m.rows(), m.cols());
  if (options.orthogonalizer == Orthogonalizer::kExact) return polar_factor_exact(m);
  return newton_schulz(m, options.newton_schulz_steps, options.newton_schulz_coeffs);
}

}  // namespace

StepRecord muon_step(MuonState& state, const Problem& problem, Rng& rng,
                     const StepOptions& options) {
  const ScheduleValue sv = schedule_eval(options.schedule, state.t);
  if (options.option == MuonOption::kPractical &&
      options.schedule.kind != ScheduleKind::kConstant) {
    throw ValidationError("practical momentum expects a constant schedule");
  }

  const Matrix x_at_grad = state.x;
  switch (options.option) {
    case MuonOption::kMvr1Gamma0:
      momentum_update_mvr1(state, problem.sample_gradient(state.x, rng), sv.beta, 0.0);
      break;
    case MuonOption::kMvr1:
      momentum_update_mvr1(state, problem.sample_gradient(state.x, rng), sv.beta, sv.gamma);
      break;
    case MuonOption::kMvr2: {
      if (state.t == 1) {
        // the gradient memory at the start is defined to be zero
        const Matrix g = problem.sample_gradient(state.x, rng);
        momentum_update_mvr2(state, g, Matrix::zeros(g.rows(), g.cols()), sv.beta, sv.gamma);
      } else {
        const SamplePair pair = problem.sample_pair(state.x, state.prev_x, rng);
        momentum_update_mvr2(state, pair.grad_at_x, pair.grad_at_prev, sv.beta, sv.gamma);
      }
      break;
    }
    case MuonOption::kPractical:
      momentum_update_practical(state, problem.sample_gradient(state.x, rng), sv.beta);
      break;
  }

  StepRecord rec;
  rec.t = state.t;
  rec.eta = sv.eta;
  rec.beta = sv.beta;
  rec.gamma = options.option == MuonOption::kMvr1Gamma0 ? 0.0 : sv.gamma;
  rec.momentum_fnorm = frobenius_norm(state.m);
  if (options.diagnostics) {
    rec.has_diagnostics = true;
    rec.f = problem.value(x_at_grad);
    const Matrix g_true = problem.gradient(x_at_grad);
    rec.grad_fnorm = frobenius_norm(g_true);
    rec.momentum_err_fnorm = frobenius_norm(sub(state.m, g_true));
  }

  const Matrix direction = orthogonalize(state.m, options);
  state.prev_x = x_at_grad;
  Matrix x_new = options.weight_decay != 0.0
                     ? scale(state.x, 1.0 - sv.eta * options.weight_decay)
                     : state.x;
  add_scaled(x_new, direction, -sv.eta);
  rec.update_fnorm = frobenius_norm(sub(x_new, x_at_grad));
  if (!x_new.all_finite()) {
    throw NonFiniteState("muon_step: non-finite iterate at t=" + std::to_string(state.t));
  }
  state.x = std::move(x_new);
  state.t += 1;
  return rec;
}

}  // namespace muonvr
