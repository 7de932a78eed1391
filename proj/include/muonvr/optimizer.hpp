// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "muonvr/linalg.hpp"
#include "muonvr/matrix.hpp"
#include "muonvr/problems.hpp"
#include "muonvr/rng.hpp"
#include "muonvr/schedule.hpp"
#include "muonvr/trace.hpp"

namespace muonvr {

// Momentum construction used by the orthogonalized step.
enum class MuonOption {
  kMvr1Gamma0,  // plain exponential moving average
  kMvr1,        // adds gamma * beta * (g_t - g_{t-1}), fresh sample each step
  kMvr2,        // correction uses one sample at both x_t and x_{t-1}
  kPractical,   // c = mu*c + g; m = mu*c + g, as shipped in training code
};

std::string muon_option_name(MuonOption option);
MuonOption muon_option_from_name(const std::string& name);

enum class Orthogonalizer {
  kExact,         // polar factor from the SVD
  kNewtonSchulz,  // quintic iteration
};

std::string orthogonalizer_name(Orthogonalizer o);
Orthogonalizer orthogonalizer_from_name(const std::string& name);

// Mutable optimizer state.  Momentum and the gradient memory start at
// zero; t counts from 1.
struct MuonState {
  Matrix x;
  Matrix m;
  Matrix prev_grad;  // last sampled gradient (kMvr1 correction)
  Matrix prev_x;     // previous iterate (kMvr2 correction)
  Matrix c;          // second accumulator (kPractical, two-accumulator form)
  long t = 1;

  static MuonState init(const Matrix& x0);
};

// Momentum recursions, exposed separately so the algebraic identities
// between them can be exercised directly.  Each updates state.m (and
// its own memory) and returns the new momentum.
const Matrix& momentum_update_mvr1(MuonState& state, const Matrix& g, double beta, double gamma);
const Matrix& momentum_update_mvr2(MuonState& state, const Matrix& g_x, const Matrix& g_prev,
                                   double beta, double gamma);
const Matrix& momentum_update_two_accumulator(MuonState& state, const Matrix& g, double beta_prev,
                                              double beta);
const Matrix& momentum_update_practical(MuonState& state, const Matrix& g, double mu);

struct StepOptions {
  MuonOption option = MuonOption::kMvr1Gamma0;
  Schedule schedule;
  Orthogonalizer orthogonalizer = Orthogonalizer::kExact;
  int newton_schulz_steps = 30;
  NewtonSchulzCoeffs newton_schulz_coeffs = kNewtonSchulzConvergent;
  double weight_decay = 0.0;  // decoupled: x <- (1 - eta*wd)*x before the update
  bool diagnostics = true;    // objective / true gradient / momentum error
};

// One optimizer step: sample the oracle, update momentum, move along
// minus the orthogonalized momentum.  Throws NonFiniteState if the new
// iterate picks up a NaN or infinity.
StepRecord muon_step(MuonState& state, const Problem& problem, Rng& rng,
                     const StepOptions& options);

}  // namespace muonvr
