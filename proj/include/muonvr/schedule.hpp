// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace muonvr {

// Hyperparameter families used by the optimizer.  The three analysis
// schedules are parameter-free in t; CONSTANT holds the given values.
enum class ScheduleKind {
  kPoly34Ema,  // eta = t^(-3/4), beta = 1 - t^(-1/2), gamma = 0
  kPoly34Vr,  // eta = t^(-3/4), beta = 1 - (t+1)^(-1/2), gamma = t^(-1/2)
  kPoly23Vr,   // eta = t^(-2/3), beta = 1 - t^(-2/3), gamma = 1
  kConstant,
};

struct Schedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double eta0 = 0.1;   // CONSTANT only, must lie in (0, 1]
  double beta0 = 0.9;  // CONSTANT only, must lie in [0, 1)
  double gamma0 = 0.0; // CONSTANT only, must lie in [0, 1]

  bool operator==(const Schedule&) const = default;
};

struct ScheduleValue {
  double eta;
  double beta;
  double gamma;
};

// Values at step t (t counts from 1).  Validates the CONSTANT ranges
// and throws InvalidConstants for t < 1.
ScheduleValue schedule_eval(const Schedule& schedule, long t);

std::string schedule_kind_name(ScheduleKind kind);
ScheduleKind schedule_kind_from_name(const std::string& name);

}  // namespace muonvr
