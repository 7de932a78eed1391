// SPDX-License-Identifier: Apache-2.0
#include "muonvr/schedule.hpp"

#include <cmath>

#include "muonvr/errors.hpp"

namespace muonvr {

ScheduleValue schedule_eval(const Schedule& schedule, long t) {
  if (t < 1) throw InvalidConstants("schedule_eval: t must be >= 1");
  const double td = static_cast<double>(t);
  switch (schedule.kind) {
    case ScheduleKind::kPoly34Ema:
      return {std::pow(td, -0.75), 1.0 - std::pow(td, -0.5), 0.0};
    case ScheduleKind::kPoly34Vr:
      return {std::pow(td, -0.75), 1.0 - std::pow(td + 1.0, -0.5), std::pow(td, -0.5)};
    case ScheduleKind::kPoly23Vr:
      return {std::pow(td, -2.0 / 3.0), 1.0 - std::pow(td, -2.0 / 3.0), 1.0};
    case ScheduleKind::kConstant:
      break;
  }
  if (!(schedule.eta0 > 0.0 && schedule.eta0 <= 1.0)) {
    throw InvalidConstants("constant schedule: eta0 must lie in (0, 1]");
  }
  if (!(schedule.beta0 >= 0.0 && schedule.beta0 < 1.0)) {
    throw InvalidConstants("constant schedule: beta0 must lie in [0, 1)");
  }
  if (!(schedule.gamma0 >= 0.0 && schedule.gamma0 <= 1.0)) {
    throw InvalidConstants("constant schedule: gamma0 must lie in [0, 1]");
  }
  return {schedule.eta0, schedule.beta0, schedule.gamma0};
}

std::string schedule_kind_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kPoly34Ema: return "poly34_ema";
    case ScheduleKind::kPoly34Vr: return "poly34_vr";
    case ScheduleKind::kPoly23Vr: return "poly23_vr";
    case ScheduleKind::kConstant: return "constant";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
  if (name == "poly34_ema") return ScheduleKind::kPoly34Ema;
  if (name == "poly34_vr") return ScheduleKind::kPoly34Vr;
  if (name == "poly23_vr") return ScheduleKind::kPoly23Vr;
  if (name == "constant") return ScheduleKind::kConstant;
  throw ValidationError("unknown schedule kind: " + name);
}

}  // namespace muonvr
