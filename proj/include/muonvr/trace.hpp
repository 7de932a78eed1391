// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace muonvr {

// Per-step log entry.  The schedule values are the ones used at step
// t; the objective, true gradient norm and momentum error are filled
// only when diagnostics were requested for that step (they cost a full
// gradient evaluation).
struct StepRecord {
  long t = 0;
  double eta = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double f = 0.0;
  double grad_fnorm = 0.0;
  double momentum_fnorm = 0.0;
  double momentum_err_fnorm = 0.0;
  double update_fnorm = 0.0;
  bool has_diagnostics = false;
};

// Constants a verification pass needs alongside the records.
struct TraceMeta {
  std::string problem;
  std::string option;
  std::string schedule;
  std::uint64_t seed = 0;
  long total_steps = 0;
  int rows = 0;
  int cols = 0;
  double smoothness_l = 0.0;
  double noise_sigma = 0.0;
  std::optional<double> gradient_dominance_mu;
  std::optional<double> optimal_value;
};

struct Trace {
  TraceMeta meta;
  std::vector<StepRecord> records;
};

// CSV round trip.  Column order is fixed:
// t,eta,beta,gamma,f,grad_fnorm,momentum_fnorm,momentum_err_fnorm,update_fnorm
// with the metadata in '#' comment lines above the header.
void write_trace_csv(const std::string& path, const Trace& trace);
Trace read_trace_csv(const std::string& path);

// Seed-mean and sample standard deviation per sampled t across traces
// that share a sampling pattern.
struct AggregateRow {
  long t = 0;
  double mean[5] = {0, 0, 0, 0, 0};  // f, grad, momentum, momentum_err, update
  double stddev[5] = {0, 0, 0, 0, 0};
};

std::vector<AggregateRow> aggregate_traces(const std::vector<Trace>& traces);
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);

}  // namespace muonvr
