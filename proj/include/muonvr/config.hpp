// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "muonvr/optimizer.hpp"
#include "muonvr/problems.hpp"
#include "muonvr/schedule.hpp"

namespace muonvr {

// Problem-construction parameters.  Fields irrelevant to the chosen kind are
// accepted and ignored so a fully serialized config always reparses.
struct ProblemSpec {
  std::string kind = "quadratic";  // quadratic | pl_nonconvex | matrix_factorization | tiny_mlp
  std::uint64_t instance_seed = 7;
  int rows = 8;
  int cols = 8;
  double smoothness = 10.0;  // quadratic: largest curvature
  double strong_mu = 1.0;    // quadratic: smallest curvature
  double sigma = 1.0;        // gradient-noise level where the kind takes one
  double init_scale = 1.0;
  int rank = 4;        // matrix_factorization
  int batch_rows = 0;  // matrix_factorization; 0 = rows/8
  int width = 64;      // tiny_mlp
  int dataset_size = 2048;
  int batch = 32;
  double label_noise = 0.1;
  int input_dim = 16;
  int num_classes = 4;

  bool operator==(const ProblemSpec&) const = default;
};

struct CheckSpec {
  std::string name;  // descent | duality
  std::string arg;   // descent: "adaptive" or a fixed alpha; duality: "on"
  bool operator==(const CheckSpec&) const = default;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::string algorithm = "muon";  // muon | sgd
  MuonOption option = MuonOption::kMvr2;
  Schedule schedule;
  long steps = 1000;
  std::vector<std::uint64_t> seeds = {1};  // kept sorted and distinct
  Orthogonalizer orthogonalizer = Orthogonalizer::kExact;
  int ns_steps = 30;
  std::string ns_coeffs = "convergent";  // convergent | fast
  double weight_decay = 0.0;
  long diagnostics_every = 1;  // records kept at t in {1, k, 2k, ..., steps}
  std::string output_dir = "out";
  std::vector<CheckSpec> checks;  // kept sorted by name

  bool operator==(const ExperimentConfig&) const = default;
};

// Parses the nested key-value format documented in the README.  Throws
// ParseError with a line number on malformed text, ValidationError listing
// every invalid field on bad values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical form: fixed section order, sorted keys, full-precision numbers.
// parse_config(serialize_config(c)) == c for any valid c.
std::string serialize_config(const ExperimentConfig& config);

// FNV-1a over the canonical serialization, as 16 hex digits.  Stable under
// reordering of the original text.
std::string config_hash(const ExperimentConfig& config);

std::unique_ptr<Problem> build_problem(const ProblemSpec& spec);

// Sampling pattern shared by the runner and the checks: true when step t is
// recorded for a run of the given length and cadence.
bool trace_records_step(long t, long total_steps, long every);

}  // namespace muonvr
