// SPDX-License-Identifier: Apache-2.0
#include "muonvr/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "muonvr/errors.hpp"
#include "muonvr/rng.hpp"

namespace {

using muonvr::ExperimentConfig;

std::string find_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const muonvr::Error& e) {
    return e.what();
  }
  return "";
}

// Random valid config text with keys and sections in random order.
std::string random_config_text(muonvr::Rng& rng) {
  const std::vector<std::string> kinds{"quadratic", "pl_nonconvex", "matrix_factorization",
                                       "tiny_mlp"};
  const std::vector<std::string> options{"mvr1_gamma0", "mvr1", "mvr2", "practical"};
  const std::vector<std::string> schedules{"poly34_ema", "poly34_vr", "poly23_vr", "constant"};

  const std::string kind = kinds[static_cast<std::size_t>(rng.uniform_int(4))];
  std::string option = options[static_cast<std::size_t>(rng.uniform_int(4))];
  std::string schedule = schedules[static_cast<std::size_t>(rng.uniform_int(4))];
  if (option == "practical") schedule = "constant";

  const int rows = 2 + static_cast<int>(rng.uniform_int(15));
  const int cols = 2 + static_cast<int>(rng.uniform_int(15));
  const int rank = 1 + static_cast<int>(rng.uniform_int(std::min(rows, cols)));
  const long diag_every = 1 + rng.uniform_int(10);

  std::vector<std::string> problem_lines{
      "kind " + kind,
      "instance_seed " + std::to_string(rng.uniform_int(100000)),
      "rows " + std::to_string(rows),
      "cols " + std::to_string(cols),
      "smoothness " + std::to_string(1.0 + rng.uniform(0.0, 20.0)),
      "strong_mu " + std::to_string(rng.uniform(0.01, 1.0)),
      "sigma " + std::to_string(rng.uniform(0.0, 3.0)),
      "init_scale " + std::to_string(rng.uniform(0.0, 2.0)),
      "rank " + std::to_string(rank),
      "width " + std::to_string(2 + rng.uniform_int(8)),
      "dataset_size 60",
      "batch 10",
      "label_noise " + std::to_string(rng.uniform(0.0, 0.9)),
      "input_dim " + std::to_string(2 + rng.uniform_int(6)),
      "num_classes " + std::to_string(2 + rng.uniform_int(4)),
  };
  std::vector<std::string> run_lines{
      "algorithm " + std::string(rng.uniform() < 0.2 ? "sgd" : "muon"),
      "option " + option,
      "schedule " + schedule,
      "eta0 " + std::to_string(rng.uniform(0.001, 1.0)),
      "beta0 " + std::to_string(rng.uniform(0.0, 0.99)),
      "gamma0 " + std::to_string(rng.uniform(0.0, 1.0)),
      "steps " + std::to_string(1 + rng.uniform_int(100000)),
      "ns_steps " + std::to_string(1 + rng.uniform_int(40)),
      "ns_coeffs " + std::string(rng.uniform() < 0.5 ? "convergent" : "fast"),
      "orthogonalizer " + std::string(rng.uniform() < 0.5 ? "exact" : "newton_schulz"),
      "weight_decay " + std::to_string(rng.uniform(0.0, 0.1)),
      "diagnostics_every " + std::to_string(diag_every),
  };
  std::string seeds = "seeds";
  const int n_seeds = 1 + static_cast<int>(rng.uniform_int(5));
  for (int i = 0; i < n_seeds; ++i) seeds += " " + std::to_string(100 * i + rng.uniform_int(100));
  run_lines.push_back(seeds);

  std::vector<std::string> check_lines;
  if (rng.uniform() < 0.4 && diag_every == 1) check_lines.push_back("descent adaptive");
  if (rng.uniform() < 0.4) check_lines.push_back("duality on");

  // Shuffle lines within each section.
  auto shuffle = [&rng](std::vector<std::string>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(static_cast<long>(i)))]);
    }
  };
  shuffle(problem_lines);
  shuffle(run_lines);

  std::string text = "# generated\nproblem {\n";
  for (const auto& l : problem_lines) text += "  " + l + "\n";
  text += "}\nrun {\n";
  for (const auto& l : run_lines) text += "  " + l + "\n";
  text += "}\noutput {\n  dir out_" + std::to_string(rng.uniform_int(1000)) + "\n}\n";
  if (!check_lines.empty()) {
    text += "checks {\n";
    for (const auto& l : check_lines) text += "  " + l + "\n";
    text += "}\n";
  }
  return text;
}

}  // namespace

TEST_CASE("empty text parses to the default config") {
  const ExperimentConfig cfg = muonvr::parse_config("");
  CHECK(cfg.problem.kind == "quadratic");
  CHECK(cfg.algorithm == "muon");
  CHECK(cfg.option == muonvr::MuonOption::kMvr2);
  CHECK(cfg.steps == 1000);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
  CHECK(cfg.diagnostics_every == 1);
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.checks.empty());
}

TEST_CASE("a minimal override leaves everything else at defaults") {
  const ExperimentConfig cfg = muonvr::parse_config(
      "problem {\n"
      "  rows 4\n"
      "  cols 12   # inline comment\n"
      "}\n"
      "run {\n"
      "\tsteps\t77\n"
      "}\n");
  CHECK(cfg.problem.rows == 4);
  CHECK(cfg.problem.cols == 12);
  CHECK(cfg.problem.kind == "quadratic");
  CHECK(cfg.steps == 77);
  CHECK(cfg.schedule.kind == muonvr::ScheduleKind::kConstant);
}

TEST_CASE("seeds are normalized to sorted order") {
  const ExperimentConfig cfg = muonvr::parse_config("run {\n  seeds 30 1 22\n}\n");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 22, 30});
}

TEST_CASE("checks are normalized to name order") {
  const ExperimentConfig cfg = muonvr::parse_config(
      "checks {\n  duality on\n  descent adaptive\n}\n");
  REQUIRE(cfg.checks.size() == 2);
  CHECK(cfg.checks[0].name == "descent");
  CHECK(cfg.checks[0].arg == "adaptive");
  CHECK(cfg.checks[1].name == "duality");
  CHECK(cfg.checks[1].arg == "on");
}

TEST_CASE("parse errors carry line numbers") {
  try {
    muonvr::parse_config("problem {\n  rows 4\n}\n}\n");
    FAIL("expected unmatched brace error");
  } catch (const muonvr::ParseError& e) {
    CHECK(e.line() == 4);
  }

  try {
    muonvr::parse_config("problem {\n  rows\n}\n");
    FAIL("expected missing value error");
  } catch (const muonvr::ParseError& e) {
    CHECK(e.line() == 2);
  }

  CHECK_THROWS_AS(muonvr::parse_config("rows 4\n"), muonvr::ParseError);            // no section
  CHECK_THROWS_AS(muonvr::parse_config("problem {\n  rows 4\n"), muonvr::ParseError);  // unclosed
  CHECK_THROWS_AS(muonvr::parse_config("Bad-Section {\n}\n"), muonvr::ParseError);
  CHECK_THROWS_AS(muonvr::parse_config("problem {\n  Rows 4\n}\n"), muonvr::ParseError);

  try {
    muonvr::parse_config("problem {\n  rows 4\n  rows 5\n}\n");
    FAIL("expected duplicate key error");
  } catch (const muonvr::ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("validation collects every broken field into one message") {
  const std::string msg = find_message([] {
    muonvr::parse_config(
        "problem {\n  rows 0\n  sigma -1\n}\nrun {\n  beta0 1.0\n  steps 0\n}\n");
  });
  CHECK(msg.find("invalid config:") != std::string::npos);
  CHECK(msg.find("problem.rows") != std::string::npos);
  CHECK(msg.find("problem.sigma") != std::string::npos);
  CHECK(msg.find("run.beta0") != std::string::npos);
  CHECK(msg.find("run.steps") != std::string::npos);
}

TEST_CASE("unknown keys and malformed numbers are rejected") {
  CHECK_THROWS_AS(muonvr::parse_config("problem {\n  rowz 4\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("problem {\n  rows four\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("problem {\n  sigma 1.0x\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("run {\n  seeds 1 -2\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("run {\n  seeds 1 1\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("run {\n  option adamw\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("run {\n  schedule cosine\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("run {\n  algorithm adam\n}\n"), muonvr::ValidationError);
}

TEST_CASE("domain rules tie fields together") {
  // Factorization rank is capped by the parameter shape.
  CHECK_THROWS_AS(
      muonvr::parse_config(
          "problem {\n  kind matrix_factorization\n  rows 4\n  cols 8\n  rank 5\n}\n"),
      muonvr::ValidationError);
  // The same rank is fine for a kind that ignores it.
  CHECK_NOTHROW(
      muonvr::parse_config("problem {\n  kind quadratic\n  rows 4\n  cols 8\n  rank 5\n}\n"));

  // The shipped-practice option runs on the constant schedule only.
  CHECK_THROWS_AS(
      muonvr::parse_config("run {\n  option practical\n  schedule poly34_ema\n}\n"),
      muonvr::ValidationError);
  CHECK_NOTHROW(muonvr::parse_config("run {\n  option practical\n  schedule constant\n}\n"));

  // The per-step audit needs per-step diagnostics.
  CHECK_THROWS_AS(
      muonvr::parse_config("run {\n  diagnostics_every 10\n}\nchecks {\n  descent adaptive\n}\n"),
      muonvr::ValidationError);
  CHECK_NOTHROW(muonvr::parse_config("checks {\n  descent 0.5\n}\n"));
  CHECK_THROWS_AS(muonvr::parse_config("checks {\n  descent -1\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("checks {\n  duality off\n}\n"), muonvr::ValidationError);
  CHECK_THROWS_AS(muonvr::parse_config("checks {\n  spectral on\n}\n"), muonvr::ValidationError);
}

TEST_CASE("serialization round-trips the default config") {
  const ExperimentConfig cfg = muonvr::parse_config("");
  const std::string canon = muonvr::serialize_config(cfg);
  CHECK(muonvr::parse_config(canon) == cfg);
  // Canonical text starts with the output section when no checks exist.
  CHECK(canon.rfind("output {", 0) == 0);
}

TEST_CASE("serialization round-trips randomized configs") {
  muonvr::Rng rng(321);
  for (int i = 0; i < 100; ++i) {
    const std::string text = random_config_text(rng);
    CAPTURE(text);
    const ExperimentConfig cfg = muonvr::parse_config(text);
    const ExperimentConfig back = muonvr::parse_config(muonvr::serialize_config(cfg));
    CHECK(back == cfg);
    CHECK(muonvr::config_hash(back) == muonvr::config_hash(cfg));
  }
}

TEST_CASE("the hash ignores formatting but not values") {
  const std::string a = "problem {\n  rows 4\n  cols 3\n}\n";
  const std::string b = "# reordered\nproblem {\n  cols 3\n\n  rows   4\n}\n";
  const std::string c = "problem {\n  rows 5\n  cols 3\n}\n";
  const std::string ha = muonvr::config_hash(muonvr::parse_config(a));
  CHECK(ha.size() == 16);
  CHECK(ha.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(ha == muonvr::config_hash(muonvr::parse_config(b)));
  CHECK(ha != muonvr::config_hash(muonvr::parse_config(c)));
}

TEST_CASE("config files load through the same path") {
  const std::string path = "config_test_tmp.cfg";
  {
    std::ofstream out(path);
    out << "run {\n  steps 42\n}\n";
  }
  const ExperimentConfig cfg = muonvr::load_config_file(path);
  CHECK(cfg.steps == 42);
  std::remove(path.c_str());
  CHECK_THROWS_AS(muonvr::load_config_file("missing_config_xyz.cfg"), muonvr::IoError);
}

TEST_CASE("problem construction dispatches on the kind") {
  muonvr::ProblemSpec spec;
  spec.rows = 4;
  spec.cols = 4;
  CHECK(muonvr::build_problem(spec)->name() == "stochastic_quadratic");

  spec.kind = "pl_nonconvex";
  CHECK(muonvr::build_problem(spec)->name() == "pl_nonconvex");

  spec.kind = "matrix_factorization";
  spec.rank = 2;
  spec.batch_rows = 2;
  CHECK(muonvr::build_problem(spec)->name() == "matrix_factorization");

  spec.kind = "tiny_mlp";
  spec.width = 6;
  spec.dataset_size = 60;
  spec.batch = 10;
  spec.input_dim = 5;
  spec.num_classes = 3;
  auto mlp = muonvr::build_problem(spec);
  CHECK(mlp->name() == "tiny_mlp");
  CHECK(mlp->rows() == 6);
  CHECK(mlp->cols() == 5);

  spec.kind = "unsupported";
  CHECK_THROWS_AS(muonvr::build_problem(spec), muonvr::ValidationError);
}

TEST_CASE("sampling pattern keeps the first, last, and every k-th step") {
  CHECK(muonvr::trace_records_step(1, 100, 10));
  CHECK(muonvr::trace_records_step(10, 100, 10));
  CHECK(muonvr::trace_records_step(50, 100, 10));
  CHECK(muonvr::trace_records_step(100, 100, 10));
  CHECK_FALSE(muonvr::trace_records_step(55, 100, 10));
  CHECK_FALSE(muonvr::trace_records_step(0, 100, 10));
  CHECK_FALSE(muonvr::trace_records_step(101, 100, 10));

  // Cadence one records everything.
  for (long t = 1; t <= 7; ++t) CHECK(muonvr::trace_records_step(t, 7, 1));

  // The final step is kept even when it falls off the grid.
  CHECK(muonvr::trace_records_step(97, 97, 10));
}
