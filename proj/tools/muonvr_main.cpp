// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: run seed sweeps from config files, audit stored traces,
// fit convergence slopes, compare update rules, and export plot data.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "muonvr/config.hpp"
#include "muonvr/errors.hpp"
#include "muonvr/parallel.hpp"
#include "muonvr/runner.hpp"
#include "muonvr/verification.hpp"
#include "muonvr/version.hpp"

namespace {

using namespace muonvr;

constexpr double kLrGrid[] = {1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1};
constexpr const char* kLrGridLabels[] = {"1e-4", "5e-4", "1e-3", "5e-3", "1e-2", "5e-2", "1e-1"};

struct CheckLine {
  std::string name;
  bool pass;
  double worst_margin;
  std::string detail;
};

void print_check_lines(const std::vector<CheckLine>& lines, const std::string& csv_path) {
  for (const CheckLine& c : lines) {
    std::printf("%-24s %s  worst_margin=%.6g  %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                c.worst_margin, c.detail.c_str());
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + csv_path);
    out << "check,status,worst_margin,detail\n";
    for (const CheckLine& c : lines) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", c.worst_margin);
      out << c.name << "," << (c.pass ? "PASS" : "FAIL") << "," << buf << ",\"" << c.detail
          << "\"\n";
    }
  }
}

ExperimentConfig load_config_or_usage(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw CLI::ValidationError("--config", "no such file: " + path);
  }
  return load_config_file(path);
}

double final_mean_loss(const RunManifest& man) {
  const std::vector<Trace> traces = load_manifest_traces(man);
  const std::vector<AggregateRow> agg = aggregate_traces(traces);
  if (agg.empty()) throw ValidationError("run produced no records");
  return agg.back().mean[0];
}

int cmd_run(const std::string& config_path, bool grid) {
  ExperimentConfig cfg = load_config_or_usage(config_path);
  bool any_fail = false;
  if (!grid) {
    const RunManifest man = run_experiment(cfg);
    std::printf("run %s/%s -> %s\n", man.option_label.c_str(), man.schedule_label.c_str(),
                man.dir.c_str());
    std::printf("config_hash  %s\ncontent_hash %s\n", man.config_hash.c_str(),
                man.content_hash.c_str());
    for (const CheckResult& c : man.checks) {
      std::printf("check %-10s %s  worst_margin=%.6g  %s\n", c.name.c_str(),
                  c.pass ? "PASS" : "FAIL", c.worst_margin, c.detail.c_str());
      any_fail |= !c.pass;
    }
    return any_fail ? 1 : 0;
  }

  if (cfg.schedule.kind != ScheduleKind::kConstant) {
    std::fprintf(stderr, "--grid applies to the constant schedule only\n");
    return 2;
  }
  const std::string base = cfg.output_dir;
  double best_loss = 0.0;
  std::string best_label;
  for (std::size_t i = 0; i < std::size(kLrGrid); ++i) {
    ExperimentConfig point = cfg;
    point.schedule.eta0 = kLrGrid[i];
    point.output_dir = base + "/lr_" + kLrGridLabels[i];
    const RunManifest man = run_experiment(point);
    const double loss = final_mean_loss(man);
    for (const CheckResult& c : man.checks) any_fail |= !c.pass;
    std::printf("lr %-6s final_mean_loss %.10g  %s\n", kLrGridLabels[i], loss, man.dir.c_str());
    if (best_label.empty() || loss < best_loss) {
      best_loss = loss;
      best_label = kLrGridLabels[i];
    }
  }
  std::printf("best lr %s (final_mean_loss %.10g)\n", best_label.c_str(), best_loss);
  return any_fail ? 1 : 0;
}

Schedule theory_schedule(MuonOption option) {
  Schedule s;
  switch (option) {
    case MuonOption::kMvr1Gamma0: s.kind = ScheduleKind::kPoly34Ema; break;
    case MuonOption::kMvr1: s.kind = ScheduleKind::kPoly34Vr; break;
    default: s.kind = ScheduleKind::kPoly23Vr; break;
  }
  return s;
}

int cmd_rates(const std::string& config_path, long t_lo, long t_hi) {
  const ExperimentConfig base = load_config_or_usage(config_path);
  const long lo = t_lo > 0 ? t_lo : std::max(10L, base.steps / 100);
  const long hi = t_hi > 0 ? t_hi : base.steps;
  std::printf("%-12s %-12s %10s %10s %8s %7s\n", "option", "schedule", "slope", "intercept", "r2",
              "points");
  std::map<std::string, double> slopes;
  for (MuonOption option : {MuonOption::kMvr1Gamma0, MuonOption::kMvr1, MuonOption::kMvr2}) {
    ExperimentConfig cfg = base;
    cfg.algorithm = "muon";
    cfg.option = option;
    cfg.schedule = theory_schedule(option);
    cfg.checks.clear();
    cfg.output_dir = base.output_dir + "/rates_" + muon_option_name(option);
    const RunManifest man = run_experiment(cfg);
    const RateFit fit = fit_rate(load_manifest_traces(man), RateMetric::kErgodicGradAvg, lo, hi);
    slopes[muon_option_name(option)] = fit.slope;
    std::printf("%-12s %-12s %10.4f %10.4f %8.4f %7ld\n", man.option_label.c_str(),
                man.schedule_label.c_str(), fit.slope, fit.intercept, fit.r2, fit.points);
  }
  std::printf("mvr2 slope %s mvr1_gamma0 slope\n",
              slopes["mvr2"] <= slopes["mvr1_gamma0"] ? "<=" : ">");
  return 0;
}

int cmd_compare(const std::string& config_path) {
  const ExperimentConfig base = load_config_or_usage(config_path);
  struct Row {
    std::string label;
    double metric;
  };
  std::vector<Row> rows;
  for (const std::string& label : {"mvr1_gamma0", "mvr1", "mvr2", "sgd"}) {
    ExperimentConfig cfg = base;
    cfg.checks.clear();
    cfg.output_dir = base.output_dir + "/compare_" + label;
    if (label == "sgd") {
      cfg.algorithm = "sgd";
      cfg.schedule = theory_schedule(MuonOption::kMvr1Gamma0);
    } else {
      cfg.algorithm = "muon";
      cfg.option = muon_option_from_name(label);
      cfg.schedule = theory_schedule(cfg.option);
    }
    const RunManifest man = run_experiment(cfg);
    rows.push_back({label, final_ergodic_grad(load_manifest_traces(man))});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.metric < b.metric; });
  std::printf("ranking by final ergodic gradient norm (lower is better)\n");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::printf("%zu. %-12s %.10g\n", i + 1, rows[i].label.c_str(), rows[i].metric);
  }
  return 0;
}

int cmd_verify(const std::string& check, const std::string& manifest_path,
               const std::string& config_path, int instances, std::uint64_t seed, int mc_seeds,
               long steps, double alpha_fixed, double beta, double gamma, double eta, long t_check,
               double exponent, double max_ratio, long t_lo, long t_hi,
               const std::string& csv_path) {
  std::vector<CheckLine> lines;

  if (check == "step_dominance" || check == "weighted_decay") {
    const SeqInequalityKind kind = check == "step_dominance" ? SeqInequalityKind::kStepDominance
                                                             : SeqInequalityKind::kWeighted;
    const SeqSuiteReport rep = run_seq_inequality_suite(kind, instances, seed);
    lines.push_back({check, rep.violations == 0, rep.worst_margin,
                     "instances=" + std::to_string(rep.instances) +
                         " checked=" + std::to_string(rep.checked) +
                         " violations=" + std::to_string(rep.violations)});
  } else if (check == "descent") {
    if (manifest_path.empty()) throw CLI::ValidationError("--manifest", "required for descent");
    const RunManifest man = load_manifest(manifest_path);
    long checked = 0, violations = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (const Trace& tr : load_manifest_traces(man)) {
      const DescentAudit audit = alpha_fixed > 0.0 ? check_descent_inequality(tr, alpha_fixed)
                                                   : check_descent_inequality_adaptive(tr);
      checked += audit.checked;
      violations += audit.violations;
      worst = std::min(worst, audit.worst_margin);
    }
    lines.push_back({check, violations == 0, worst,
                     "checked=" + std::to_string(checked) +
                         " violations=" + std::to_string(violations)});
  } else if (check == "momentum_recursion") {
    if (config_path.empty()) throw CLI::ValidationError("--config", "required for this check");
    const ExperimentConfig cfg = load_config_or_usage(config_path);
    const std::unique_ptr<Problem> problem = build_problem(cfg.problem);
    const long horizon = steps > 0 ? steps : cfg.steps;
    const RecursionCheckReport rep = check_momentum_error_recursion(
        *problem, cfg.option, cfg.schedule, horizon, mc_seeds, seed);
    std::string detail = "rows=" + std::to_string(rep.rows.size()) +
                         " violations=" + std::to_string(rep.violations);
    if (rep.has_initial) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " initial_margin=%.6g", rep.initial.margin);
      detail += buf;
    }
    lines.push_back({check, rep.violations == 0, rep.worst_margin, detail});
  } else if (check == "gamma_decomposition") {
    if (config_path.empty()) throw CLI::ValidationError("--config", "required for this check");
    const ExperimentConfig cfg = load_config_or_usage(config_path);
    const std::unique_ptr<Problem> problem = build_problem(cfg.problem);
    const GammaTermReport rep =
        check_gamma_term_decomposition(*problem, beta, gamma, eta, t_check, mc_seeds, seed);
    const double tol = 1e-10 * (1.0 + std::abs(rep.direct_mean));
    char buf[160];
    std::snprintf(buf, sizeof buf, "identity_gap=%.3g residual_gap=%.3g direct=%.6g", rep.identity_gap,
                  rep.residual_gap, rep.direct_mean);
    lines.push_back({check, rep.identity_gap <= tol && rep.residual_gap <= 3.0 * rep.stderr_direct + tol,
                     tol - rep.identity_gap, buf});
  } else if (check == "gap_flatness") {
    if (manifest_path.empty()) throw CLI::ValidationError("--manifest", "required for this check");
    const RunManifest man = load_manifest(manifest_path);
    const NormalizedGapReport rep =
        check_normalized_gap(load_manifest_traces(man), exponent, t_lo, t_hi);
    char buf[160];
    std::snprintf(buf, sizeof buf, "ratio=%.4g max_ratio=%.4g slope=%.4f", rep.ratio, max_ratio,
                  rep.fit.slope);
    lines.push_back({check, rep.ratio <= max_ratio, max_ratio - rep.ratio, buf});
  } else {
    throw CLI::ValidationError(
        "--check", "unknown check (step_dominance, weighted_decay, descent, momentum_recursion, "
                   "gamma_decomposition, gap_flatness)");
  }

  print_check_lines(lines, csv_path);
  for (const CheckLine& c : lines) {
    if (!c.pass) return 1;
  }
  return 0;
}

int cmd_plot_data(const std::string& manifest_path, const std::string& kind_name) {
  const RunManifest man = load_manifest(manifest_path);
  const std::vector<std::string> files = emit_plot_data(man, plot_kind_from_name(kind_name));
  for (const std::string& f : files) std::printf("wrote %s\n", f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonalized-momentum experiment harness"};
  app.set_version_flag("--version", std::string(kLibraryVersion));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker pool width (0 = hardware default)");

  std::string config_path, manifest_path, check_name, kind_name, csv_path;
  bool grid = false;
  int instances = 1000;
  std::uint64_t seed = 20240901;
  int mc_seeds = 200;
  long steps = 0, t_check = 3, t_lo = 0, t_hi = 0;
  double alpha_fixed = 0.0, beta = 0.9, gamma = 1.0, eta = 0.05, exponent = 2.0 / 3.0,
         max_ratio = 3.0;

  CLI::App* run = app.add_subcommand("run", "execute a config");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_flag("--grid", grid, "sweep the constant learning rate over the built-in grid");

  CLI::App* verify = app.add_subcommand("verify", "run a named check");
  verify->add_option("--check", check_name, "check name")->required();
  verify->add_option("--manifest", manifest_path, "manifest.json of a stored run");
  verify->add_option("--config", config_path, "config supplying the problem/option/schedule");
  verify->add_option("--instances", instances, "randomized instances for sequence checks");
  verify->add_option("--seed", seed, "base seed for randomized checks");
  verify->add_option("--mc-seeds", mc_seeds, "Monte-Carlo seed count");
  verify->add_option("--steps", steps, "horizon override for simulation checks");
  verify->add_option("--alpha", alpha_fixed, "fixed alpha for the descent audit (default adaptive)");
  verify->add_option("--beta", beta, "momentum decay for the decomposition check");
  verify->add_option("--gamma", gamma, "correction weight for the decomposition check");
  verify->add_option("--eta", eta, "learning rate for the decomposition check");
  verify->add_option("--t-check", t_check, "transition step for the decomposition check");
  verify->add_option("--exponent", exponent, "gap normalization power");
  verify->add_option("--max-ratio", max_ratio, "allowed excursion for gap_flatness");
  verify->add_option("--t-lo", t_lo, "window start");
  verify->add_option("--t-hi", t_hi, "window end");
  verify->add_option("--csv", csv_path, "also write the report rows as CSV");

  CLI::App* rates = app.add_subcommand("rates", "fit ergodic gradient slopes per option");
  rates->add_option("--config", config_path, "experiment config file")->required();
  rates->add_option("--t-lo", t_lo, "fit window start (default steps/100)");
  rates->add_option("--t-hi", t_hi, "fit window end (default steps)");

  CLI::App* compare = app.add_subcommand("compare", "rank update rules on one problem");
  compare->add_option("--config", config_path, "experiment config file")->required();

  CLI::App* plot = app.add_subcommand("plot-data", "export plot-ready .dat files");
  plot->add_option("--manifest", manifest_path, "manifest.json of a stored run")->required();
  plot->add_option("--kind", kind_name, "loss | gradnorm | gap")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  muonvr::set_max_threads(threads);
  try {
    if (run->parsed()) return cmd_run(config_path, grid);
    if (verify->parsed()) {
      return cmd_verify(check_name, manifest_path, config_path, instances, seed, mc_seeds, steps,
                        alpha_fixed, beta, gamma, eta, t_check, exponent, max_ratio, t_lo, t_hi,
                        csv_path);
    }
    if (rates->parsed()) return cmd_rates(config_path, t_lo, t_hi);
    if (compare->parsed()) return cmd_compare(config_path);
    if (plot->parsed()) return cmd_plot_data(manifest_path, kind_name);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const muonvr::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const muonvr::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const muonvr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
