// SPDX-License-Identifier: Apache-2.0
#include "muonvr/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "muonvr/errors.hpp"
#include "muonvr/linalg.hpp"
#include "muonvr/parallel.hpp"
#include "muonvr/verification.hpp"
#include "muonvr/version.hpp"

namespace muonvr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void audit_duality_step(const Matrix& m, DualityAudit& audit) {
  audit.checked += 1;
  const double fn = frobenius_norm(m);
  if (fn == 0.0) {
    audit.worst_lower_margin = std::min(audit.worst_lower_margin, 0.0);
    return;
  }
  const SvdResult svd = compact_svd(m);
  double nuc = 0.0;
  for (double s : svd.sigma) nuc += s;
  const Matrix o = matmul(svd.u, transpose(svd.v));
  const double dual = frobenius_dot(m, o);
  const double tol = 1e-9 * std::max(1.0, nuc);
  const double rel_gap = std::abs(dual - nuc) / std::max(1.0, nuc);
  const double lower = nuc - fn;
  audit.worst_rel_gap = std::max(audit.worst_rel_gap, rel_gap);
  audit.worst_lower_margin = std::min(audit.worst_lower_margin, lower);
  if (std::abs(dual - nuc) > tol || lower < -tol) audit.violations += 1;
}

void fill_diagnostics(StepRecord& rec, const Problem& problem, const Matrix& x,
                      const Matrix& estimate) {
  rec.f = problem.value(x);
  const Matrix grad = problem.gradient(x);
  rec.grad_fnorm = frobenius_norm(grad);
  rec.momentum_err_fnorm = frobenius_norm(sub(estimate, grad));
  rec.has_diagnostics = true;
}

TraceMeta make_meta(const Problem& problem, const ExperimentConfig& cfg, std::uint64_t seed) {
  TraceMeta meta;
  meta.problem = problem.name();
  meta.option = cfg.algorithm == "sgd" ? "sgd" : muon_option_name(cfg.option);
  meta.schedule = schedule_kind_name(cfg.schedule.kind);
  meta.seed = seed;
  meta.total_steps = cfg.steps;
  meta.rows = problem.rows();
  meta.cols = problem.cols();
  meta.smoothness_l = problem.smoothness_l();
  meta.noise_sigma = problem.noise_sigma();
  meta.gradient_dominance_mu = problem.gradient_dominance_mu();
  meta.optimal_value = problem.optimal_value();
  return meta;
}

Trace run_sgd(const Problem& problem, const ExperimentConfig& cfg, std::uint64_t seed) {
  Trace trace;
  trace.meta = make_meta(problem, cfg, seed);
  Rng rng(seed);
  Matrix x = problem.initial_point();
  for (long t = 1; t <= cfg.steps; ++t) {
    const bool sampled = trace_records_step(t, cfg.steps, cfg.diagnostics_every);
    const ScheduleValue sv = schedule_eval(cfg.schedule, t);
    const Matrix g = problem.sample_gradient(x, rng);
    StepRecord rec;
    rec.t = t;
    rec.eta = sv.eta;
    rec.beta = sv.beta;
    rec.gamma = sv.gamma;
    rec.momentum_fnorm = frobenius_norm(g);
    if (sampled) fill_diagnostics(rec, problem, x, g);
    const Matrix x_old = x;
    if (cfg.weight_decay > 0.0) x = scale(x, 1.0 - sv.eta * cfg.weight_decay);
    add_scaled(x, g, -sv.eta);
    rec.update_fnorm = frobenius_norm(sub(x, x_old));
    if (!x.all_finite()) {
      throw NonFiniteState("iterate became non-finite at step " + std::to_string(t));
    }
    if (sampled) trace.records.push_back(rec);
  }
  return trace;
}

}  // namespace

Trace run_single_seed(const Problem& problem, const ExperimentConfig& cfg, std::uint64_t seed,
                      DualityAudit* duality) {
  if (cfg.algorithm == "sgd") return run_sgd(problem, cfg, seed);

  Trace trace;
  trace.meta = make_meta(problem, cfg, seed);
  Rng rng(seed);
  MuonState state = MuonState::init(problem.initial_point());

  StepOptions opts;
  opts.option = cfg.option;
  opts.schedule = cfg.schedule;
  opts.orthogonalizer = cfg.orthogonalizer;
  opts.newton_schulz_steps = cfg.ns_steps;
  opts.newton_schulz_coeffs =
      cfg.ns_coeffs == "fast" ? kNewtonSchulzFast : kNewtonSchulzConvergent;
  opts.weight_decay = cfg.weight_decay;

  for (long t = 1; t <= cfg.steps; ++t) {
    const bool sampled = trace_records_step(t, cfg.steps, cfg.diagnostics_every);
    opts.diagnostics = sampled;
    const StepRecord rec = muon_step(state, problem, rng, opts);
    if (sampled) {
      if (duality) audit_duality_step(state.m, *duality);
      trace.records.push_back(rec);
    }
  }
  return trace;
}

RunManifest run_experiment(const ExperimentConfig& config_in) {
  ExperimentConfig cfg = config_in;
  if (const char* env = std::getenv("MUON_VR_OUT")) {
    if (*env) cfg.output_dir = env;
  }
  const std::unique_ptr<Problem> problem = build_problem(cfg.problem);
  fs::create_directories(cfg.output_dir);

  const long n = static_cast<long>(cfg.seeds.size());
  std::vector<Trace> traces(n);
  std::vector<double> wall(n, 0.0);
  std::vector<DualityAudit> audits(n);
  bool want_duality = false;
  for (const CheckSpec& c : cfg.checks) want_duality |= c.name == "duality";

  parallel_for(n, [&](long i) {
    const auto t0 = std::chrono::steady_clock::now();
    traces[i] =
        run_single_seed(*problem, cfg, cfg.seeds[i], want_duality ? &audits[i] : nullptr);
    wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  RunManifest man;
  man.dir = cfg.output_dir;
  man.config_text = serialize_config(cfg);
  man.config_hash = config_hash(cfg);
  man.library_version = kLibraryVersion;
  man.algorithm = cfg.algorithm;
  man.option_label = cfg.algorithm == "sgd" ? "sgd" : muon_option_name(cfg.option);
  man.schedule_label = schedule_kind_name(cfg.schedule.kind);
  man.seeds = cfg.seeds;
  man.wall_clock_seconds = wall;

  for (long i = 0; i < n; ++i) {
    const std::string rel = "seed_" + std::to_string(cfg.seeds[i]) + ".csv";
    write_trace_csv(cfg.output_dir + "/" + rel, traces[i]);
    man.trace_files.push_back(rel);
  }
  const std::vector<AggregateRow> agg = aggregate_traces(traces);
  man.aggregate_file = "aggregate.csv";
  write_aggregate_csv(cfg.output_dir + "/" + man.aggregate_file, agg);

  for (const CheckSpec& spec : cfg.checks) {
    CheckResult result;
    result.name = spec.name;
    if (spec.name == "descent") {
      long checked = 0;
      long violations = 0;
      double worst = std::numeric_limits<double>::infinity();
      for (const Trace& tr : traces) {
        const DescentAudit audit = spec.arg == "adaptive"
                                       ? check_descent_inequality_adaptive(tr)
                                       : check_descent_inequality(tr, std::strtod(spec.arg.c_str(), nullptr));
        checked += audit.checked;
        violations += audit.violations;
        worst = std::min(worst, audit.worst_margin);
      }
      result.pass = violations == 0;
      result.worst_margin = worst;
      result.detail = "checked=" + std::to_string(checked) +
                      " violations=" + std::to_string(violations);
    } else if (spec.name == "duality") {
      long checked = 0;
      long violations = 0;
      double worst_gap = 0.0;
      double worst_lower = 0.0;
      for (const DualityAudit& a : audits) {
        checked += a.checked;
        violations += a.violations;
        worst_gap = std::max(worst_gap, a.worst_rel_gap);
        worst_lower = std::min(worst_lower, a.worst_lower_margin);
      }
      result.pass = violations == 0;
      result.worst_margin = -worst_gap;
      result.detail = "checked=" + std::to_string(checked) +
                      " violations=" + std::to_string(violations) +
                      " worst_lower_margin=" + std::to_string(worst_lower);
    } else {
      result.pass = false;
      result.detail = "unknown check";
    }
    man.checks.push_back(result);
  }

  std::uint64_t h = fnv1a(man.config_text, 1469598103934665603ull);
  for (const std::string& rel : man.trace_files) h = fnv1a(read_file(cfg.output_dir + "/" + rel), h);
  h = fnv1a(read_file(cfg.output_dir + "/" + man.aggregate_file), h);
  man.content_hash = hex16(h);

  json j;
  j["schema"] = 1;
  j["library_version"] = man.library_version;
  j["config"] = man.config_text;
  j["config_hash"] = man.config_hash;
  j["content_hash"] = man.content_hash;
  j["algorithm"] = man.algorithm;
  j["option"] = man.option_label;
  j["schedule"] = man.schedule_label;
  j["seeds"] = man.seeds;
  j["trace_files"] = man.trace_files;
  j["aggregate_file"] = man.aggregate_file;
  j["wall_clock_seconds"] = man.wall_clock_seconds;
  json problem_j;
  problem_j["name"] = problem->name();
  problem_j["rows"] = problem->rows();
  problem_j["cols"] = problem->cols();
  problem_j["smoothness_l"] = problem->smoothness_l();
  problem_j["noise_sigma"] = problem->noise_sigma();
  if (problem->gradient_dominance_mu()) problem_j["pl_mu"] = *problem->gradient_dominance_mu();
  if (problem->optimal_value()) problem_j["optimal_value"] = *problem->optimal_value();
  j["problem"] = problem_j;
  json checks_j = json::array();
  for (const CheckResult& c : man.checks) {
    json cj;
    cj["name"] = c.name;
    cj["status"] = c.pass ? "PASS" : "FAIL";
    cj["worst_margin"] = c.worst_margin;
    cj["detail"] = c.detail;
    checks_j.push_back(cj);
  }
  j["checks"] = checks_j;

  std::ofstream out(cfg.output_dir + "/manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write manifest under " + cfg.output_dir);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest under " + cfg.output_dir);
  return man;
}

RunManifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what(), 0);
  }
  RunManifest man;
  try {
    man.dir = fs::path(path).parent_path().string();
    if (man.dir.empty()) man.dir = ".";
    man.config_text = j.at("config").get<std::string>();
    man.config_hash = j.at("config_hash").get<std::string>();
    man.content_hash = j.at("content_hash").get<std::string>();
    man.library_version = j.at("library_version").get<std::string>();
    man.algorithm = j.at("algorithm").get<std::string>();
    man.option_label = j.at("option").get<std::string>();
    man.schedule_label = j.at("schedule").get<std::string>();
    man.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    man.trace_files = j.at("trace_files").get<std::vector<std::string>>();
    man.aggregate_file = j.at("aggregate_file").get<std::string>();
    man.wall_clock_seconds = j.at("wall_clock_seconds").get<std::vector<double>>();
    for (const json& cj : j.at("checks")) {
      CheckResult c;
      c.name = cj.at("name").get<std::string>();
      c.pass = cj.at("status").get<std::string>() == "PASS";
      c.worst_margin = cj.at("worst_margin").get<double>();
      c.detail = cj.at("detail").get<std::string>();
      man.checks.push_back(c);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest missing fields: ") + e.what());
  }
  return man;
}

std::vector<Trace> load_manifest_traces(const RunManifest& man) {
  std::vector<Trace> traces;
  for (const std::string& rel : man.trace_files) {
    traces.push_back(read_trace_csv(man.dir + "/" + rel));
  }
  return traces;
}

bool all_checks_passed(const RunManifest& man) {
  for (const CheckResult& c : man.checks) {
    if (!c.pass) return false;
  }
  return true;
}

std::string plot_kind_name(PlotKind kind) {
  switch (kind) {
    case PlotKind::kLossVsStep: return "loss";
    case PlotKind::kGradnormVsStepLogLog: return "gradnorm";
    case PlotKind::kGapVsStepLogLog: return "gap";
  }
  throw ValidationError("unknown plot kind");
}

PlotKind plot_kind_from_name(const std::string& name) {
  if (name == "loss") return PlotKind::kLossVsStep;
  if (name == "gradnorm") return PlotKind::kGradnormVsStepLogLog;
  if (name == "gap") return PlotKind::kGapVsStepLogLog;
  throw ValidationError("unknown plot kind: " + name + " (loss, gradnorm, gap)");
}

std::vector<std::string> emit_plot_data(const RunManifest& man, PlotKind kind) {
  const std::vector<Trace> traces = load_manifest_traces(man);
  const std::vector<AggregateRow> agg = aggregate_traces(traces);

  const std::string path = man.dir + "/" + plot_kind_name(kind) + "_" + man.option_label + ".dat";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  char buf[128];

  if (kind == PlotKind::kLossVsStep) {
    out << "# objective vs step, " << man.option_label << " / " << man.schedule_label
        << ", seeds=" << man.seeds.size() << "\n";
    out << "# columns: t mean_f std_f\n";
    for (const AggregateRow& row : agg) {
      std::snprintf(buf, sizeof buf, "%ld %.17g %.17g\n", row.t, row.mean[0], row.stddev[0]);
      out << buf;
    }
  } else if (kind == PlotKind::kGradnormVsStepLogLog) {
    out << "# true gradient norm vs step (log10 both axes), " << man.option_label << " / "
        << man.schedule_label << ", seeds=" << man.seeds.size() << "\n";
    out << "# columns: log10_t log10_mean_grad_fnorm\n";
    for (const AggregateRow& row : agg) {
      if (!(row.mean[1] > 0.0)) continue;
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", std::log10(static_cast<double>(row.t)),
                    std::log10(row.mean[1]));
      out << buf;
    }
  } else {
    double f_star = 0.0;
    bool have = false;
    for (const Trace& tr : traces) {
      if (tr.meta.optimal_value) {
        f_star = *tr.meta.optimal_value;
        have = true;
        break;
      }
    }
    if (!have) throw ValidationError("gap plot needs a problem with a known optimal value");
    out << "# suboptimality gap vs step (log10 both axes), " << man.option_label << " / "
        << man.schedule_label << ", seeds=" << man.seeds.size() << "\n";
    out << "# columns: log10_t log10_mean_gap\n";
    for (const AggregateRow& row : agg) {
      const double gap = row.mean[0] - f_star;
      if (!(gap > 0.0)) continue;
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", std::log10(static_cast<double>(row.t)),
                    std::log10(gap));
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing " + path);
  return {path};
}

}  // namespace muonvr
