// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "muonvr/config.hpp"
#include "muonvr/trace.hpp"

namespace muonvr {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst_margin = 0.0;
  std::string detail;
};

// What run_experiment leaves on disk, mirrored in manifest.json inside the
// output directory.  content_hash covers the canonical config plus the trace
// and aggregate bytes; wall-clock stays outside it so reruns compare equal.
struct RunManifest {
  std::string dir;
  std::string config_text;  // canonical serialization
  std::string config_hash;
  std::string content_hash;
  std::string library_version;
  std::string algorithm;
  std::string option_label;
  std::string schedule_label;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> trace_files;  // relative to dir, one per seed
  std::string aggregate_file;
  std::vector<double> wall_clock_seconds;  // one per seed; informational only
  std::vector<CheckResult> checks;
};

// Per-step audit of the duality identity behind the update direction:
// <M, O> equals the nuclear norm of M and is at least its Frobenius norm.
struct DualityAudit {
  long checked = 0;
  long violations = 0;
  double worst_rel_gap = 0.0;  // |<M,O> - nuclear| / max(1, nuclear)
  // min of nuclear - fnorm over audited steps; stays >= -tol when sound
  double worst_lower_margin = std::numeric_limits<double>::infinity();
};

// One optimization run.  Records are kept at the steps selected by
// trace_records_step; diagnostics are computed only at kept steps.
Trace run_single_seed(const Problem& problem, const ExperimentConfig& config, std::uint64_t seed,
                      DualityAudit* duality = nullptr);

// Full seed sweep: per-seed trace CSVs, aggregate CSV, requested checks, and
// manifest.json under the output directory (MUON_VR_OUT overrides it).
RunManifest run_experiment(const ExperimentConfig& config);

RunManifest load_manifest(const std::string& path);
std::vector<Trace> load_manifest_traces(const RunManifest& manifest);
bool all_checks_passed(const RunManifest& manifest);

enum class PlotKind { kLossVsStep, kGradnormVsStepLogLog, kGapVsStepLogLog };

std::string plot_kind_name(PlotKind kind);
PlotKind plot_kind_from_name(const std::string& name);

// Writes whitespace-delimited .dat files next to the manifest and returns
// their paths.  Log-log kinds hold log10-transformed columns.
std::vector<std::string> emit_plot_data(const RunManifest& manifest, PlotKind kind);

}  // namespace muonvr
