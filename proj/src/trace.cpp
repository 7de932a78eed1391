// SPDX-License-Identifier: Apache-2.0
#include "muonvr/trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "muonvr/errors.hpp"

namespace muonvr {

namespace {

constexpr const char* kColumnHeader =
    "t,eta,beta,gamma,f,grad_fnorm,momentum_fnorm,momentum_err_fnorm,update_fnorm";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// "key=value" pairs out of a comment line.
void parse_meta_line(const std::string& line, TraceMeta& meta) {
  std::istringstream in(line.substr(1));
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "problem") meta.problem = val;
    else if (key == "option") meta.option = val;
    else if (key == "schedule") meta.schedule = val;
    else if (key == "seed") meta.seed = std::stoull(val);
    else if (key == "T") meta.total_steps = std::stol(val);
    else if (key == "m") meta.rows = std::stoi(val);
    else if (key == "n") meta.cols = std::stoi(val);
    else if (key == "L") meta.smoothness_l = std::stod(val);
    else if (key == "sigma") meta.noise_sigma = std::stod(val);
    else if (key == "pl_mu") meta.gradient_dominance_mu = std::stod(val);
    else if (key == "f_star") meta.optimal_value = std::stod(val);
  }
}

}  // namespace

void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  const TraceMeta& m = trace.meta;
  out << "# muon-vr trace schema=1\n";
  out << "# problem=" << m.problem << " option=" << m.option << " schedule=" << m.schedule
      << " seed=" << m.seed << " T=" << m.total_steps << " m=" << m.rows << " n=" << m.cols
      << "\n";
  out << "# L=" << fmt(m.smoothness_l) << " sigma=" << fmt(m.noise_sigma);
  if (m.gradient_dominance_mu) out << " pl_mu=" << fmt(*m.gradient_dominance_mu);
  if (m.optimal_value) out << " f_star=" << fmt(*m.optimal_value);
  out << "\n" << kColumnHeader << "\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const StepRecord& r : trace.records) {
    out << r.t << ',' << fmt(r.eta) << ',' << fmt(r.beta) << ',' << fmt(r.gamma) << ','
        << fmt(r.has_diagnostics ? r.f : nan) << ','
        << fmt(r.has_diagnostics ? r.grad_fnorm : nan) << ',' << fmt(r.momentum_fnorm) << ','
        << fmt(r.has_diagnostics ? r.momentum_err_fnorm : nan) << ',' << fmt(r.update_fnorm)
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  Trace trace;
  std::string line;
  bool saw_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      parse_meta_line(line, trace.meta);
      continue;
    }
    if (!saw_header) {
      if (line != kColumnHeader) throw ParseError("unexpected trace header: " + line, lineno);
      saw_header = true;
      continue;
    }
    StepRecord r;
    double cols[9];
    const char* p = line.c_str();
    for (int i = 0; i < 9; ++i) {
      char* end = nullptr;
      cols[i] = std::strtod(p, &end);
      if (end == p) throw ParseError("bad trace row: " + line, lineno);
      p = end;
      if (*p == ',') ++p;
    }
    r.t = static_cast<long>(cols[0]);
    r.eta = cols[1];
    r.beta = cols[2];
    r.gamma = cols[3];
    r.f = cols[4];
    r.grad_fnorm = cols[5];
    r.momentum_fnorm = cols[6];
    r.momentum_err_fnorm = cols[7];
    r.update_fnorm = cols[8];
    r.has_diagnostics = !std::isnan(r.f);
    trace.records.push_back(r);
  }
  if (!saw_header) throw ParseError("no trace header in " + path, lineno);
  return trace;
}

std::vector<AggregateRow> aggregate_traces(const std::vector<Trace>& traces) {
  if (traces.empty()) throw ValidationError("aggregate_traces: no traces");
  const std::size_t rows = traces.front().records.size();
  for (const Trace& t : traces) {
    if (t.records.size() != rows) {
      throw ValidationError("aggregate_traces: traces have different sampling patterns");
    }
  }
  std::vector<AggregateRow> out(rows);
  const double count = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < rows; ++i) {
    AggregateRow& row = out[i];
    row.t = traces.front().records[i].t;
    for (const Trace& t : traces) {
      const StepRecord& r = t.records[i];
      if (r.t != row.t) {
        throw ValidationError("aggregate_traces: traces have different sampling patterns");
      }
      const double vals[5] = {r.f, r.grad_fnorm, r.momentum_fnorm, r.momentum_err_fnorm,
                              r.update_fnorm};
      for (int c = 0; c < 5; ++c) row.mean[c] += vals[c];
    }
    for (int c = 0; c < 5; ++c) row.mean[c] /= count;
    if (traces.size() > 1) {
      for (const Trace& t : traces) {
        const StepRecord& r = t.records[i];
        const double vals[5] = {r.f, r.grad_fnorm, r.momentum_fnorm, r.momentum_err_fnorm,
                                r.update_fnorm};
        for (int c = 0; c < 5; ++c) {
          const double d = vals[c] - row.mean[c];
          row.stddev[c] += d * d;
        }
      }
      for (int c = 0; c < 5; ++c) row.stddev[c] = std::sqrt(row.stddev[c] / (count - 1.0));
    }
  }
  return out;
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# muon-vr aggregate schema=1\n";
  out << "t,f_mean,f_std,grad_fnorm_mean,grad_fnorm_std,momentum_fnorm_mean,momentum_fnorm_std,"
         "momentum_err_fnorm_mean,momentum_err_fnorm_std,update_fnorm_mean,update_fnorm_std\n";
  for (const AggregateRow& r : rows) {
    out << r.t;
    for (int c = 0; c < 5; ++c) out << ',' << fmt(r.mean[c]) << ',' << fmt(r.stddev[c]);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace muonvr
