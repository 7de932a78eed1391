// SPDX-License-Identifier: Apache-2.0
#include "muonvr/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "muonvr/errors.hpp"

namespace muonvr {

namespace {

struct Entry {
  std::string value;
  int line;
};

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
          c == '_')) {
      return false;
    }
  }
  return true;
}

std::map<std::string, Entry> parse_flat(const std::string& text) {
  std::map<std::string, Entry> flat;
  std::vector<std::string> stack;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line == "}") {
      if (stack.empty()) throw ParseError("unmatched '}'", line_no);
      stack.pop_back();
      continue;
    }
    if (line.back() == '{') {
      const std::string name = trim(line.substr(0, line.size() - 1));
      if (!is_identifier(name)) throw ParseError("bad section name '" + name + "'", line_no);
      stack.push_back(name);
      continue;
    }
    const std::size_t ws = line.find_first_of(" \t");
    if (ws == std::string::npos) throw ParseError("key '" + line + "' has no value", line_no);
    const std::string key = line.substr(0, ws);
    const std::string value = trim(line.substr(ws));
    if (!is_identifier(key)) throw ParseError("bad key '" + key + "'", line_no);
    if (stack.empty()) throw ParseError("key '" + key + "' outside any section", line_no);
    std::string path;
    for (const std::string& s : stack) path += s + ".";
    path += key;
    if (flat.count(path)) throw ParseError("duplicate key '" + path + "'", line_no);
    flat[path] = Entry{value, line_no};
  }
  if (!stack.empty()) throw ParseError("unclosed section '" + stack.back() + "'", line_no);
  return flat;
}

class Reader {
 public:
  explicit Reader(const std::map<std::string, Entry>& flat) : flat_(flat) {}

  bool has(const std::string& path) const { return flat_.count(path) != 0; }

  std::string str(const std::string& path, const std::string& fallback) {
    auto it = flat_.find(path);
    if (it == flat_.end()) return fallback;
    consumed_.insert(path);
    return it->second.value;
  }

  long integer(const std::string& path, long fallback) {
    auto it = flat_.find(path);
    if (it == flat_.end()) return fallback;
    consumed_.insert(path);
    long out = fallback;
    if (!parse_long(it->second.value, out)) fail(path, "expects an integer");
    return out;
  }

  double real(const std::string& path, double fallback) {
    auto it = flat_.find(path);
    if (it == flat_.end()) return fallback;
    consumed_.insert(path);
    double out = fallback;
    if (!parse_double(it->second.value, out)) fail(path, "expects a number");
    return out;
  }

  std::vector<std::uint64_t> seed_list(const std::string& path,
                                       const std::vector<std::uint64_t>& fallback) {
    auto it = flat_.find(path);
    if (it == flat_.end()) return fallback;
    consumed_.insert(path);
    std::vector<std::uint64_t> out;
    std::istringstream ss(it->second.value);
    std::string tok;
    while (ss >> tok) {
      long v = 0;
      if (!parse_long(tok, v) || v < 0) {
        fail(path, "expects a space-separated list of non-negative integers");
        return fallback;
      }
      out.push_back(static_cast<std::uint64_t>(v));
    }
    if (out.empty()) fail(path, "expects at least one seed");
    return out;
  }

  void fail(const std::string& path, const std::string& why) {
    errors_.push_back(path + " " + why);
  }

  // Every check entry under the given section, in file order.
  std::vector<CheckSpec> checks(const std::string& section) {
    std::vector<std::pair<int, CheckSpec>> found;
    const std::string prefix = section + ".";
    for (const auto& [path, entry] : flat_) {
      if (path.rfind(prefix, 0) == 0) {
        consumed_.insert(path);
        found.push_back({entry.line, CheckSpec{path.substr(prefix.size()), entry.value}});
      }
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<CheckSpec> out;
    for (auto& [line, spec] : found) out.push_back(std::move(spec));
    return out;
  }

  void finish() {
    for (const auto& [path, entry] : flat_) {
      if (!consumed_.count(path)) errors_.push_back(path + " is not a recognized key");
    }
    if (!errors_.empty()) {
      std::string msg = "invalid config: ";
      for (std::size_t i = 0; i < errors_.size(); ++i) {
        if (i) msg += "; ";
        msg += errors_[i];
      }
      throw ValidationError(msg);
    }
  }

  static bool parse_long(const std::string& s, long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
  }

  static bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    out = v;
    return true;
  }

 private:
  const std::map<std::string, Entry>& flat_;
  std::set<std::string> consumed_;
  std::vector<std::string> errors_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const std::map<std::string, Entry> flat = parse_flat(text);
  Reader r(flat);
  ExperimentConfig cfg;

  ProblemSpec& p = cfg.problem;
  p.kind = r.str("problem.kind", p.kind);
  p.instance_seed = static_cast<std::uint64_t>(r.integer("problem.instance_seed", static_cast<long>(p.instance_seed)));
  p.rows = static_cast<int>(r.integer("problem.rows", p.rows));
  p.cols = static_cast<int>(r.integer("problem.cols", p.cols));
  p.smoothness = r.real("problem.smoothness", p.smoothness);
  p.strong_mu = r.real("problem.strong_mu", p.strong_mu);
  p.sigma = r.real("problem.sigma", p.sigma);
  p.init_scale = r.real("problem.init_scale", p.init_scale);
  p.rank = static_cast<int>(r.integer("problem.rank", p.rank));
  p.batch_rows = static_cast<int>(r.integer("problem.batch_rows", p.batch_rows));
  p.width = static_cast<int>(r.integer("problem.width", p.width));
  p.dataset_size = static_cast<int>(r.integer("problem.dataset_size", p.dataset_size));
  p.batch = static_cast<int>(r.integer("problem.batch", p.batch));
  p.label_noise = r.real("problem.label_noise", p.label_noise);
  p.input_dim = static_cast<int>(r.integer("problem.input_dim", p.input_dim));
  p.num_classes = static_cast<int>(r.integer("problem.num_classes", p.num_classes));

  cfg.algorithm = r.str("run.algorithm", cfg.algorithm);
  const std::string option_name = r.str("run.option", muon_option_name(cfg.option));
  const std::string sched_name = r.str("run.schedule", schedule_kind_name(cfg.schedule.kind));
  cfg.schedule.eta0 = r.real("run.eta0", cfg.schedule.eta0);
  cfg.schedule.beta0 = r.real("run.beta0", cfg.schedule.beta0);
  cfg.schedule.gamma0 = r.real("run.gamma0", cfg.schedule.gamma0);
  cfg.steps = r.integer("run.steps", cfg.steps);
  cfg.seeds = r.seed_list("run.seeds", cfg.seeds);
  const std::string orth_name = r.str("run.orthogonalizer", orthogonalizer_name(cfg.orthogonalizer));
  cfg.ns_steps = static_cast<int>(r.integer("run.ns_steps", cfg.ns_steps));
  cfg.ns_coeffs = r.str("run.ns_coeffs", cfg.ns_coeffs);
  cfg.weight_decay = r.real("run.weight_decay", cfg.weight_decay);
  cfg.diagnostics_every = r.integer("run.diagnostics_every", cfg.diagnostics_every);
  cfg.output_dir = r.str("output.dir", cfg.output_dir);
  cfg.checks = r.checks("checks");

  static const std::set<std::string> kKinds = {"quadratic", "pl_nonconvex", "matrix_factorization",
                                              "tiny_mlp"};
  if (!kKinds.count(p.kind)) r.fail("problem.kind", "must be one of quadratic, pl_nonconvex, matrix_factorization, tiny_mlp");
  if (p.rows < 1) r.fail("problem.rows", "must be >= 1");
  if (p.cols < 1) r.fail("problem.cols", "must be >= 1");
  if (!(p.smoothness > 0.0)) r.fail("problem.smoothness", "must be > 0");
  if (!(p.strong_mu > 0.0) || p.strong_mu > p.smoothness) {
    r.fail("problem.strong_mu", "must lie in (0, smoothness]");
  }
  if (!(p.sigma >= 0.0)) r.fail("problem.sigma", "must be >= 0");
  if (!(p.init_scale >= 0.0)) r.fail("problem.init_scale", "must be >= 0");
  if (p.rank < 1) r.fail("problem.rank", "must be >= 1");
  if (p.kind == "matrix_factorization" && p.rank > std::min(p.rows, p.cols)) {
    r.fail("problem.rank", "must not exceed min(rows, cols)");
  }
  if (p.batch_rows < 0 || p.batch_rows > p.rows) r.fail("problem.batch_rows", "must lie in [0, rows]");
  if (p.width < 1) r.fail("problem.width", "must be >= 1");
  if (p.dataset_size < 1) r.fail("problem.dataset_size", "must be >= 1");
  if (p.batch < 1 || p.batch > p.dataset_size) r.fail("problem.batch", "must lie in [1, dataset_size]");
  if (!(p.label_noise >= 0.0 && p.label_noise < 1.0)) r.fail("problem.label_noise", "must lie in [0, 1)");
  if (p.input_dim < 1) r.fail("problem.input_dim", "must be >= 1");
  if (p.num_classes < 2) r.fail("problem.num_classes", "must be >= 2");
  if (p.kind == "tiny_mlp" && p.dataset_size < p.num_classes) {
    r.fail("problem.dataset_size", "must cover every class at least once");
  }

  if (cfg.algorithm != "muon" && cfg.algorithm != "sgd") r.fail("run.algorithm", "must be muon or sgd");
  try {
    cfg.option = muon_option_from_name(option_name);
  } catch (const ValidationError&) {
    r.fail("run.option", "'" + option_name + "' is not a known option");
  }
  try {
    cfg.schedule.kind = schedule_kind_from_name(sched_name);
  } catch (const ValidationError&) {
    r.fail("run.schedule", "'" + sched_name + "' is not a known schedule");
  }
  if (!(cfg.schedule.eta0 > 0.0 && cfg.schedule.eta0 <= 1.0)) r.fail("run.eta0", "must lie in (0, 1]");
  if (!(cfg.schedule.beta0 >= 0.0 && cfg.schedule.beta0 < 1.0)) r.fail("run.beta0", "must lie in [0, 1)");
  if (!(cfg.schedule.gamma0 >= 0.0 && cfg.schedule.gamma0 <= 1.0)) r.fail("run.gamma0", "must lie in [0, 1]");
  if (cfg.algorithm == "muon" && cfg.option == MuonOption::kPractical &&
      cfg.schedule.kind != ScheduleKind::kConstant) {
    r.fail("run.schedule", "the practical option takes the constant schedule only");
  }
  if (cfg.steps < 1) r.fail("run.steps", "must be >= 1");
  std::sort(cfg.seeds.begin(), cfg.seeds.end());
  if (std::adjacent_find(cfg.seeds.begin(), cfg.seeds.end()) != cfg.seeds.end()) {
    r.fail("run.seeds", "must be distinct");
  }
  try {
    cfg.orthogonalizer = orthogonalizer_from_name(orth_name);
  } catch (const ValidationError&) {
    r.fail("run.orthogonalizer", "'" + orth_name + "' is not a known orthogonalizer");
  }
  if (cfg.ns_steps < 1) r.fail("run.ns_steps", "must be >= 1");
  if (cfg.ns_coeffs != "convergent" && cfg.ns_coeffs != "fast") {
    r.fail("run.ns_coeffs", "must be convergent or fast");
  }
  if (!(cfg.weight_decay >= 0.0)) r.fail("run.weight_decay", "must be >= 0");
  if (cfg.diagnostics_every < 1) r.fail("run.diagnostics_every", "must be >= 1");
  if (cfg.output_dir.empty()) r.fail("output.dir", "must be non-empty");

  std::set<std::string> seen_checks;
  for (const CheckSpec& c : cfg.checks) {
    if (!seen_checks.insert(c.name).second) {
      r.fail("checks." + c.name, "is requested more than once");
      continue;
    }
    if (c.name == "descent") {
      double alpha = 0.0;
      if (c.arg != "adaptive" && (!Reader::parse_double(c.arg, alpha) || !(alpha > 0.0))) {
        r.fail("checks.descent", "takes 'adaptive' or a positive alpha");
      }
      if (cfg.diagnostics_every != 1) {
        r.fail("checks.descent", "needs run.diagnostics_every 1 (the audit is per-step)");
      }
    } else if (c.name == "duality") {
      if (c.arg != "on") r.fail("checks.duality", "takes 'on'");
    } else {
      r.fail("checks." + c.name, "is not a known check (descent, duality)");
    }
  }
  std::sort(cfg.checks.begin(), cfg.checks.end(),
            [](const CheckSpec& a, const CheckSpec& b) { return a.name < b.name; });

  r.finish();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  if (!cfg.checks.empty()) {
    out << "checks {\n";
    for (const CheckSpec& c : cfg.checks) out << "  " << c.name << " " << c.arg << "\n";
    out << "}\n";
  }
  out << "output {\n  dir " << cfg.output_dir << "\n}\n";
  const ProblemSpec& p = cfg.problem;
  out << "problem {\n";
  out << "  batch " << p.batch << "\n";
  out << "  batch_rows " << p.batch_rows << "\n";
  out << "  cols " << p.cols << "\n";
  out << "  dataset_size " << p.dataset_size << "\n";
  out << "  init_scale " << fmt(p.init_scale) << "\n";
  out << "  input_dim " << p.input_dim << "\n";
  out << "  instance_seed " << p.instance_seed << "\n";
  out << "  kind " << p.kind << "\n";
  out << "  label_noise " << fmt(p.label_noise) << "\n";
  out << "  num_classes " << p.num_classes << "\n";
  out << "  rank " << p.rank << "\n";
  out << "  rows " << p.rows << "\n";
  out << "  sigma " << fmt(p.sigma) << "\n";
  out << "  smoothness " << fmt(p.smoothness) << "\n";
  out << "  strong_mu " << fmt(p.strong_mu) << "\n";
  out << "  width " << p.width << "\n";
  out << "}\n";
  out << "run {\n";
  out << "  algorithm " << cfg.algorithm << "\n";
  out << "  beta0 " << fmt(cfg.schedule.beta0) << "\n";
  out << "  diagnostics_every " << cfg.diagnostics_every << "\n";
  out << "  eta0 " << fmt(cfg.schedule.eta0) << "\n";
  out << "  gamma0 " << fmt(cfg.schedule.gamma0) << "\n";
  out << "  ns_coeffs " << cfg.ns_coeffs << "\n";
  out << "  ns_steps " << cfg.ns_steps << "\n";
  out << "  option " << muon_option_name(cfg.option) << "\n";
  out << "  orthogonalizer " << orthogonalizer_name(cfg.orthogonalizer) << "\n";
  out << "  schedule " << schedule_kind_name(cfg.schedule.kind) << "\n";
  out << "  seeds";
  for (std::uint64_t s : cfg.seeds) out << " " << s;
  out << "\n";
  out << "  steps " << cfg.steps << "\n";
  out << "  weight_decay " << fmt(cfg.weight_decay) << "\n";
  out << "}\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canon = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::unique_ptr<Problem> build_problem(const ProblemSpec& p) {
  if (p.kind == "quadratic") {
    return make_stochastic_quadratic(p.instance_seed, p.rows, p.cols, p.smoothness, p.strong_mu,
                                     p.sigma, p.init_scale);
  }
  if (p.kind == "pl_nonconvex") {
    return make_pl_nonconvex(p.instance_seed, p.rows, p.cols, p.sigma, p.init_scale);
  }
  if (p.kind == "matrix_factorization") {
    return make_matrix_factorization(p.instance_seed, p.rows, p.cols, p.rank, p.sigma,
                                     p.batch_rows);
  }
  if (p.kind == "tiny_mlp") {
    return make_tiny_mlp(p.instance_seed, p.width, p.dataset_size, p.label_noise, p.input_dim,
                         p.num_classes, p.batch);
  }
  throw ValidationError("unknown problem kind: " + p.kind);
}

bool trace_records_step(long t, long total_steps, long every) {
  if (t < 1 || t > total_steps) return false;
  return t == 1 || t == total_steps || (t % every) == 0;
}

}  // namespace muonvr
