#include "grasslab/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "grasslab/io.hpp"
#include "grasslab/measures.hpp"

namespace grasslab::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::string Diagnostic::to_string() const {
  std::ostringstream out;
  out << "line " << line;
  if (!field.empty()) out << ", field '" << field << "'";
  out << ": " << message;
  return out.str();
}

IniFile IniFile::parse(const std::string& text,
                       std::vector<Diagnostic>* diags) {
  IniFile ini;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        if (diags) diags->push_back({lineno, "", "unterminated section header"});
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      if (diags) diags->push_back({lineno, "", "expected key = value"});
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      if (diags) diags->push_back({lineno, "", "empty key"});
      continue;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    ini.entries[full] = {value, lineno};
  }
  return ini;
}

void IniFile::apply_override(const std::string& spec,
                             std::vector<Diagnostic>* diags) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    if (diags)
      diags->push_back({0, spec, "override must look like section.key=value"});
    return;
  }
  entries[trim(spec.substr(0, eq))] = {trim(spec.substr(eq + 1)), 0};
}

const IniFile::Entry* IniFile::find(const std::string& key) const {
  const auto it = entries.find(key);
  return it == entries.end() ? nullptr : &it->second;
}

const std::vector<std::string> kCommands = {
    "grassmann-diagnostics", "measure-diagnostics", "estimate",
    "verify-inequalities",   "neighborhood-search", "deviation-profile",
    "stability-check",       "sharpness-demo",      "qv-profile"};

namespace {

struct Reader {
  const IniFile& ini;
  std::vector<Diagnostic>* diags;
  std::vector<std::string> seen;

  template <typename Fn>
  void with(const std::string& key, Fn&& fn) {
    seen.push_back(key);
    const auto* e = ini.find(key);
    if (!e) return;
    try {
      fn(e->value);
    } catch (const std::exception& ex) {
      if (diags) diags->push_back({e->line, key, ex.what()});
    }
  }
  void read_int(const std::string& key, int* out) {
    with(key, [&](const std::string& v) { *out = std::stoi(v); });
  }
  void read_i64(const std::string& key, std::int64_t* out) {
    with(key, [&](const std::string& v) { *out = std::stoll(v); });
  }
  void read_u64(const std::string& key, std::uint64_t* out) {
    with(key, [&](const std::string& v) { *out = std::stoull(v); });
  }
  void read_double(const std::string& key, double* out) {
    with(key, [&](const std::string& v) { *out = std::stod(v); });
  }
  void read_string(const std::string& key, std::string* out) {
    with(key, [&](const std::string& v) { *out = v; });
  }
};

}  // namespace

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "[run]\n";
  out << "command = " << command << '\n';
  out << "seed = " << seed << '\n';
  out << "workers = " << workers << '\n';
  out << "out = " << out_dir << '\n';
  out << "[measure]\n";
  out << "descriptor = " << measure_descriptor << '\n';
  out << "[params]\n";
  out << "n = " << n << '\n';
  out << "k = " << k << '\n';
  out << "lambda = " << io::format_double(lambda) << '\n';
  out << "epsilon = " << io::format_double(epsilon) << '\n';
  out << "beta = " << io::format_double(beta) << '\n';
  out << "c = " << io::format_double(accept_constant) << '\n';
  out << "max_trials = " << max_trials << '\n';
  out << "metric = " << grassmann::metric_name(metric) << '\n';
  out << "l_method = " << estimators::l_method_name(l_method) << '\n';
  out << "xi = " << io::format_double(xi) << '\n';
  out << "delta = " << io::format_double(delta) << '\n';
  out << "q = " << io::format_double(q) << '\n';
  out << "t_grid = ";
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i) out << ',';
    out << io::format_double(t_grid[i]);
  }
  out << '\n';
  if (!estimator.empty()) out << "estimator = " << estimator << '\n';
  if (!suite.empty()) out << "suite = " << suite << '\n';
  out << "[budgets]\n";
  out << "n_samples = " << n_samples << '\n';
  out << "n_directions = " << n_directions << '\n';
  out << "n_subspaces = " << n_subspaces << '\n';
  out << "pair_count = " << pair_count << '\n';
  return out.str();
}

std::optional<RunConfig> resolve(const IniFile& ini,
                                 std::vector<Diagnostic>* diags) {
  RunConfig cfg;
  Reader r{ini, diags, {}};
  const std::size_t errors_before = diags ? diags->size() : 0;

  r.read_string("run.command", &cfg.command);
  r.read_u64("run.seed", &cfg.seed);
  r.read_int("run.workers", &cfg.workers);
  r.read_string("run.out", &cfg.out_dir);
  r.read_string("measure.descriptor", &cfg.measure_descriptor);
  r.read_int("params.n", &cfg.n);
  r.read_int("params.k", &cfg.k);
  r.read_double("params.lambda", &cfg.lambda);
  r.read_double("params.epsilon", &cfg.epsilon);
  r.read_double("params.beta", &cfg.beta);
  r.read_double("params.c", &cfg.accept_constant);
  r.read_int("params.max_trials", &cfg.max_trials);
  r.read_double("params.xi", &cfg.xi);
  r.read_double("params.delta", &cfg.delta);
  r.read_double("params.q", &cfg.q);
  r.read_string("params.estimator", &cfg.estimator);
  r.read_string("params.suite", &cfg.suite);
  r.with("params.metric", [&](const std::string& v) {
    cfg.metric = grassmann::metric_from_name(v);
  });
  r.with("params.l_method", [&](const std::string& v) {
    cfg.l_method = estimators::l_method_from_name(v);
  });
  r.with("params.t_grid", [&](const std::string& v) {
    cfg.t_grid.clear();
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) cfg.t_grid.push_back(std::stod(tok));
    if (cfg.t_grid.empty()) throw std::invalid_argument("empty t_grid");
  });
  r.read_i64("budgets.n_samples", &cfg.n_samples);
  r.read_int("budgets.n_directions", &cfg.n_directions);
  r.read_int("budgets.n_subspaces", &cfg.n_subspaces);
  r.read_int("budgets.pair_count", &cfg.pair_count);

  // Unknown keys are errors: configs must be diffable and typo-proof.
  for (const auto& [key, entry] : ini.entries) {
    if (std::find(r.seen.begin(), r.seen.end(), key) == r.seen.end()) {
      if (diags) diags->push_back({entry.line, key, "unknown key"});
    }
  }

  if (cfg.command.empty()) {
    if (diags) diags->push_back({0, "run.command", "required field missing"});
  } else if (std::find(kCommands.begin(), kCommands.end(), cfg.command) ==
             kCommands.end()) {
    if (diags)
      diags->push_back({0, "run.command", "unknown command: " + cfg.command});
  }
  try {
    measures::from_descriptor(cfg.measure_descriptor);
  } catch (const std::exception& ex) {
    if (diags) diags->push_back({0, "measure.descriptor", ex.what()});
  }
  if (cfg.n < 2 && diags)
    diags->push_back({0, "params.n", "n must be at least 2"});
  if ((cfg.k < 1 || cfg.k >= cfg.n) && diags)
    diags->push_back({0, "params.k", "need 1 <= k <= n-1"});
  if (!(cfg.epsilon > 0.0) && diags)
    diags->push_back({0, "params.epsilon", "epsilon must be positive"});
  if (cfg.workers < 1 && diags)
    diags->push_back({0, "run.workers", "workers must be >= 1"});

  if (diags && diags->size() > errors_before) return std::nullopt;
  return cfg;
}

std::optional<RunConfig> load(const std::string& path,
                              const std::vector<std::string>& overrides,
                              std::vector<Diagnostic>* diags) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) {
      if (diags) diags->push_back({0, "", "cannot open config file: " + path});
      return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  IniFile ini = IniFile::parse(text, diags);
  for (const auto& o : overrides) ini.apply_override(o, diags);
  if (diags && !diags->empty()) return std::nullopt;
  return resolve(ini, diags);
}

}  // namespace grasslab::config
