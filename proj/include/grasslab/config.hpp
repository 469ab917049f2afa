#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grasslab/estimators.hpp"
#include "grasslab/grassmann.hpp"

namespace grasslab::config {

/// One diagnostic from parsing or validation, with its source position.
struct Diagnostic {
  int line = 0;
  std::string field;
  std::string message;
  std::string to_string() const;
};

/// Parsed "[section] key = value" file with per-key line numbers.
struct IniFile {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries;  // "section.key" -> entry

  static IniFile parse(const std::string& text, std::vector<Diagnostic>* diags);
  void apply_override(const std::string& spec,
                      std::vector<Diagnostic>* diags);
  const Entry* find(const std::string& key) const;
};

/// Fully resolved run configuration. A run is a pure function of this.
struct RunConfig {
  std::string command;
  std::string measure_descriptor = "gaussian(6)";
  int n = 6;
  int k = 1;
  double lambda = 0.5;
  double epsilon = 0.3;
  double beta = 1.0;
  double accept_constant = 10.0;
  int max_trials = 50;
  grassmann::Metric metric = grassmann::Metric::kMinRotation;
  estimators::LMethod l_method = estimators::LMethod::kDensity;
  std::vector<double> t_grid = {1.25, 1.5, 2.0, 3.0};
  std::int64_t n_samples = 40000;
  int n_directions = 512;
  int n_subspaces = 500;
  int pair_count = 100;
  double xi = 0.5;
  double delta = 2.0;
  double q = 2.0;
  std::string estimator;  // for the `estimate` command
  std::string suite;      // restrict verify-inequalities to one suite
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";

  std::string to_text() const;  // canonical echo, diffable
};

extern const std::vector<std::string> kCommands;

/// Parse + validate. Diagnostics carry line/field positions; the config is
/// returned only when there are no errors.
std::optional<RunConfig> resolve(const IniFile& ini,
                                 std::vector<Diagnostic>* diags);

std::optional<RunConfig> load(const std::string& path,
                              const std::vector<std::string>& overrides,
                              std::vector<Diagnostic>* diags);

}  // namespace grasslab::config
