// Experiment driver: named verification suites and parameterized runs over
// the measure/Grassmannian toolkit. Every run writes CSV/JSONL outputs plus
// a manifest that echoes the fully resolved configuration.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grasslab/config.hpp"
#include "grasslab/runner.hpp"

namespace {

constexpr int kExitConfigError = 3;

int run_command(const std::string& command, const std::string& config_path,
                std::vector<std::string> overrides, bool validate_only) {
  std::vector<grasslab::config::Diagnostic> diags;
  if (!command.empty() && command != "validate")
    overrides.push_back("run.command=" + command);
  const auto cfg = grasslab::config::load(config_path, overrides, &diags);
  if (!cfg) {
    for (const auto& d : diags) std::cerr << "config error: " << d.to_string() << '\n';
    return kExitConfigError;
  }
  if (validate_only) {
    std::cout << cfg->to_text();
    return 0;
  }
  try {
    const auto outcome = grasslab::runner::run(*cfg);
    for (const auto& s : outcome.suites)
      std::cout << "suite " << s.name << ": "
                << grasslab::runner::suite_status_name(s.status) << " ("
                << s.details << ")\n";
    std::cout << "manifest: " << outcome.manifest_path << '\n';
    return outcome.exit_code();
  } catch (const std::exception& ex) {
    std::cerr << "run failed: " << ex.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grasslab: numerical experiments on log-concave marginals"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  std::string out_dir;
  std::string suite;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "configuration file (INI-style)");
  app.add_option("--seed", seed, "root seed")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--workers", workers, "worker count");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--suite", suite, "restrict to one named suite");
  app.add_option("--override", overrides,
                 "config override, section.key=value (repeatable)");

  std::vector<std::string> commands = grasslab::config::kCommands;
  commands.push_back("validate");
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(
        name, name == "validate" ? "check a configuration without running"
                                 : "run the " + name + " command");
    sub->fallthrough();  // global flags may follow the command name
  }

  CLI11_PARSE(app, argc, argv);
  const std::string chosen = app.get_subcommands().front()->get_name();

  if (seed_set) overrides.push_back("run.seed=" + std::to_string(seed));
  if (workers > 0)
    overrides.push_back("run.workers=" + std::to_string(workers));
  if (!out_dir.empty()) overrides.push_back("run.out=" + out_dir);
  if (!suite.empty()) overrides.push_back("params.suite=" + suite);

  return run_command(chosen, config_path, overrides, chosen == "validate");
}
