#pragma once

#include <string>
#include <vector>

#include "grasslab/config.hpp"

namespace grasslab::runner {

enum class SuiteStatus { kPass, kFail, kIndeterminate };
std::string suite_status_name(SuiteStatus s);

struct SuiteResult {
  std::string name;
  SuiteStatus status = SuiteStatus::kPass;
  std::string details;
};

struct RunOutcome {
  std::vector<SuiteResult> suites;
  std::vector<std::string> files;
  double wall_seconds = 0.0;
  std::string manifest_path;

  /// 0 all pass, 1 any fail, 2 indeterminate-only issues.
  int exit_code() const;
};

/// Execute one configured command; writes CSV/JSONL outputs and the run
/// manifest under cfg.out_dir.
RunOutcome run(const config::RunConfig& cfg);

}  // namespace grasslab::runner
