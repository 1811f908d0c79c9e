#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scpolab {

// One property suite's outcome.  A suite runs a fixed number of randomized
// cases against an independent oracle; failures carry a serialized case in
// notes so the report alone can reproduce the problem.
struct SuiteReport {
  std::string name;
  int cases = 0;
  int failures = 0;
  double max_error = 0.0;  // worst observed error in the suite's own metric
  std::vector<std::string> notes;

  bool passed() const { return failures == 0; }
};

struct CheckOptions {
  std::uint64_t seed = 0;
  // Empty for a normal run.  Naming a suite perturbs that suite's computed
  // quantity before comparison, to prove the harness actually detects
  // regressions.  The fault lives here, never in the library under test.
  std::string inject_fault;
};

const std::vector<std::string>& selfcheck_suite_names();

// Runs every suite; throws ConfigError when inject_fault names no suite.
std::vector<SuiteReport> run_selfcheck(const CheckOptions& opts);

bool all_passed(const std::vector<SuiteReport>& reports);

std::string selfcheck_report_json(const std::vector<SuiteReport>& reports);

}  // namespace scpolab
