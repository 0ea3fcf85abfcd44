#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdsync {

struct SuiteOptions {
  int workers = 1;
  std::string scratch_dir = "suite_scratch";  // used by the determinism criterion
  std::vector<std::string> only;              // criterion ids; empty runs all
};

struct SuiteRow {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  bool all_passed() const;
};

// Acceptance criteria A1..A13 with pinned tolerances. Prints one PASS/FAIL line per
// criterion to `log` as it completes.
SuiteResult run_suite(const SuiteOptions& options, std::ostream& log);

std::string format_table(const SuiteResult& result);

}  // namespace rdsync
