#pragma once

// The numbered acceptance criteria as a runnable suite. Each criterion prints
// one "[PASS]" or "[FAIL]" line (or "[SKIP]" for the long statistical ones in
// fast mode) with its measured numbers and wall time.

#include "apelab/parallel.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace apelab {

struct AcceptanceOptions {
  /// Criteria 1-5 and 8 only (DP, linear algebra, properties).
  bool fast = false;
  /// DQN criteria at 500k episodes instead of 50k.
  bool full_scale = false;
  Execution exec = Execution::Parallel;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the suite, printing one line per criterion to `out`.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out);

/// True when nothing failed (skips do not count as failures).
bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace apelab
