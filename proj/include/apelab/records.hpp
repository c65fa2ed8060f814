#pragma once

// Per-episode run records and their CSV schemas.
//
// Run CSV:       seed,episode,return,tracked_value_1,tracked_value_2,pi_r_at_A
// Aggregate CSV: episode,n,mean_return,se_return,mean_tracked_value_1,
//                se_tracked_value_1,mean_tracked_value_2,se_tracked_value_2,
//                mean_pi_r_at_A,se_pi_r_at_A
//
// pi_r_at_A is empty for agents without a stochastic policy. Standard errors
// use the sample standard deviation over runs divided by sqrt(n).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace apelab {

struct RunRecord {
  std::uint64_t seed = 0;
  std::int64_t episode = 0;
  double return_ = 0.0;
  double tracked_value_1 = 0.0;
  double tracked_value_2 = 0.0;
  std::optional<double> policy_statistic;
};

using RunLog = std::vector<RunRecord>;

/// Shortest round-trip decimal form ("%.17g").
std::string format_number(double x);

void write_run_csv(std::ostream& out, const RunLog& log);
RunLog read_run_csv(std::istream& in);

struct AggregateRow {
  std::int64_t episode = 0;
  int n = 0;
  double mean_return = 0.0;
  double se_return = 0.0;
  double mean_tracked_1 = 0.0;
  double se_tracked_1 = 0.0;
  double mean_tracked_2 = 0.0;
  double se_tracked_2 = 0.0;
  std::optional<double> mean_policy;
  std::optional<double> se_policy;
};

/// Aligns runs by position; rows cover the longest run and `n` counts the
/// runs contributing to each row.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunLog>& runs);

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& xs);

/// Mean of `field` over the final `fraction` of a run (at least one record).
double tail_mean(const RunLog& log, double fraction,
                 const std::function<double(const RunRecord&)>& field);

}  // namespace apelab
