#include "apelab/records.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace apelab;

namespace {

RunLog make_log(std::uint64_t seed, int n, double offset, bool with_policy) {
  RunLog log;
  for (int i = 0; i < n; ++i) {
    RunRecord r;
    r.seed = seed;
    r.episode = i;
    r.return_ = offset + 0.1 * i;
    r.tracked_value_1 = std::sin(i + offset);
    r.tracked_value_2 = 1.0 / 3.0 * i;
    if (with_policy) r.policy_statistic = 0.5 + 0.01 * i;
    log.push_back(r);
  }
  return log;
}

}  // namespace

TEST_CASE("run CSV round trip is exact") {
  for (bool pol : {false, true}) {
    const RunLog log = make_log(7, 25, 0.123456789, pol);
    std::stringstream buf;
    write_run_csv(buf, log);
    const RunLog back = read_run_csv(buf);
    REQUIRE(back.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
      CHECK(back[i].seed == log[i].seed);
      CHECK(back[i].episode == log[i].episode);
      CHECK(back[i].return_ == log[i].return_);
      CHECK(back[i].tracked_value_1 == log[i].tracked_value_1);
      CHECK(back[i].tracked_value_2 == log[i].tracked_value_2);
      CHECK(back[i].policy_statistic == log[i].policy_statistic);
    }
  }
}

TEST_CASE("run CSV header") {
  std::ostringstream out;
  write_run_csv(out, make_log(0, 1, 0.0, false));
  CHECK(out.str().rfind("seed,episode,return,tracked_value_1,tracked_value_2,pi_r_at_A\n", 0) == 0);
}

TEST_CASE("missing column is named in the error") {
  std::istringstream in("seed,episode,tracked_value_1,tracked_value_2,pi_r_at_A\n0,0,1,2,\n");
  CHECK_THROWS_WITH(read_run_csv(in), doctest::Contains("return"));
}

TEST_CASE("aggregate mean and standard error match a direct computation") {
  std::vector<RunLog> runs;
  for (std::uint64_t s = 0; s < 5; ++s) runs.push_back(make_log(s, 10, 0.3 * static_cast<double>(s * s), true));
  const auto rows = aggregate_runs(runs);
  REQUIRE(rows.size() == 10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r[i].return_;
    const double mean = sum / 5.0;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r[i].return_ - mean) * (r[i].return_ - mean);
    const double se = std::sqrt(ss / 4.0) / std::sqrt(5.0);
    CHECK(rows[i].n == 5);
    CHECK(rows[i].mean_return == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rows[i].se_return == doctest::Approx(se).epsilon(1e-12));
    REQUIRE(rows[i].mean_policy);
  }
}

TEST_CASE("runs of different length: n counts contributors; single run has zero SE") {
  const auto rows = aggregate_runs({make_log(0, 3, 0.0, false), make_log(1, 5, 1.0, false)});
  REQUIRE(rows.size() == 5);
  CHECK(rows[2].n == 2);
  CHECK(rows[4].n == 1);
  CHECK(rows[4].se_return == 0.0);
  CHECK_FALSE(rows[0].mean_policy);
}

TEST_CASE("aggregate CSV round trip") {
  const auto rows = aggregate_runs({make_log(0, 4, 0.0, true), make_log(1, 4, 2.0, true)});
  std::stringstream buf;
  write_aggregate_csv(buf, rows);
  const auto back = read_aggregate_csv(buf);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].episode == rows[i].episode);
    CHECK(back[i].n == rows[i].n);
    CHECK(back[i].mean_return == rows[i].mean_return);
    CHECK(back[i].se_tracked_2 == rows[i].se_tracked_2);
    CHECK(back[i].mean_policy == rows[i].mean_policy);
  }
}

TEST_CASE("tail_mean over the final fraction, at least one record") {
  const RunLog log = make_log(0, 100, 0.0, false);
  const auto ret = [](const RunRecord& r) { return r.return_; };
  CHECK(tail_mean(log, 0.05, ret) == doctest::Approx((9.5 + 9.6 + 9.7 + 9.8 + 9.9) / 5));
  CHECK(tail_mean(log, 0.0, ret) == doctest::Approx(9.9));
  CHECK(tail_mean(log, 1.0, ret) == doctest::Approx(4.95));
  CHECK_THROWS(tail_mean(RunLog{}, 0.5, ret));
}

TEST_CASE("format_number round trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.0}) CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("mean_and_se") {
  const MeanSe m = mean_and_se({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}
