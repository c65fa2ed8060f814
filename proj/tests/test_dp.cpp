#include "apelab/catalog.hpp"
#include "apelab/dp.hpp"

#include <doctest.h>

#include <sstream>

using namespace apelab;
using namespace apelab::catalog;

namespace {

LinearValue theta(double a, double b, double c) { return LinearValue{Eigen::Vector3d(a, b, c)}; }

template <typename T>
bool holds(const DpOutcome& o) {
  return std::holds_alternative<T>(o);
}

/// Power iteration of the projected policy backup starting at zero.
Eigen::VectorXd projected_power_iteration(const Mdp& mdp, const FeatureMap& fm, const TabularPolicy& pi) {
  const ValueVector mu = on_policy_distribution(mdp, pi);
  LinearValue lv{Eigen::VectorXd::Zero(fm.dimension())};
  for (int i = 0; i < 100000; ++i) {
    const LinearValue next = fit_weighted_least_squares(fm, bellman_backup(mdp, pi, predict_all(lv, fm)), mu);
    const double change = (next.theta - lv.theta).cwiseAbs().maxCoeff();
    lv = next;
    if (change < 1e-15) break;
  }
  return lv.theta;
}

}  // namespace

TEST_CASE("greedify at A compares the B/E and C/D weights") {
  const Counterexample ce = make_counterexample(CounterexampleKind::WorstCase);
  CHECK(greedify(ce.mdp, ce.features, theta(0, 0, 1)).mode(kA) == kRight);
  CHECK(greedify(ce.mdp, ce.features, theta(0, 3, 2)).mode(kA) == kLeft);
  CHECK(greedify(ce.mdp, ce.features, theta(0, 1, 1)).mode(kA) == kLeft);  // tie
  CHECK(greedify(ce.mdp, ce.features, theta(0, 1, 1 + 1e-12)).mode(kA) == kLeft);  // within tolerance
  CHECK(greedify(ce.mdp, ce.features, theta(0, 1, 1 + 1e-6)).mode(kA) == kRight);
  const TabularPolicy g = greedify(ce.mdp, ce.features, theta(5, -4, 7));
  CHECK(g.is_deterministic());
  for (State s = 1; s < kNumStates; ++s) CHECK(g.mode(s) == kLeft);
}

TEST_CASE("q_hat is reward plus the successor's estimate, terminal worth zero") {
  const Counterexample ce = make_counterexample(CounterexampleKind::WorstCase);
  const LinearValue lv = theta(7, 2, 5);
  CHECK(q_hat(ce.mdp, ce.features, lv, kA, kLeft) == 2.0);
  CHECK(q_hat(ce.mdp, ce.features, lv, kA, kRight) == 5.0);
  CHECK(q_hat(ce.mdp, ce.features, lv, kB, kLeft) == 1.0 + 5.0);
  CHECK(q_hat(ce.mdp, ce.features, lv, kE, kRight) == 3.0);
}

TEST_CASE("adding a constant to every weight leaves the catalog greedy policy unchanged") {
  const Counterexample ce = make_counterexample(CounterexampleKind::Oscillating);
  Rng rng(6);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const LinearValue lv = theta(normal(rng), normal(rng), normal(rng));
    const double c = normal(rng);
    LinearValue shifted = lv;
    shifted.theta.array() += c;
    CHECK(greedify(ce.mdp, ce.features, lv) == greedify(ce.mdp, ce.features, shifted));
  }
}

TEST_CASE("api_step from pi_l and pi_r") {
  const Counterexample osc = make_counterexample(CounterexampleKind::Oscillating);
  DpIterate it = api_step(osc.mdp, osc.features, policy_left());
  CHECK((it.theta.theta - Eigen::Vector3d(0, 0, 1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(it.policy == policy_right());
  it = api_step(osc.mdp, osc.features, policy_right());
  CHECK((it.theta.theta - Eigen::Vector3d(2, 3, 2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(it.policy == policy_left());

  const Counterexample worst = make_counterexample(CounterexampleKind::WorstCase);
  CHECK(api_step(worst.mdp, worst.features, policy_right()).policy == policy_left());
  CHECK(api_step(worst.mdp, worst.features, policy_left()).policy == policy_left());
}

TEST_CASE("one API step from rho: thresholds 1/2 and 1/4") {
  const Counterexample osc = make_counterexample(CounterexampleKind::Oscillating);
  const Counterexample mult = make_counterexample(CounterexampleKind::MultipleFixedPoint);
  const Counterexample worst = make_counterexample(CounterexampleKind::WorstCase);
  for (int k = 0; k <= 100; ++k) {
    const double rho = k / 100.0;
    const TabularPolicy pi = policy_with_rho(rho);
    if (k != 50) {
      CHECK(api_step(osc.mdp, osc.features, pi).policy.mode(kA) == (rho > 0.5 ? kLeft : kRight));
    }
    CHECK(api_step(mult.mdp, mult.features, pi).policy.mode(kA) == (rho <= 0.25 ? kLeft : kRight));
    CHECK(api_step(worst.mdp, worst.features, pi).policy.mode(kA) == kLeft);
  }
}

TEST_CASE("run_api outcomes per problem") {
  const Counterexample osc = make_counterexample(CounterexampleKind::Oscillating);
  const DpTrace t = run_api(osc.mdp, osc.features, policy_with_rho(0.9), 100);
  REQUIRE(holds<Cycle>(t.outcome));
  CHECK(std::get<Cycle>(t.outcome).period == 2);
  CHECK(describe(t.outcome).find("Cycle{period 2") == 0);

  const Counterexample mult = make_counterexample(CounterexampleKind::MultipleFixedPoint);
  const DpTrace a = run_api(mult.mdp, mult.features, policy_with_rho(0.1), 100);
  REQUIRE(holds<FixedPoint>(a.outcome));
  CHECK(a.iterations.back().policy == policy_left());
  const DpTrace b = run_api(mult.mdp, mult.features, policy_with_rho(0.6), 100);
  REQUIRE(holds<FixedPoint>(b.outcome));
  CHECK(b.iterations.back().policy == policy_right());

  const Counterexample worst = make_counterexample(CounterexampleKind::WorstCase);
  const DpTrace w = run_api(worst.mdp, worst.features, policy_right(), 100);
  REQUIRE(holds<FixedPoint>(w.outcome));
  CHECK(w.iterations.back().policy == policy_left());
  CHECK(evaluate_exact(worst.mdp, w.iterations.back().policy)(kA) == doctest::Approx(0.0));
}

TEST_CASE("trace entries hold the fit of their own policy") {
  const Counterexample osc = make_counterexample(CounterexampleKind::Oscillating);
  const DpTrace t = run_api(osc.mdp, osc.features, policy_with_rho(0.3), 20);
  for (const DpIterate& it : t.iterations) {
    const LinearValue fit = fit_weighted_least_squares(osc.features, evaluate_exact(osc.mdp, it.policy),
                                                       on_policy_distribution(osc.mdp, it.policy));
    CHECK((fit.theta - it.theta.theta).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("run_api: one iteration on a cycle reports MaxIters; zero is rejected") {
  const Counterexample osc = make_counterexample(CounterexampleKind::Oscillating);
  CHECK(holds<MaxIters>(run_api(osc.mdp, osc.features, policy_left(), 1).outcome));
  CHECK_THROWS(run_api(osc.mdp, osc.features, policy_left(), 0));
}

TEST_CASE("avi_step from zero weights fits the best immediate reward per group") {
  for (auto kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    for (int k = 0; k <= 10; ++k) {
      const TabularPolicy pi = policy_with_rho(k / 10.0);
      const ValueVector mu = on_policy_distribution(ce.mdp, pi);
      const DpIterate it = avi_step(ce.mdp, ce.features, theta(0, 0, 0), pi);
      const int groups[] = {0, 1, 2, 2, 1};
      for (int g = 0; g < 3; ++g) {
        double num = 0.0, den = 0.0;
        for (State s = 0; s < kNumStates; ++s) {
          if (groups[s] != g) continue;
          double best = -1e300;
          for (Action a = 0; a < 2; ++a) best = std::max(best, ce.mdp.outcomes(s, a).front().reward);
          num += mu(s) * best;
          den += mu(s);
        }
        CHECK(it.theta.theta(g) == doctest::Approx(num / den).epsilon(1e-12));
      }
      CHECK(it.policy == greedify(ce.mdp, ce.features, it.theta));
    }
  }
}

TEST_CASE("run_avi: worst case from zero settles on pi_l; trace starts at the inputs") {
  const Counterexample ce = make_counterexample(CounterexampleKind::WorstCase);
  const DpTrace t = run_avi(ce.mdp, ce.features, theta(0, 0, 0), policy_left(), 1000);
  REQUIRE(holds<FixedPoint>(t.outcome));
  CHECK(t.iterations.front().theta.theta == Eigen::Vector3d::Zero());
  CHECK(t.iterations.front().policy == policy_left());
  CHECK(t.iterations.back().policy == policy_left());
}

TEST_CASE("run_avi on the multiple problem converges from random starts") {
  const Counterexample ce = make_counterexample(CounterexampleKind::MultipleFixedPoint);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const AviStart start = random_avi_start(ce.mdp, ce.features, rng);
    CHECK(holds<FixedPoint>(run_avi(ce.mdp, ce.features, start.theta0, start.policy0, 1000).outcome));
  }
}

TEST_CASE("worst-case AVI 2-cycle from seed 12") {
  const Counterexample ce = make_counterexample(CounterexampleKind::WorstCase);
  Rng rng(12);
  const AviStart start = random_avi_start(ce.mdp, ce.features, rng);
  const DpTrace t = run_avi(ce.mdp, ce.features, start.theta0, start.policy0, 1000);
  REQUIRE(holds<Cycle>(t.outcome));
  CHECK(std::get<Cycle>(t.outcome).period == 2);
  const auto& last = t.iterations.back();
  const auto& prev = t.iterations[t.iterations.size() - 2];
  CHECK(last.policy.mode(kA) != prev.policy.mode(kA));
}

TEST_CASE("random AVI start: normal theta, start mixture policy") {
  const Counterexample ce = make_counterexample(CounterexampleKind::WorstCase);
  Rng a(3), b(3);
  const AviStart x = random_avi_start(ce.mdp, ce.features, a);
  const AviStart y = random_avi_start(ce.mdp, ce.features, b);
  CHECK(x.theta0.theta == y.theta0.theta);
  CHECK(x.policy0 == y.policy0);
  const double rho = x.policy0.prob(kA, kRight);
  CHECK(x.policy0 == start_mixture_policy(ce.mdp, rho));
  CHECK(start_mixture_policy(ce.mdp, 0.3) == policy_with_rho(0.3));
  CHECK_THROWS(start_mixture_policy(ce.mdp, 1.1));
}

TEST_CASE("projected fixed point matches power iteration of the projected backup") {
  for (auto kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    for (const TabularPolicy& pi : {policy_left(), policy_right()}) {
      const LinearValue fp = projected_bellman_fixed_point(ce.mdp, ce.features, pi);
      CHECK((fp.theta - projected_power_iteration(ce.mdp, ce.features, pi)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  Rng rng(17);
  int compared = 0;
  for (int i = 0; i < 30; ++i) {
    const Mdp mdp = make_random_episodic_mdp(6, 2, rng);
    const FeatureMap fm = FeatureMap::identity(6);
    std::vector<Action> acts(6);
    for (int s = 0; s < 6; ++s) acts[static_cast<std::size_t>(s)] = (i + s) % 2;
    const TabularPolicy pi = TabularPolicy::deterministic(2, acts);
    if (on_policy_distribution(mdp, pi).minCoeff() == 0.0) {
      // an unvisited state leaves its one-hot column without weight
      CHECK_THROWS_AS(projected_bellman_fixed_point(mdp, fm, pi), SingularProjectionError);
      continue;
    }
    const LinearValue fp = projected_bellman_fixed_point(mdp, fm, pi);
    CHECK((fp.theta - projected_power_iteration(mdp, fm, pi)).cwiseAbs().maxCoeff() < 1e-10);
    ++compared;
  }
  CHECK(compared > 0);
}

TEST_CASE("enumeration counts on the catalog") {
  struct Row {
    CounterexampleKind kind;
    int count;
  };
  for (const Row& r : {Row{CounterexampleKind::Oscillating, 0}, Row{CounterexampleKind::MultipleFixedPoint, 2},
                       Row{CounterexampleKind::WorstCase, 1}}) {
    const Counterexample ce = make_counterexample(r.kind);
    const FixedPointReport rep = enumerate_fixed_points(ce.mdp, ce.features);
    CHECK(rep.api_count() == r.count);
    CHECK(rep.avi_count() == r.count);
    for (const auto& p : rep.policies) CHECK(p.is_api_fixed_point == p.is_avi_fixed_point);
  }
  const Counterexample worst = make_counterexample(CounterexampleKind::WorstCase);
  for (const auto& p : enumerate_fixed_points(worst.mdp, worst.features).policies) {
    if (p.is_api_fixed_point) CHECK(p.start_value == doctest::Approx(0.0));
  }
}

TEST_CASE("enumeration: serial and parallel reports agree") {
  Rng rng(31);
  const Mdp mdp = make_random_episodic_mdp(8, 2, rng);
  const FeatureMap fm = FeatureMap::aggregation(std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1});
  const FixedPointReport s = enumerate_fixed_points(mdp, fm, Execution::Serial);
  const FixedPointReport p = enumerate_fixed_points(mdp, fm, Execution::Parallel);
  REQUIRE(s.policies.size() == p.policies.size());
  for (std::size_t i = 0; i < s.policies.size(); ++i) {
    CHECK(s.policies[i].actions == p.policies[i].actions);
    CHECK(s.policies[i].is_api_fixed_point == p.policies[i].is_api_fixed_point);
    CHECK(s.policies[i].is_avi_fixed_point == p.policies[i].is_avi_fixed_point);
    CHECK(s.policies[i].api_theta.theta == p.policies[i].api_theta.theta);
  }
}

TEST_CASE("trace CSV: header and one row per iterate") {
  const Counterexample ce = make_counterexample(CounterexampleKind::Oscillating);
  const DpTrace t = run_api(ce.mdp, ce.features, policy_left(), 10);
  std::ostringstream out;
  write_trace_csv(out, ce.mdp, ce.features, t);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,theta_0,theta_1,theta_2,greedy_action_at_start,start_value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(t.iterations.size()));
}
