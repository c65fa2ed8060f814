#include "apelab/catalog.hpp"
#include "apelab/mdp.hpp"
#include "apelab/mdp_io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace apelab;
using namespace apelab::catalog;

namespace {

TabularPolicy random_policy(int n_states, int n_actions, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd p(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) p(s, a) = unit(rng) + 1e-3;
    p.row(s) /= p.row(s).sum();
  }
  return TabularPolicy(p);
}

Mdp zero_reward_copy(const Mdp& mdp) {
  Mdp::OutcomeTable t = mdp.table();
  for (auto& row : t)
    for (auto& outs : row)
      for (auto& o : outs) o.reward = 0.0;
  return Mdp(mdp.num_states(), mdp.num_actions(), mdp.start_state(), t);
}

Mdp one_step_mdp(int n_actions) {
  Mdp::OutcomeTable t(1, std::vector<std::vector<Outcome>>(static_cast<std::size_t>(n_actions),
                                                           {{1.0, kTerminal, 1.0}}));
  return Mdp(1, n_actions, 0, t);
}

}  // namespace

TEST_CASE("exact evaluation matches backward induction on every catalog problem") {
  for (auto kind : kAllKinds) {
    const Mdp mdp = make_counterexample(kind).mdp;
    for (int k = 0; k <= 10; ++k) {
      const TabularPolicy pi = policy_with_rho(k / 10.0);
      const ValueVector v = evaluate_exact(mdp, pi);
      for (State s = 0; s < kNumStates; ++s) {
        CHECK(v(s) == doctest::Approx(oracle::backward_induction(mdp, pi, s)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("worst case under pi_r is worth 2 at A with C=2, E=3") {
  const Mdp mdp = make_counterexample(CounterexampleKind::WorstCase).mdp;
  const ValueVector v = evaluate_exact(mdp, policy_right());
  CHECK(v(kA) == doctest::Approx(2.0));
  CHECK(v(kC) == doctest::Approx(2.0));
  CHECK(v(kE) == doctest::Approx(3.0));
  CHECK(v(kB) == doctest::Approx(0.0));
  CHECK(v(kD) == doctest::Approx(-1.0));
}

TEST_CASE("oscillating under pi_l: A=0, B=0, D=1") {
  const Mdp mdp = make_counterexample(CounterexampleKind::Oscillating).mdp;
  const ValueVector v = evaluate_exact(mdp, policy_left());
  CHECK(v(kA) == doctest::Approx(0.0));
  CHECK(v(kB) == doctest::Approx(0.0));
  CHECK(v(kD) == doctest::Approx(1.0));
}

TEST_CASE("zero rewards give zero values") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Mdp mdp = zero_reward_copy(make_random_episodic_mdp(5, 2, rng));
    const ValueVector v = evaluate_exact(mdp, random_policy(5, 2, rng));
    CHECK(v.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("exact evaluation agrees with iterative sweeps on random cyclic MDPs") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Mdp mdp = make_random_episodic_mdp(6, 3, rng);
    const TabularPolicy pi = random_policy(6, 3, rng);
    const ValueVector v = evaluate_exact(mdp, pi);
    const auto ref = oracle::iterative_values(mdp, pi);
    for (State s = 0; s < 6; ++s) CHECK(std::abs(v(s) - ref[static_cast<std::size_t>(s)]) < 1e-10);
  }
}

TEST_CASE("Bellman residual of exact evaluation is below 1e-10 for random MDPs and policies") {
  Rng rng(8);
  std::uniform_int_distribution<int> ns(1, 8), na(1, 3);
  for (int i = 0; i < 200; ++i) {
    const int n = ns(rng), m = na(rng);
    const Mdp mdp = make_random_episodic_mdp(n, m, rng);
    const TabularPolicy pi = random_policy(n, m, rng);
    const ValueVector v = evaluate_exact(mdp, pi);
    CHECK((v - bellman_backup(mdp, pi, v)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("catalog policies have Bellman residual below 1e-10") {
  for (auto kind : kAllKinds) {
    const Mdp mdp = make_counterexample(kind).mdp;
    for (int k = 0; k <= 100; ++k) {
      const TabularPolicy pi = policy_with_rho(k / 100.0);
      const ValueVector v = evaluate_exact(mdp, pi);
      CHECK((v - bellman_backup(mdp, pi, v)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("on-policy distribution of pi_l is uniform on A, B, D") {
  for (auto kind : kAllKinds) {
    const ValueVector mu = on_policy_distribution(make_counterexample(kind).mdp, policy_left());
    CHECK(mu(kA) == doctest::Approx(1.0 / 3));
    CHECK(mu(kB) == doctest::Approx(1.0 / 3));
    CHECK(mu(kD) == doctest::Approx(1.0 / 3));
    CHECK(mu(kC) == 0.0);
    CHECK(mu(kE) == 0.0);
  }
}

TEST_CASE("on-policy distribution for rho is [1, 1-rho, rho, 1-rho, rho] / 3") {
  const Mdp mdp = make_counterexample(CounterexampleKind::MultipleFixedPoint).mdp;
  for (int k = 0; k <= 20; ++k) {
    const double rho = k / 20.0;
    const ValueVector mu = on_policy_distribution(mdp, policy_with_rho(rho));
    const double expected[] = {1.0 / 3, (1 - rho) / 3, rho / 3, (1 - rho) / 3, rho / 3};
    for (State s = 0; s < kNumStates; ++s) CHECK(mu(s) == doctest::Approx(expected[s]).epsilon(1e-12));
  }
}

TEST_CASE("single state that terminates immediately has mu = [1]") {
  const ValueVector mu = on_policy_distribution(one_step_mdp(2), TabularPolicy::uniform(1, 2));
  REQUIRE(mu.size() == 1);
  CHECK(mu(0) == doctest::Approx(1.0));
}

TEST_CASE("visit counts match propagated distributions; mu sums to 1 on the reachable support") {
  Rng rng(13);
  for (int i = 0; i < 40; ++i) {
    const Mdp mdp = make_random_episodic_mdp(7, 2, rng);
    const TabularPolicy pi = random_policy(7, 2, rng);
    const ValueVector n = expected_visits(mdp, pi);
    const auto ref = oracle::propagated_visits(mdp, pi);
    for (State s = 0; s < 7; ++s) CHECK(std::abs(n(s) - ref[static_cast<std::size_t>(s)]) < 1e-9);
    const ValueVector mu = on_policy_distribution(mdp, pi);
    CHECK(mu.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mu.minCoeff() >= 0.0);
    for (State s = 0; s < 7; ++s) CHECK((mu(s) > 0.0) == (ref[static_cast<std::size_t>(s)] > 1e-14));
  }
}

TEST_CASE("Bellman backup: fixed point at v_pi and hand-computed zero-vector step") {
  const Mdp mdp = make_counterexample(CounterexampleKind::Oscillating).mdp;
  const TabularPolicy pi = policy_left();
  const ValueVector v = evaluate_exact(mdp, pi);
  CHECK((bellman_backup(mdp, pi, v) - v).cwiseAbs().maxCoeff() < 1e-12);
  const ValueVector b = bellman_backup(mdp, pi, ValueVector::Zero(kNumStates));
  CHECK(b(kD) == doctest::Approx(1.0));
  CHECK(b(kB) == doctest::Approx(-1.0));
  CHECK(b(kA) == doctest::Approx(0.0));
}

TEST_CASE("Bellman backup on all-terminal zero-reward transitions is zero for any v") {
  Mdp::OutcomeTable t(3, std::vector<std::vector<Outcome>>(2, {{1.0, kTerminal, 0.0}}));
  const Mdp mdp(3, 2, 0, t);
  const ValueVector b = bellman_backup(mdp, TabularPolicy::uniform(3, 2), ValueVector::Constant(3, 7.0));
  CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Bellman backup matches the one-step oracle on random MDPs") {
  Rng rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const Mdp mdp = make_random_episodic_mdp(5, 3, rng);
    const TabularPolicy pi = random_policy(5, 3, rng);
    std::vector<double> v(5);
    for (double& x : v) x = normal(rng);
    const ValueVector ev = Eigen::Map<const Eigen::VectorXd>(v.data(), 5);
    const ValueVector b = bellman_backup(mdp, pi, ev);
    const ValueVector bs = bellman_optimality_backup(mdp, ev);
    for (State s = 0; s < 5; ++s) {
      double expect = 0.0, best = -1e300;
      for (Action a = 0; a < 3; ++a) {
        const double q = oracle::one_step(mdp, s, a, v);
        expect += pi.prob(s, a) * q;
        best = std::max(best, q);
      }
      CHECK(b(s) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(bs(s) == doctest::Approx(best).epsilon(1e-12));
      CHECK(bs(s) >= b(s) - 1e-12);
    }
  }
}

TEST_CASE("optimality backup: fixed point at v_pi_r on worst case; zero v at A gives 0") {
  const Mdp worst = make_counterexample(CounterexampleKind::WorstCase).mdp;
  const double left = evaluate_exact(worst, policy_left())(kA);
  const double right = evaluate_exact(worst, policy_right())(kA);
  REQUIRE(right > left);
  const ValueVector v = evaluate_exact(worst, policy_right());
  CHECK((bellman_optimality_backup(worst, v) - v).cwiseAbs().maxCoeff() < 1e-12);
  const Mdp osc = make_counterexample(CounterexampleKind::Oscillating).mdp;
  CHECK(bellman_optimality_backup(osc, ValueVector::Zero(kNumStates))(kA) == 0.0);
}

TEST_CASE("single-action MDP: optimality backup equals the policy backup") {
  Rng rng(4);
  const Mdp mdp = make_random_episodic_mdp(5, 1, rng);
  const ValueVector v = ValueVector::LinSpaced(5, -1.0, 2.0);
  CHECK((bellman_optimality_backup(mdp, v) - bellman_backup(mdp, TabularPolicy::uniform(5, 1), v))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("deterministic MDP and policy: trajectory does not depend on the seed") {
  const Mdp mdp = make_counterexample(CounterexampleKind::WorstCase).mdp;
  Rng a(1), b(999);
  const Trajectory ta = sample_episode(mdp, policy_right(), a);
  const Trajectory tb = sample_episode(mdp, policy_right(), b);
  REQUIRE(ta.length() == tb.length());
  CHECK(ta.length() == 3);
  for (std::size_t i = 0; i < ta.length(); ++i) {
    CHECK(ta.steps[i].state == tb.steps[i].state);
    CHECK(ta.steps[i].next == tb.steps[i].next);
  }
  CHECK(ta.return_ == 2.0);
  CHECK(ta.steps.back().next == kTerminal);
  double sum = 0.0;
  for (const auto& st : ta.steps) sum += st.reward;
  CHECK(sum == ta.return_);
}

TEST_CASE("rho = 0.5 picks r at A within 3 binomial sigma over 1e5 episodes") {
  const Mdp mdp = make_counterexample(CounterexampleKind::Oscillating).mdp;
  Rng rng(42);
  const int n = 100000;
  int right = 0;
  for (int i = 0; i < n; ++i) right += sample_episode(mdp, policy_with_rho(0.5), rng).steps[0].action;
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(right - n * 0.5) < 3 * sigma);
}

TEST_CASE("Monte Carlo mean return is within 4 standard errors of the exact value") {
  Rng rng(77);
  const Mdp mdp = make_random_episodic_mdp(5, 2, rng);
  const TabularPolicy pi = random_policy(5, 2, rng);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = sample_episode(mdp, pi, rng).return_;
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  const ValueVector v = evaluate_exact(mdp, pi);
  double exact = 0.0;
  for (Action a = 0; a < 2; ++a) exact += pi.prob(mdp.start_state(), a) * lookahead(mdp, mdp.start_state(), a, v);
  CHECK(std::abs(mean - exact) < 4 * se);
}

TEST_CASE("step cap raises a runaway-episode error") {
  const Mdp mdp = make_counterexample(CounterexampleKind::WorstCase).mdp;
  Rng rng(0);
  CHECK_THROWS_AS(sample_episode(mdp, policy_left(), rng, 2), RunawayEpisodeError);
}

TEST_CASE("construction rejects bad distributions and non-terminating MDPs") {
  Mdp::OutcomeTable bad(1, {{{0.5, kTerminal, 0.0}}});
  CHECK_THROWS_AS(Mdp(1, 1, 0, bad), std::invalid_argument);
  Mdp::OutcomeTable loop(2, std::vector<std::vector<Outcome>>(2));
  loop[0][0] = {{1.0, 1, 0.0}};
  loop[0][1] = {{1.0, kTerminal, 0.0}};
  loop[1][0] = {{1.0, 1, 0.0}};  // self loop under action 0
  loop[1][1] = {{1.0, kTerminal, 0.0}};
  CHECK_THROWS_AS(Mdp(2, 2, 0, loop), NonEpisodicError);
}

TEST_CASE("policy validation rejects rows that do not sum to one") {
  Eigen::MatrixXd p(1, 2);
  p << 0.7, 0.2;
  CHECK_THROWS(TabularPolicy(p));
  p << 1.2, -0.2;
  CHECK_THROWS(TabularPolicy(p));
}

TEST_CASE("JSON round trip preserves values and labels") {
  const Mdp mdp = make_counterexample(CounterexampleKind::MultipleFixedPoint).mdp;
  const Mdp back = mdp_from_json(mdp_to_json(mdp));
  CHECK(back.labels() == mdp.labels());
  CHECK(back.action_labels() == mdp.action_labels());
  for (int k = 0; k <= 4; ++k) {
    const TabularPolicy pi = policy_with_rho(k / 4.0);
    CHECK((evaluate_exact(back, pi) - evaluate_exact(mdp, pi)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("JSON loader reports missing and duplicate entries and unknown labels") {
  nlohmann::json doc = mdp_to_json(make_counterexample(CounterexampleKind::WorstCase).mdp);
  nlohmann::json missing = doc;
  missing["transitions"].erase(0);
  CHECK_THROWS_WITH_AS(mdp_from_json(missing), doctest::Contains("missing"), std::invalid_argument);
  nlohmann::json dup = doc;
  dup["transitions"].push_back(doc["transitions"][0]);
  CHECK_THROWS_WITH_AS(mdp_from_json(dup), doctest::Contains("duplicate"), std::invalid_argument);
  nlohmann::json unknown = doc;
  unknown["start"] = "Z";
  CHECK_THROWS_AS(mdp_from_json(unknown), std::invalid_argument);
}

TEST_CASE("load_mdp reads a file and names the path on failure") {
  const auto path = std::filesystem::temp_directory_path() / "apelab_test_mdp.json";
  {
    std::ofstream out(path);
    out << mdp_to_json(make_counterexample(CounterexampleKind::Oscillating).mdp).dump();
  }
  CHECK(load_mdp(path).num_states() == 5);
  CHECK_THROWS_WITH(load_mdp("/nonexistent/x.json"), doctest::Contains("/nonexistent/x.json"));
  std::filesystem::remove(path);
}
