#include "apelab/agents.hpp"
#include "apelab/catalog.hpp"

#include <doctest.h>

#include <cmath>

using namespace apelab;
using namespace apelab::catalog;

namespace {

Mdp zero_reward_catalog() {
  Mdp::OutcomeTable t = make_counterexample(CounterexampleKind::WorstCase).mdp.table();
  for (auto& row : t)
    for (auto& outs : row)
      for (auto& o : outs) o.reward = 0.0;
  return Mdp(kNumStates, 2, kA, t);
}

RunRecord rec(std::int64_t ep, double t1, double t2) {
  RunRecord r;
  r.episode = ep;
  r.tracked_value_1 = t1;
  r.tracked_value_2 = t2;
  return r;
}

}  // namespace

TEST_CASE("softmax is a distribution and survives large preferences") {
  const Eigen::VectorXd p = softmax(Eigen::Vector3d(1000.0, 0.0, -1000.0));
  CHECK(std::isfinite(p.sum()));
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p(0) == doctest::Approx(1.0));
  const Eigen::VectorXd q = softmax(Eigen::Vector2d(0.3, 0.3));
  CHECK(q(0) == doctest::Approx(0.5));
  Rng rng(1);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd r = softmax(Eigen::Vector4d(normal(rng), normal(rng), normal(rng), normal(rng)));
    CHECK(r.minCoeff() >= 0.0);
    CHECK(r.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("argmax_lowest breaks ties toward the lowest index") {
  CHECK(argmax_lowest(Eigen::Vector3d(1, 2, 2)) == 1);
  CHECK(argmax_lowest(Eigen::Vector3d(3, 3, 3)) == 0);
}

TEST_CASE("rank flips count sign changes after burn-in") {
  RunLog log;
  const double diffs[] = {1, -1, 1, -1, 1, 1, -1, 0, 1, -1};
  for (int i = 0; i < 10; ++i) log.push_back(rec(i, diffs[i], 0.0));
  CHECK(count_rank_flips(log, 0.0) == 7);  // the exact tie keeps the previous rank
  CHECK(count_rank_flips(log, 0.5) == 3);
}

TEST_CASE("step size zero leaves the Q table untouched") {
  const Counterexample ce = make_counterexample(CounterexampleKind::Oscillating);
  AgentConfig cfg;
  cfg.step_size = 0.0;
  cfg.n_episodes = 200;
  QTable init{Eigen::MatrixXd::Random(3, 2)};
  const QLearningRun run = q_learning_run(ce.mdp, ce.features, cfg, init);
  CHECK(run.final_table.values == init.values);
  CHECK(run.records.size() == 200);
}

TEST_CASE("greedy Q-learning that prefers l keeps returning 0") {
  // Every l path sums to zero; 20 episodes cannot pull Q(A,l) from 100 below the rest.
  for (auto kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    AgentConfig cfg;
    cfg.epsilon = 0.0;
    cfg.n_episodes = 20;
    QTable init{Eigen::MatrixXd::Zero(3, 2)};
    init.values(0, kLeft) = 100.0;
    for (const auto& r : q_learning_run(ce.mdp, ce.features, cfg, init).records) CHECK(r.return_ == 0.0);
  }
}

TEST_CASE("exact features: Q-learning and actor-critic find r on the worst case") {
  const Mdp mdp = make_counterexample(CounterexampleKind::WorstCase).mdp;
  const FeatureMap exact = FeatureMap::identity(kNumStates);
  AgentConfig cfg;
  cfg.n_episodes = 5000;
  cfg.seed = 4;
  const QLearningRun q = q_learning_run(mdp, exact, cfg);
  CHECK(argmax_lowest(q.final_table.values.row(kA).transpose()) == kRight);
  const ActorCriticRun ac = actor_critic_run(mdp, exact, cfg, CriticMode::TD0);
  CHECK(ac.final_params.policy(kA)(kRight) > 0.9);
}

TEST_CASE("aggregated worst case: Q-learning settles on l") {
  const Counterexample ce = make_counterexample(CounterexampleKind::WorstCase);
  AgentConfig cfg;
  cfg.seed = 2;
  const QLearningRun q = q_learning_run(ce.mdp, ce.features, cfg);
  CHECK(argmax_lowest(q.final_table.values.row(0).transpose()) == kLeft);
}

TEST_CASE("zero rewards and zero initialisation: actor-critic does not drift") {
  const Mdp mdp = zero_reward_catalog();
  AgentConfig cfg;
  cfg.init_scale = 0.0;
  cfg.n_episodes = 2000;
  for (auto mode : {CriticMode::MonteCarlo, CriticMode::TD0}) {
    const ActorCriticRun run = actor_critic_run(mdp, catalog_aggregation(), cfg, mode);
    CHECK(run.final_params.critic.cwiseAbs().maxCoeff() < 0.2);
    CHECK(std::abs(run.final_params.policy(0)(kRight) - 0.5) < 0.2);
    for (const auto& r : run.records) CHECK(r.return_ == 0.0);
  }
}

TEST_CASE("policy statistic is pi(r | g(A)) and stays a probability") {
  const Counterexample ce = make_counterexample(CounterexampleKind::MultipleFixedPoint);
  AgentConfig cfg;
  cfg.n_episodes = 500;
  const ActorCriticRun run = actor_critic_run(ce.mdp, ce.features, cfg, CriticMode::MonteCarlo);
  for (const auto& r : run.records) {
    REQUIRE(r.policy_statistic);
    CHECK(*r.policy_statistic >= 0.0);
    CHECK(*r.policy_statistic <= 1.0);
  }
  CHECK(*run.records.back().policy_statistic == doctest::Approx(run.final_params.policy(0)(kRight)));
}

TEST_CASE("agents are deterministic given the seed") {
  const Counterexample ce = make_counterexample(CounterexampleKind::Oscillating);
  AgentConfig cfg;
  cfg.n_episodes = 1000;
  cfg.seed = 9;
  const auto a = q_learning_run(ce.mdp, ce.features, cfg).records;
  const auto b = q_learning_run(ce.mdp, ce.features, cfg).records;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].return_ == b[i].return_);
    CHECK(a[i].tracked_value_1 == b[i].tracked_value_1);
  }
  const auto c = actor_critic_run(ce.mdp, ce.features, cfg, CriticMode::TD0).records;
  const auto d = actor_critic_run(ce.mdp, ce.features, cfg, CriticMode::TD0).records;
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(*c[i].policy_statistic == *d[i].policy_statistic);
}

TEST_CASE("agent config validation") {
  AgentConfig cfg;
  cfg.step_size = -0.1;
  CHECK_THROWS(validate(cfg));
  cfg = AgentConfig{};
  cfg.epsilon = 1.5;
  CHECK_THROWS(validate(cfg));
  cfg = AgentConfig{};
  cfg.n_episodes = 0;
  CHECK_THROWS(validate(cfg));
}
