#include "apelab/agents.hpp"

#include <cmath>
#include <stdexcept>

namespace apelab {

namespace {

std::vector<int> groups_of(const Mdp& mdp, const FeatureMap& fm) {
  if (fm.num_states() != mdp.num_states()) {
    throw std::invalid_argument("feature map does not match MDP");
  }
  std::vector<int> groups(static_cast<std::size_t>(mdp.num_states()));
  for (State s = 0; s < mdp.num_states(); ++s) {
    const auto g = fm.group(s);
    if (!g) throw std::invalid_argument("agents need a one-hot aggregation");
    groups[static_cast<std::size_t>(s)] = *g;
  }
  return groups;
}

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Filled row by row so draws do not depend on Eigen's storage order.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
  }
  return m;
}

Action sample_action(const Eigen::VectorXd& probs, double u) {
  double cumulative = 0.0;
  for (Eigen::Index a = 0; a < probs.size(); ++a) {
    cumulative += probs(a);
    if (u < cumulative) return static_cast<Action>(a);
  }
  return static_cast<Action>(probs.size() - 1);
}

}  // namespace

void validate(const AgentConfig& cfg) {
  if (!(cfg.step_size >= 0.0) || !std::isfinite(cfg.step_size)) {
    throw std::invalid_argument("step size must be finite and non-negative");
  }
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (cfg.n_episodes < 1) throw std::invalid_argument("need at least one episode");
  if (!(cfg.init_scale >= 0.0)) throw std::invalid_argument("init scale must be non-negative");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& preferences) {
  const double top = preferences.maxCoeff();
  Eigen::VectorXd e = (preferences.array() - top).exp();
  return e / e.sum();
}

Action argmax_lowest(const Eigen::VectorXd& values) {
  Action best = 0;
  for (Eigen::Index a = 1; a < values.size(); ++a) {
    if (values(a) > values(best)) best = static_cast<Action>(a);
  }
  return best;
}

Eigen::VectorXd ActorCriticParams::policy(int group) const {
  return softmax(preferences.row(group).transpose());
}

QLearningRun q_learning_run(const Mdp& mdp, const FeatureMap& aggregation, const AgentConfig& cfg) {
  Rng init_rng(cfg.seed);
  QTable table{normal_matrix(aggregation.dimension(), mdp.num_actions(), cfg.init_scale, init_rng)};
  return q_learning_run(mdp, aggregation, cfg, table);
}

QLearningRun q_learning_run(const Mdp& mdp, const FeatureMap& aggregation, const AgentConfig& cfg,
                            const QTable& initial) {
  validate(cfg);
  const auto groups = groups_of(mdp, aggregation);
  if (initial.values.rows() != aggregation.dimension() ||
      initial.values.cols() != mdp.num_actions()) {
    throw std::invalid_argument("initial Q table has the wrong shape");
  }
  // Play uses its own stream so a supplied table leaves the draws unchanged.
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_action(0, mdp.num_actions() - 1);

  QLearningRun run{{}, initial};
  Eigen::MatrixXd& q = run.final_table.values;
  run.records.reserve(static_cast<std::size_t>(cfg.n_episodes));
  const int g_start = groups[static_cast<std::size_t>(mdp.start_state())];

  for (int episode = 0; episode < cfg.n_episodes; ++episode) {
    State s = mdp.start_state();
    double ret = 0.0;
    for (std::size_t t = 0;; ++t) {
      if (t >= kDefaultStepCap) throw RunawayEpisodeError("Q-learning episode exceeded step cap");
      const int g = groups[static_cast<std::size_t>(s)];
      Action a;
      if (unit(rng) < cfg.epsilon) {
        a = any_action(rng);
      } else {
        a = argmax_lowest(q.row(g).transpose());
      }
      const Outcome& o = pick_outcome(mdp, s, a, unit(rng));
      ret += o.reward;
      double target = o.reward;
      if (o.next != kTerminal) target += q.row(groups[static_cast<std::size_t>(o.next)]).maxCoeff();
      q(g, a) += cfg.step_size * (target - q(g, a));
      if (o.next == kTerminal) break;
      s = o.next;
    }
    run.records.push_back(RunRecord{cfg.seed, episode, ret, q(g_start, 0),
                                    mdp.num_actions() > 1 ? q(g_start, 1) : q(g_start, 0),
                                    std::nullopt});
  }
  return run;
}

ActorCriticRun actor_critic_run(const Mdp& mdp, const FeatureMap& aggregation,
                                const AgentConfig& cfg, CriticMode mode) {
  validate(cfg);
  const auto groups = groups_of(mdp, aggregation);
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ActorCriticRun run;
  ActorCriticParams& p = run.final_params;
  p.mode = mode;
  p.critic = normal_matrix(aggregation.dimension(), 1, cfg.init_scale, rng).col(0);
  p.preferences = normal_matrix(aggregation.dimension(), mdp.num_actions(), cfg.init_scale, rng);
  run.records.reserve(static_cast<std::size_t>(cfg.n_episodes));

  const State start = mdp.start_state();
  const int g_start = groups[static_cast<std::size_t>(start)];
  auto tracked_group = [&](Action a) {
    const State next = mdp.outcomes(start, std::min(a, mdp.num_actions() - 1)).front().next;
    return next == kTerminal ? -1 : groups[static_cast<std::size_t>(next)];
  };
  const int g_track1 = tracked_group(0);
  const int g_track2 = tracked_group(1);

  struct Visit {
    int group;
    double reward;
  };
  std::vector<Visit> visits;

  for (int episode = 0; episode < cfg.n_episodes; ++episode) {
    State s = mdp.start_state();
    double ret = 0.0;
    visits.clear();
    for (std::size_t t = 0;; ++t) {
      if (t >= kDefaultStepCap) throw RunawayEpisodeError("actor-critic episode exceeded step cap");
      const int g = groups[static_cast<std::size_t>(s)];
      const Eigen::VectorXd pi = p.policy(g);
      const Action a = sample_action(pi, unit(rng));
      const Outcome& o = pick_outcome(mdp, s, a, unit(rng));
      ret += o.reward;
      const double v_next = o.next == kTerminal ? 0.0 : p.critic(groups[static_cast<std::size_t>(o.next)]);
      const double delta = o.reward + v_next - (cfg.actor_baseline ? p.critic(g) : 0.0);
      for (Action b = 0; b < mdp.num_actions(); ++b) {
        p.preferences(g, b) += cfg.step_size * delta * ((b == a ? 1.0 : 0.0) - pi(b));
      }
      if (mode == CriticMode::TD0) {
        p.critic(g) += cfg.step_size * (o.reward + v_next - p.critic(g));
      } else {
        visits.push_back(Visit{g, o.reward});
      }
      if (o.next == kTerminal) break;
      s = o.next;
    }
    if (mode == CriticMode::MonteCarlo) {
      std::vector<double> returns(visits.size());
      double g_t = 0.0;
      for (std::size_t i = visits.size(); i-- > 0;) {
        g_t += visits[i].reward;
        returns[i] = g_t;
      }
      for (std::size_t i = 0; i < visits.size(); ++i) {
        double& w = p.critic(visits[i].group);
        w += cfg.step_size * (returns[i] - w);
      }
    }
    const Eigen::VectorXd pi_start = p.policy(g_start);
    run.records.push_back(RunRecord{
        cfg.seed, episode, ret, g_track1 >= 0 ? p.critic(g_track1) : 0.0,
        g_track2 >= 0 ? p.critic(g_track2) : 0.0,
        pi_start.size() > 1 ? pi_start(1) : 0.0});
  }
  return run;
}

int count_rank_flips(const RunLog& log, double burn_in_fraction) {
  const auto first = static_cast<std::size_t>(burn_in_fraction * static_cast<double>(log.size()));
  int flips = 0;
  int rank = 0;
  for (std::size_t i = first; i < log.size(); ++i) {
    const double diff = log[i].tracked_value_1 - log[i].tracked_value_2;
    const int current = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : rank);
    if (rank != 0 && current != rank) ++flips;
    rank = current;
  }
  return flips;
}

}  // namespace apelab
