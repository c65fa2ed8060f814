#pragma once

// Online agents over one-hot aggregated representations: Q-learning with
// epsilon-greedy exploration, and actor-critic with a softmax actor and a
// Monte Carlo or TD(0) critic.
//
// Records per episode:
//   Q-learning:   tracked_value_1 = Q(g(start), 0), tracked_value_2 = Q(g(start), 1)
//   actor-critic: tracked_value_1 = w(g(s0)), tracked_value_2 = w(g(s1)) where
//                 s_a is the first listed successor of the start state under
//                 action a (B and C on the catalog problems);
//                 policy_statistic = pi(1 | g(start)).

#include "apelab/linear.hpp"
#include "apelab/mdp.hpp"
#include "apelab/records.hpp"

#include <cstdint>
#include <optional>

namespace apelab {

struct AgentConfig {
  double step_size = 0.05;
  double epsilon = 0.05;
  int n_episodes = 20000;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  /// Subtract w(g(s)) from the actor's one-step target.
  bool actor_baseline = true;
};

void validate(const AgentConfig& cfg);

struct QTable {
  /// groups x actions
  Eigen::MatrixXd values;
};

enum class CriticMode { MonteCarlo, TD0 };

struct ActorCriticParams {
  Eigen::VectorXd critic;        // one weight per group
  Eigen::MatrixXd preferences;   // groups x actions
  CriticMode mode = CriticMode::MonteCarlo;

  /// Row-wise softmax of the preferences for `group`.
  Eigen::VectorXd policy(int group) const;
};

struct QLearningRun {
  RunLog records;
  QTable final_table;
};

struct ActorCriticRun {
  RunLog records;
  ActorCriticParams final_params;
};

/// Unit-normal (times init_scale) initialised table.
QLearningRun q_learning_run(const Mdp& mdp, const FeatureMap& aggregation, const AgentConfig& cfg);
/// Same, starting from a supplied table instead of a random one.
QLearningRun q_learning_run(const Mdp& mdp, const FeatureMap& aggregation, const AgentConfig& cfg,
                            const QTable& initial);

ActorCriticRun actor_critic_run(const Mdp& mdp, const FeatureMap& aggregation,
                                const AgentConfig& cfg, CriticMode mode);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& preferences);

/// Index of the largest entry, lowest index on ties.
Action argmax_lowest(const Eigen::VectorXd& values);

/// Sign changes of (tracked_value_1 - tracked_value_2) after the first
/// `burn_in_fraction` of the run. Exact ties keep the previous rank.
int count_rank_flips(const RunLog& log, double burn_in_fraction);

}  // namespace apelab
