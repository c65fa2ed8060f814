#pragma once

// Finite episodic MDPs: representation, exact policy evaluation, on-policy
// distribution, Bellman backups and trajectory sampling.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace apelab {

using State = int;
using Action = int;
using Rng = std::mt19937_64;
using ValueVector = Eigen::VectorXd;

/// Successor index of the absorbing terminal sink. Its value is always 0.
inline constexpr State kTerminal = -1;

/// Raised when a policy (or the MDP itself) admits a trajectory that never
/// reaches the terminal state.
class NonEpisodicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by sample_episode when the step cap is hit.
class RunawayEpisodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Outcome {
  double probability = 1.0;
  State next = kTerminal;
  double reward = 0.0;
};

/// Immutable finite episodic MDP. Construction validates that every
/// (state, action) outcome list is a distribution and that every
/// deterministic policy terminates with probability one.
class Mdp {
 public:
  using OutcomeTable = std::vector<std::vector<std::vector<Outcome>>>;

  Mdp(int n_states, int n_actions, State start, OutcomeTable transitions,
      std::vector<std::string> labels = {},
      std::vector<std::string> action_labels = {});

  int num_states() const { return n_states_; }
  int num_actions() const { return n_actions_; }
  State start_state() const { return start_; }

  std::span<const Outcome> outcomes(State s, Action a) const {
    return transitions_[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
  }
  const OutcomeTable& table() const { return transitions_; }

  const std::string& label(State s) const { return labels_[static_cast<std::size_t>(s)]; }
  const std::string& action_label(Action a) const {
    return action_labels_[static_cast<std::size_t>(a)];
  }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& action_labels() const { return action_labels_; }
  std::optional<State> find_state(std::string_view label) const;
  std::optional<Action> find_action(std::string_view label) const;

  /// Expected immediate reward of taking `a` in `s`.
  double expected_reward(State s, Action a) const;

 private:
  int n_states_;
  int n_actions_;
  State start_;
  OutcomeTable transitions_;
  std::vector<std::string> labels_;
  std::vector<std::string> action_labels_;
};

/// True when no non-empty set of states can be kept closed by some choice of
/// actions, i.e. every stationary policy terminates with probability one.
bool all_policies_episodic(const Mdp& mdp);

/// Row-stochastic table pi(a|s).
class TabularPolicy {
 public:
  TabularPolicy(int n_states, int n_actions);
  explicit TabularPolicy(Eigen::MatrixXd probs);

  static TabularPolicy uniform(int n_states, int n_actions);
  static TabularPolicy deterministic(int n_actions, std::span<const Action> actions);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  double prob(State s, Action a) const { return probs_(s, a); }
  const Eigen::MatrixXd& matrix() const { return probs_; }

  bool is_deterministic() const;
  /// Action with the largest probability in `s` (lowest index on ties).
  Action mode(State s) const;
  /// Per-state modes; equals the policy itself when deterministic.
  std::vector<Action> actions() const;

  friend bool operator==(const TabularPolicy& a, const TabularPolicy& b) {
    return a.probs_ == b.probs_;
  }

 private:
  Eigen::MatrixXd probs_;
};

struct Step {
  State state;
  Action action;
  double reward;
  State next;
};

struct Trajectory {
  std::vector<Step> steps;
  double return_ = 0.0;

  std::size_t length() const { return steps.size(); }
};

/// Policy-induced transition matrix over non-terminal states and the
/// expected one-step reward vector.
struct PolicyChain {
  Eigen::MatrixXd transition;
  Eigen::VectorXd reward;
};

PolicyChain policy_chain(const Mdp& mdp, const TabularPolicy& policy);

/// Throws NonEpisodicError naming a state that cannot reach the terminal state
/// through transitions the policy takes with positive probability.
void require_episodic(const Mdp& mdp, const TabularPolicy& policy);

/// v_pi from (I - P_pi) v = r_pi.
ValueVector evaluate_exact(const Mdp& mdp, const TabularPolicy& policy);

/// Expected visit counts n solving (I - P_pi^T) n = e_start.
ValueVector expected_visits(const Mdp& mdp, const TabularPolicy& policy);

/// mu_pi(s) = E[visits to s] / E[T].
ValueVector on_policy_distribution(const Mdp& mdp, const TabularPolicy& policy);

/// (B_pi v)(s) = sum_a pi(a|s) sum_o p_o (r_o + v(next_o)), v(terminal) = 0.
ValueVector bellman_backup(const Mdp& mdp, const TabularPolicy& policy, const ValueVector& v);

/// One-step look-ahead q(s, a) = sum_o p_o (r_o + v(next_o)).
double lookahead(const Mdp& mdp, State s, Action a, const ValueVector& v);

/// (B* v)(s) = max_a lookahead(s, a, v).
ValueVector bellman_optimality_backup(const Mdp& mdp, const ValueVector& v);

inline constexpr std::size_t kDefaultStepCap = 1'000'000;

Trajectory sample_episode(const Mdp& mdp, const TabularPolicy& policy, Rng& rng,
                          std::size_t step_cap = kDefaultStepCap);

/// Draws an outcome of (s, a) from the supplied uniform variate in [0, 1).
const Outcome& pick_outcome(const Mdp& mdp, State s, Action a, double u);

/// Random MDP where every (state, action) terminates with probability at
/// least `min_termination`, so every policy is episodic.
Mdp make_random_episodic_mdp(int n_states, int n_actions, Rng& rng,
                             double min_termination = 0.1, int max_outcomes = 3);

}  // namespace apelab
