#include "apelab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace apelab {

namespace {

constexpr double kDistributionTolerance = 1e-12;

void check_shape(const Mdp& mdp, const TabularPolicy& policy) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("policy shape does not match MDP");
  }
}

void check_shape(const Mdp& mdp, const ValueVector& v) {
  if (v.size() != mdp.num_states()) {
    throw std::invalid_argument("value vector has " + std::to_string(v.size()) +
                                " entries, MDP has " + std::to_string(mdp.num_states()) +
                                " states");
  }
}

}  // namespace

Mdp::Mdp(int n_states, int n_actions, State start, OutcomeTable transitions,
         std::vector<std::string> labels, std::vector<std::string> action_labels)
    : n_states_(n_states),
      n_actions_(n_actions),
      start_(start),
      transitions_(std::move(transitions)),
      labels_(std::move(labels)),
      action_labels_(std::move(action_labels)) {
  if (n_states_ <= 0 || n_actions_ <= 0) {
    throw std::invalid_argument("MDP needs at least one state and one action");
  }
  if (start_ < 0 || start_ >= n_states_) {
    throw std::invalid_argument("start state out of range");
  }
  if (transitions_.size() != static_cast<std::size_t>(n_states_)) {
    throw std::invalid_argument("transition table must have one row per state");
  }
  for (State s = 0; s < n_states_; ++s) {
    const auto& row = transitions_[static_cast<std::size_t>(s)];
    if (row.size() != static_cast<std::size_t>(n_actions_)) {
      throw std::invalid_argument("state " + std::to_string(s) +
                                  " does not list outcomes for every action");
    }
    for (Action a = 0; a < n_actions_; ++a) {
      const auto& outs = row[static_cast<std::size_t>(a)];
      if (outs.empty()) {
        throw std::invalid_argument("empty outcome list at (" + std::to_string(s) + ", " +
                                    std::to_string(a) + ")");
      }
      double total = 0.0;
      for (const Outcome& o : outs) {
        if (!(o.probability >= 0.0) || !std::isfinite(o.reward)) {
          throw std::invalid_argument("invalid outcome at (" + std::to_string(s) + ", " +
                                      std::to_string(a) + ")");
        }
        if (o.next != kTerminal && (o.next < 0 || o.next >= n_states_)) {
          throw std::invalid_argument("successor index out of range at (" +
                                      std::to_string(s) + ", " + std::to_string(a) + ")");
        }
        total += o.probability;
      }
      if (std::abs(total - 1.0) > kDistributionTolerance) {
        throw std::invalid_argument("outcome probabilities at (" + std::to_string(s) + ", " +
                                    std::to_string(a) + ") sum to " + std::to_string(total));
      }
    }
  }
  if (labels_.empty()) {
    for (State s = 0; s < n_states_; ++s) labels_.push_back("s" + std::to_string(s));
  }
  if (action_labels_.empty()) {
    for (Action a = 0; a < n_actions_; ++a) action_labels_.push_back("a" + std::to_string(a));
  }
  if (labels_.size() != static_cast<std::size_t>(n_states_) ||
      action_labels_.size() != static_cast<std::size_t>(n_actions_)) {
    throw std::invalid_argument("label count does not match state/action count");
  }
  if (!all_policies_episodic(*this)) {
    throw NonEpisodicError("some deterministic policy never reaches the terminal state");
  }
}

std::optional<State> Mdp::find_state(std::string_view label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<State>(it - labels_.begin());
}

std::optional<Action> Mdp::find_action(std::string_view label) const {
  const auto it = std::find(action_labels_.begin(), action_labels_.end(), label);
  if (it == action_labels_.end()) return std::nullopt;
  return static_cast<Action>(it - action_labels_.begin());
}

double Mdp::expected_reward(State s, Action a) const {
  double r = 0.0;
  for (const Outcome& o : outcomes(s, a)) r += o.probability * o.reward;
  return r;
}

bool all_policies_episodic(const Mdp& mdp) {
  // Greatest set of states that some action choice keeps closed.
  std::vector<bool> trapped(static_cast<std::size_t>(mdp.num_states()), true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (State s = 0; s < mdp.num_states(); ++s) {
      if (!trapped[static_cast<std::size_t>(s)]) continue;
      bool closable = false;
      for (Action a = 0; a < mdp.num_actions() && !closable; ++a) {
        closable = std::all_of(mdp.outcomes(s, a).begin(), mdp.outcomes(s, a).end(),
                               [&](const Outcome& o) {
                                 return o.probability == 0.0 ||
                                        (o.next != kTerminal &&
                                         trapped[static_cast<std::size_t>(o.next)]);
                               });
      }
      if (!closable) {
        trapped[static_cast<std::size_t>(s)] = false;
        changed = true;
      }
    }
  }
  return std::none_of(trapped.begin(), trapped.end(), [](bool t) { return t; });
}

TabularPolicy::TabularPolicy(int n_states, int n_actions)
    : probs_(Eigen::MatrixXd::Zero(n_states, n_actions)) {
  probs_.col(0).setOnes();
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) {
    throw std::invalid_argument("policy table must be non-empty");
  }
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if ((probs_.row(s).array() < 0.0).any() || !probs_.row(s).allFinite()) {
      throw std::invalid_argument("policy has a negative or non-finite entry in state " +
                                  std::to_string(s));
    }
    if (std::abs(probs_.row(s).sum() - 1.0) > kDistributionTolerance) {
      throw std::invalid_argument("policy row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return TabularPolicy(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
}

TabularPolicy TabularPolicy::deterministic(int n_actions, std::span<const Action> actions) {
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions) {
      throw std::invalid_argument("action index out of range");
    }
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return TabularPolicy(std::move(probs));
}

bool TabularPolicy::is_deterministic() const {
  return ((probs_.array() == 0.0) || (probs_.array() == 1.0)).all();
}

Action TabularPolicy::mode(State s) const {
  Eigen::Index best = 0;
  probs_.row(s).maxCoeff(&best);
  return static_cast<Action>(best);
}

std::vector<Action> TabularPolicy::actions() const {
  std::vector<Action> out(static_cast<std::size_t>(num_states()));
  for (State s = 0; s < num_states(); ++s) out[static_cast<std::size_t>(s)] = mode(s);
  return out;
}

PolicyChain policy_chain(const Mdp& mdp, const TabularPolicy& policy) {
  check_shape(mdp, policy);
  const int n = mdp.num_states();
  PolicyChain chain{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (State s = 0; s < n; ++s) {
    for (Action a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy.prob(s, a);
      if (pa == 0.0) continue;
      for (const Outcome& o : mdp.outcomes(s, a)) {
        chain.reward(s) += pa * o.probability * o.reward;
        if (o.next != kTerminal) chain.transition(s, o.next) += pa * o.probability;
      }
    }
  }
  return chain;
}

void require_episodic(const Mdp& mdp, const TabularPolicy& policy) {
  check_shape(mdp, policy);
  const auto n = static_cast<std::size_t>(mdp.num_states());
  // Reverse edges of the support graph, then search backwards from terminal.
  std::vector<std::vector<State>> predecessors(n);
  std::deque<State> frontier;
  std::vector<bool> reaches(n, false);
  for (State s = 0; s < mdp.num_states(); ++s) {
    for (Action a = 0; a < mdp.num_actions(); ++a) {
      if (policy.prob(s, a) == 0.0) continue;
      for (const Outcome& o : mdp.outcomes(s, a)) {
        if (o.probability == 0.0) continue;
        if (o.next == kTerminal) {
          if (!reaches[static_cast<std::size_t>(s)]) {
            reaches[static_cast<std::size_t>(s)] = true;
            frontier.push_back(s);
          }
        } else {
          predecessors[static_cast<std::size_t>(o.next)].push_back(s);
        }
      }
    }
  }
  while (!frontier.empty()) {
    const State s = frontier.front();
    frontier.pop_front();
    for (State p : predecessors[static_cast<std::size_t>(s)]) {
      if (!reaches[static_cast<std::size_t>(p)]) {
        reaches[static_cast<std::size_t>(p)] = true;
        frontier.push_back(p);
      }
    }
  }
  for (State s = 0; s < mdp.num_states(); ++s) {
    if (!reaches[static_cast<std::size_t>(s)]) {
      throw NonEpisodicError("state " + mdp.label(s) +
                             " cannot reach the terminal state under this policy");
    }
  }
}

ValueVector evaluate_exact(const Mdp& mdp, const TabularPolicy& policy) {
  require_episodic(mdp, policy);
  const PolicyChain chain = policy_chain(mdp, policy);
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(mdp.num_states(), mdp.num_states()) - chain.transition;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw NonEpisodicError("evaluation system is singular");
  return lu.solve(chain.reward);
}

ValueVector expected_visits(const Mdp& mdp, const TabularPolicy& policy) {
  require_episodic(mdp, policy);
  const PolicyChain chain = policy_chain(mdp, policy);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(mdp.num_states(), mdp.num_states()) -
                                 chain.transition.transpose();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw NonEpisodicError("flow system is singular");
  Eigen::VectorXd start = Eigen::VectorXd::Zero(mdp.num_states());
  start(mdp.start_state()) = 1.0;
  ValueVector visits = lu.solve(start);
  // Unreachable states solve to round-off noise around zero.
  for (Eigen::Index s = 0; s < visits.size(); ++s) {
    if (std::abs(visits(s)) < 1e-14) visits(s) = 0.0;
  }
  return visits;
}

ValueVector on_policy_distribution(const Mdp& mdp, const TabularPolicy& policy) {
  const ValueVector visits = expected_visits(mdp, policy);
  return visits / visits.sum();
}

double lookahead(const Mdp& mdp, State s, Action a, const ValueVector& v) {
  double q = 0.0;
  for (const Outcome& o : mdp.outcomes(s, a)) {
    q += o.probability * (o.reward + (o.next == kTerminal ? 0.0 : v(o.next)));
  }
  return q;
}

ValueVector bellman_backup(const Mdp& mdp, const TabularPolicy& policy, const ValueVector& v) {
  check_shape(mdp, policy);
  check_shape(mdp, v);
  ValueVector out = ValueVector::Zero(mdp.num_states());
  for (State s = 0; s < mdp.num_states(); ++s) {
    for (Action a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy.prob(s, a);
      if (pa != 0.0) out(s) += pa * lookahead(mdp, s, a, v);
    }
  }
  return out;
}

ValueVector bellman_optimality_backup(const Mdp& mdp, const ValueVector& v) {
  check_shape(mdp, v);
  ValueVector out(mdp.num_states());
  for (State s = 0; s < mdp.num_states(); ++s) {
    double best = lookahead(mdp, s, 0, v);
    for (Action a = 1; a < mdp.num_actions(); ++a) best = std::max(best, lookahead(mdp, s, a, v));
    out(s) = best;
  }
  return out;
}

const Outcome& pick_outcome(const Mdp& mdp, State s, Action a, double u) {
  const auto outs = mdp.outcomes(s, a);
  double cumulative = 0.0;
  for (const Outcome& o : outs) {
    cumulative += o.probability;
    if (u < cumulative) return o;
  }
  // u landed in the rounding gap above the last cumulative sum.
  for (auto it = outs.rbegin(); it != outs.rend(); ++it) {
    if (it->probability > 0.0) return *it;
  }
  return outs.back();
}

Trajectory sample_episode(const Mdp& mdp, const TabularPolicy& policy, Rng& rng,
                          std::size_t step_cap) {
  check_shape(mdp, policy);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Trajectory traj;
  State s = mdp.start_state();
  while (true) {
    if (traj.steps.size() >= step_cap) {
      throw RunawayEpisodeError("episode exceeded " + std::to_string(step_cap) + " steps");
    }
    double u = unit(rng);
    Action a = mdp.num_actions() - 1;
    double cumulative = 0.0;
    for (Action b = 0; b < mdp.num_actions(); ++b) {
      cumulative += policy.prob(s, b);
      if (u < cumulative) {
        a = b;
        break;
      }
    }
    const Outcome& o = pick_outcome(mdp, s, a, unit(rng));
    traj.steps.push_back(Step{s, a, o.reward, o.next});
    traj.return_ += o.reward;
    if (o.next == kTerminal) break;
    s = o.next;
  }
  return traj;
}

Mdp make_random_episodic_mdp(int n_states, int n_actions, Rng& rng, double min_termination,
                             int max_outcomes) {
  if (!(min_termination > 0.0 && min_termination <= 1.0) || max_outcomes < 1) {
    throw std::invalid_argument("invalid random MDP parameters");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_state(0, n_states - 1);
  std::uniform_int_distribution<int> pick_count(1, max_outcomes);
  std::normal_distribution<double> reward(0.0, 1.0);
  Mdp::OutcomeTable table(static_cast<std::size_t>(n_states));
  for (auto& row : table) {
    row.resize(static_cast<std::size_t>(n_actions));
    for (auto& outs : row) {
      const double p_term = min_termination + (1.0 - min_termination) * unit(rng) * 0.5;
      outs.push_back(Outcome{p_term, kTerminal, reward(rng)});
      const int k = pick_count(rng);
      std::vector<double> w(static_cast<std::size_t>(k));
      for (double& x : w) x = 0.05 + unit(rng);
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      double assigned = p_term;
      for (int i = 0; i < k; ++i) {
        const double p = (i + 1 == k) ? 1.0 - assigned
                                      : (1.0 - p_term) * w[static_cast<std::size_t>(i)] / total;
        assigned += p;
        outs.push_back(Outcome{p, pick_state(rng), reward(rng)});
      }
    }
  }
  return Mdp(n_states, n_actions, 0, std::move(table));
}

}  // namespace apelab
