#include "apelab/dp.hpp"
#include "apelab/records.hpp"

#include <cmath>
#include <ostream>

namespace apelab {

namespace {

bool theta_close(const LinearValue& a, const LinearValue& b) {
  return a.theta.size() == b.theta.size() &&
         ((a.theta - b.theta).array().abs() <= kThetaTolerance).all();
}

/// Searches earlier entries for `candidate`; on a hit appends it and sets the
/// outcome.
template <typename Same>
bool close_loop(DpTrace& trace, const DpIterate& candidate, Same same) {
  for (std::size_t j = 0; j < trace.iterations.size(); ++j) {
    if (!same(trace.iterations[j], candidate)) continue;
    const int period = static_cast<int>(trace.iterations.size() - j);
    trace.iterations.push_back(candidate);
    if (period == 1) {
      trace.outcome = FixedPoint{static_cast<int>(j)};
    } else {
      trace.outcome = Cycle{period, static_cast<int>(j)};
    }
    return true;
  }
  return false;
}

}  // namespace

std::string describe(const DpOutcome& outcome) {
  if (const auto* fp = std::get_if<FixedPoint>(&outcome)) {
    return "FixedPoint{at " + std::to_string(fp->at) + "}";
  }
  if (const auto* c = std::get_if<Cycle>(&outcome)) {
    return "Cycle{period " + std::to_string(c->period) + ", start " + std::to_string(c->start) +
           "}";
  }
  return "MaxIters";
}

double q_hat(const Mdp& mdp, const FeatureMap& fm, const LinearValue& lv, State s, Action a) {
  double q = 0.0;
  for (const Outcome& o : mdp.outcomes(s, a)) {
    q += o.probability * (o.reward + (o.next == kTerminal ? 0.0 : predict(lv, fm, o.next)));
  }
  return q;
}

TabularPolicy greedify(const Mdp& mdp, const FeatureMap& fm, const LinearValue& lv) {
  if (fm.num_states() != mdp.num_states() || lv.theta.size() != fm.dimension()) {
    throw std::invalid_argument("greedify: feature/theta shape mismatch");
  }
  std::vector<Action> actions(static_cast<std::size_t>(mdp.num_states()));
  for (State s = 0; s < mdp.num_states(); ++s) {
    Action best = 0;
    double best_q = q_hat(mdp, fm, lv, s, 0);
    for (Action a = 1; a < mdp.num_actions(); ++a) {
      const double q = q_hat(mdp, fm, lv, s, a);
      if (q > best_q + kGreedyTieTolerance) {
        best = a;
        best_q = q;
      }
    }
    actions[static_cast<std::size_t>(s)] = best;
  }
  return TabularPolicy::deterministic(mdp.num_actions(), actions);
}

DpIterate api_step(const Mdp& mdp, const FeatureMap& fm, const TabularPolicy& policy) {
  const ValueVector v = evaluate_exact(mdp, policy);
  const ValueVector mu = on_policy_distribution(mdp, policy);
  LinearValue theta = fit_weighted_least_squares(fm, v, mu);
  TabularPolicy next = greedify(mdp, fm, theta);
  return DpIterate{std::move(theta), std::move(next)};
}

DpTrace run_api(const Mdp& mdp, const FeatureMap& fm, const TabularPolicy& initial,
                int max_iters) {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  DpTrace trace;
  TabularPolicy policy = initial;
  // theta is a function of the policy, so exact policy matching suffices.
  auto same_policy = [](const DpIterate& a, const DpIterate& b) { return a.policy == b.policy; };
  for (int step = 0; step < max_iters; ++step) {
    DpIterate fitted = api_step(mdp, fm, policy);
    DpIterate entry{std::move(fitted.theta), std::move(policy)};
    if (close_loop(trace, entry, same_policy)) return trace;
    trace.iterations.push_back(std::move(entry));
    policy = std::move(fitted.policy);
  }
  trace.outcome = MaxIters{};
  return trace;
}

DpIterate avi_step(const Mdp& mdp, const FeatureMap& fm, const LinearValue& theta,
                   const TabularPolicy& policy) {
  const ValueVector targets = bellman_optimality_backup(mdp, predict_all(theta, fm));
  const ValueVector mu = on_policy_distribution(mdp, policy);
  LinearValue next_theta = fit_weighted_least_squares(fm, targets, mu);
  TabularPolicy next_policy = greedify(mdp, fm, next_theta);
  return DpIterate{std::move(next_theta), std::move(next_policy)};
}

DpTrace run_avi(const Mdp& mdp, const FeatureMap& fm, const LinearValue& theta0,
                const TabularPolicy& initial, int max_iters) {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (theta0.theta.size() != fm.dimension()) {
    throw std::invalid_argument("theta0 dimension does not match feature map");
  }
  DpTrace trace;
  trace.iterations.push_back(DpIterate{theta0, initial});
  auto same_pair = [](const DpIterate& a, const DpIterate& b) {
    return a.policy == b.policy && theta_close(a.theta, b.theta);
  };
  for (int step = 0; step < max_iters; ++step) {
    const DpIterate& current = trace.iterations.back();
    DpIterate next = avi_step(mdp, fm, current.theta, current.policy);
    if (close_loop(trace, next, same_pair)) return trace;
    trace.iterations.push_back(std::move(next));
  }
  trace.outcome = MaxIters{};
  return trace;
}

TabularPolicy start_mixture_policy(const Mdp& mdp, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
  if (mdp.num_actions() < 2) throw std::invalid_argument("rho policy needs two actions");
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(mdp.num_states(), mdp.num_actions());
  probs.col(0).setOnes();
  probs(mdp.start_state(), 0) = 1.0 - rho;
  probs(mdp.start_state(), 1) = rho;
  return TabularPolicy(std::move(probs));
}

AviStart random_avi_start(const Mdp& mdp, const FeatureMap& fm, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd theta(fm.dimension());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = normal(rng);
  const double rho = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return AviStart{LinearValue{std::move(theta)}, start_mixture_policy(mdp, rho)};
}

LinearValue projected_bellman_fixed_point(const Mdp& mdp, const FeatureMap& fm,
                                          const TabularPolicy& policy) {
  if (!policy.is_deterministic()) {
    throw std::invalid_argument("projected fixed point needs a deterministic policy");
  }
  const ValueVector mu = on_policy_distribution(mdp, policy);
  const PolicyChain chain = policy_chain(mdp, policy);
  const Eigen::MatrixXd& x = fm.matrix();
  // X^T D (X - P X) theta = X^T D r; rows of unvisited states carry zero weight.
  const Eigen::MatrixXd weighted = x.transpose() * mu.asDiagonal();
  const Eigen::MatrixXd system = weighted * (x - chain.transition * x);
  const Eigen::VectorXd rhs = weighted * chain.reward;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) {
    throw SingularProjectionError("projected Bellman system is singular for this policy");
  }
  return LinearValue{lu.solve(rhs)};
}

int FixedPointReport::api_count() const {
  int n = 0;
  for (const auto& p : policies) n += p.is_api_fixed_point ? 1 : 0;
  return n;
}

int FixedPointReport::avi_count() const {
  int n = 0;
  for (const auto& p : policies) n += p.is_avi_fixed_point ? 1 : 0;
  return n;
}

FixedPointReport enumerate_fixed_points(const Mdp& mdp, const FeatureMap& fm, Execution exec) {
  long long count = 1;
  for (int s = 0; s < mdp.num_states(); ++s) {
    count *= mdp.num_actions();
    if (count > kMaxEnumeratedPolicies) {
      throw std::invalid_argument("too many deterministic policies to enumerate");
    }
  }
  auto check_policy = [&](std::size_t index) {
    PolicyFixedPoint entry;
    entry.actions.resize(static_cast<std::size_t>(mdp.num_states()));
    auto code = static_cast<long long>(index);
    for (auto& a : entry.actions) {
      a = static_cast<Action>(code % mdp.num_actions());
      code /= mdp.num_actions();
    }
    const TabularPolicy policy = TabularPolicy::deterministic(mdp.num_actions(), entry.actions);
    const ValueVector v = evaluate_exact(mdp, policy);
    entry.start_value = v(mdp.start_state());
    entry.api_theta = fit_weighted_least_squares(fm, v, on_policy_distribution(mdp, policy));
    entry.is_api_fixed_point = greedify(mdp, fm, entry.api_theta) == policy;
    try {
      entry.avi_theta = projected_bellman_fixed_point(mdp, fm, policy);
    } catch (const SingularProjectionError&) {
      entry.avi_theta.reset();
    }
    if (entry.avi_theta && greedify(mdp, fm, *entry.avi_theta) == policy) {
      const DpIterate next = avi_step(mdp, fm, *entry.avi_theta, policy);
      entry.is_avi_fixed_point = next.policy == policy && theta_close(next.theta, *entry.avi_theta);
    }
    return entry;
  };
  return FixedPointReport{parallel_map(static_cast<std::size_t>(count), check_policy, exec)};
}

void write_trace_csv(std::ostream& out, const Mdp& mdp, const FeatureMap& fm,
                     const DpTrace& trace) {
  out << "iteration";
  for (int i = 0; i < fm.dimension(); ++i) out << ",theta_" << i;
  out << ",greedy_action_at_start,start_value\n";
  for (std::size_t k = 0; k < trace.iterations.size(); ++k) {
    const DpIterate& it = trace.iterations[k];
    out << k;
    for (Eigen::Index i = 0; i < it.theta.theta.size(); ++i) out << ',' << format_number(it.theta.theta(i));
    const Action greedy = greedify(mdp, fm, it.theta).mode(mdp.start_state());
    out << ',' << mdp.action_label(greedy) << ','
        << format_number(evaluate_exact(mdp, it.policy)(mdp.start_state())) << '\n';
  }
}

}  // namespace apelab
