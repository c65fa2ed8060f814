#pragma once

// Approximate policy iteration (API) and approximate value iteration (AVI)
// with greedification, cycle/fixed-point classification of their
// trajectories, and exhaustive enumeration of fixed points over the
// deterministic policies of an MDP.

#include "apelab/linear.hpp"
#include "apelab/mdp.hpp"
#include "apelab/parallel.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace apelab {

/// Look-ahead values closer than this are ties; ties go to the lowest action.
inline constexpr double kGreedyTieTolerance = 1e-9;
/// Absolute tolerance for theta equality in trajectory classification.
inline constexpr double kThetaTolerance = 1e-9;

class SingularProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DpIterate {
  LinearValue theta;
  TabularPolicy policy;
};

struct FixedPoint {
  int at;
};
struct Cycle {
  int period;
  int start;
};
struct MaxIters {};

using DpOutcome = std::variant<FixedPoint, Cycle, MaxIters>;

/// Ordered (theta, policy) pairs. For API entry k holds the fit of policy k;
/// for AVI entry 0 is (theta0, pi0). When a repeat is detected the repeating
/// pair is appended, so the trace ends on the pair it returns to.
struct DpTrace {
  std::vector<DpIterate> iterations;
  DpOutcome outcome = MaxIters{};
};

std::string describe(const DpOutcome& outcome);

/// q(s, a) = E[R + v(S'; theta)] with the terminal valued at 0.
double q_hat(const Mdp& mdp, const FeatureMap& fm, const LinearValue& lv, State s, Action a);

TabularPolicy greedify(const Mdp& mdp, const FeatureMap& fm, const LinearValue& lv);

/// Fit of v_pi under mu_pi, then greedification.
DpIterate api_step(const Mdp& mdp, const FeatureMap& fm, const TabularPolicy& policy);

DpTrace run_api(const Mdp& mdp, const FeatureMap& fm, const TabularPolicy& initial,
                int max_iters);

/// One least-squares fit of B* v(.; theta) under mu_pi, then greedification.
DpIterate avi_step(const Mdp& mdp, const FeatureMap& fm, const LinearValue& theta,
                   const TabularPolicy& policy);

DpTrace run_avi(const Mdp& mdp, const FeatureMap& fm, const LinearValue& theta0,
                const TabularPolicy& initial, int max_iters);

/// pi(1 | start) = rho and action 0 everywhere else; the catalog's
/// policy_with_rho on any MDP with at least two actions.
TabularPolicy start_mixture_policy(const Mdp& mdp, double rho);

struct AviStart {
  LinearValue theta0;
  TabularPolicy policy0;
};

/// theta0 ~ N(0, I) and pi0 = start_mixture_policy(rho0), rho0 ~ U[0, 1].
AviStart random_avi_start(const Mdp& mdp, const FeatureMap& fm, Rng& rng);

/// theta = Omega_pi theta: the weighted least-squares fixed point of the
/// one-step backup over states with mu_pi > 0. Throws SingularProjectionError
/// when the projected system is singular.
LinearValue projected_bellman_fixed_point(const Mdp& mdp, const FeatureMap& fm,
                                          const TabularPolicy& policy);

struct PolicyFixedPoint {
  std::vector<Action> actions;
  LinearValue api_theta;
  std::optional<LinearValue> avi_theta;
  bool is_api_fixed_point = false;
  bool is_avi_fixed_point = false;
  double start_value = 0.0;
};

struct FixedPointReport {
  std::vector<PolicyFixedPoint> policies;

  int api_count() const;
  int avi_count() const;
};

inline constexpr long long kMaxEnumeratedPolicies = 1LL << 20;

/// Checks every deterministic policy. Throws std::invalid_argument when there
/// are more than kMaxEnumeratedPolicies of them.
FixedPointReport enumerate_fixed_points(const Mdp& mdp, const FeatureMap& fm,
                                        Execution exec = Execution::Parallel);

/// iteration, theta_0..theta_{n-1}, greedy_action_at_start, start_value
void write_trace_csv(std::ostream& out, const Mdp& mdp, const FeatureMap& fm,
                     const DpTrace& trace);

}  // namespace apelab
