#include "apelab/catalog.hpp"

#include <stdexcept>

namespace apelab {

using namespace catalog;

namespace {

struct PathRewards {
  double b_to_d;
  double d_to_end;
  double c_to_e;
  double e_to_end;
};

// A's rewards are zero in every kind; the rest reproduce the state values
// B=0, C=2 and D, E as listed.
PathRewards rewards_for(CounterexampleKind kind) {
  switch (kind) {
    case CounterexampleKind::Oscillating:
      return {-1.0, 1.0, -1.0, 3.0};  // D=1, E=3
    case CounterexampleKind::MultipleFixedPoint:
      return {1.0, -1.0, 3.0, -1.0};  // D=-1, E=-1
    case CounterexampleKind::WorstCase:
      return {1.0, -1.0, -1.0, 3.0};  // D=-1, E=3
  }
  throw std::invalid_argument("unknown counterexample kind");
}

Mdp build_chain_mdp(const PathRewards& r, double a_reward) {
  auto same = [](State next, double reward) {
    return std::vector<std::vector<Outcome>>{{{1.0, next, reward}}, {{1.0, next, reward}}};
  };
  Mdp::OutcomeTable table(kNumStates);
  table[kA] = {{{1.0, kB, a_reward}}, {{1.0, kC, a_reward}}};
  table[kB] = same(kD, r.b_to_d);
  table[kC] = same(kE, r.c_to_e);
  table[kD] = same(kTerminal, r.d_to_end);
  table[kE] = same(kTerminal, r.e_to_end);
  return Mdp(kNumStates, 2, kA, std::move(table), {"A", "B", "C", "D", "E"}, {"l", "r"});
}

}  // namespace

std::string_view kind_name(CounterexampleKind kind) {
  switch (kind) {
    case CounterexampleKind::Oscillating:
      return "oscillating";
    case CounterexampleKind::MultipleFixedPoint:
      return "multiple";
    case CounterexampleKind::WorstCase:
      return "worst";
  }
  return "unknown";
}

std::optional<CounterexampleKind> parse_kind(std::string_view name) {
  for (CounterexampleKind k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view layout_name(ObservationLayout layout) {
  switch (layout) {
    case ObservationLayout::SharedIntervals:
      return "shared";
    case ObservationLayout::DisjointSubIntervals:
      return "disjoint";
    case ObservationLayout::SplitAroundStart:
      return "split";
  }
  return "unknown";
}

std::optional<ObservationLayout> parse_layout(std::string_view name) {
  for (auto layout : {ObservationLayout::SharedIntervals, ObservationLayout::DisjointSubIntervals,
                      ObservationLayout::SplitAroundStart}) {
    if (layout_name(layout) == name) return layout;
  }
  return std::nullopt;
}

FeatureMap catalog_aggregation() {
  constexpr std::array<int, kNumStates> groups = {0, 1, 2, 2, 1};
  return FeatureMap::aggregation(groups);
}

Counterexample make_counterexample(CounterexampleKind kind) {
  return Counterexample{kind, build_chain_mdp(rewards_for(kind), 0.0), catalog_aggregation()};
}

TabularPolicy policy_with_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(kNumStates, 2);
  probs.col(kLeft).setOnes();
  probs(kA, kLeft) = 1.0 - rho;
  probs(kA, kRight) = rho;
  return TabularPolicy(std::move(probs));
}

TabularPolicy policy_left() { return policy_with_rho(0.0); }
TabularPolicy policy_right() { return policy_with_rho(1.0); }

LinearValue closed_form_theta_star(CounterexampleKind kind, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
  Eigen::Vector3d theta;
  switch (kind) {
    case CounterexampleKind::Oscillating:
      theta << 2.0 * rho, 3.0 * rho, 1.0 + rho;
      break;
    case CounterexampleKind::MultipleFixedPoint:
      theta << 2.0 * rho, -rho, 3.0 * rho - 1.0;
      break;
    case CounterexampleKind::WorstCase:
      theta << 2.0 * rho, 3.0 * rho, 3.0 * rho - 1.0;
      break;
  }
  return LinearValue{theta};
}

ContinuousObsProblem make_continuous_variant(CounterexampleKind kind, ObservationLayout layout) {
  std::vector<Interval> intervals(kNumStates);
  intervals[kA] = {0.0, 0.0};
  if (layout == ObservationLayout::SharedIntervals) {
    intervals[kC] = intervals[kD] = {1.0, 2.0};
    intervals[kB] = intervals[kE] = {3.0, 4.0};
  } else if (layout == ObservationLayout::DisjointSubIntervals) {
    intervals[kC] = {1.0, 1.5};
    intervals[kD] = {1.5, 2.0};
    intervals[kB] = {3.0, 3.5};
    intervals[kE] = {3.5, 4.0};
  } else {
    intervals[kC] = {-2.0, -1.5};
    intervals[kD] = {-1.5, -1.0};
    intervals[kE] = {1.0, 1.5};
    intervals[kB] = {1.5, 2.0};
  }
  constexpr double kPenalty = -1.0;
  return ContinuousObsProblem{kind, build_chain_mdp(rewards_for(kind), kPenalty),
                              std::move(intervals), kPenalty, layout};
}

double observe(const ContinuousObsProblem& problem, State s, Rng& rng) {
  if (s < 0 || s >= static_cast<State>(problem.intervals.size())) {
    throw std::out_of_range("observe: state has no observation interval");
  }
  const Interval& iv = problem.intervals[static_cast<std::size_t>(s)];
  if (iv.lo == iv.hi) return iv.lo;
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

}  // namespace apelab
