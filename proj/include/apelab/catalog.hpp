#pragma once

// The three five-state counterexamples (oscillating, multiple fixed points,
// worst case), their closed-form least-squares weights, and the
// continuous-observation variants used with neural networks.
//
// Layout shared by all three: A --l--> B --> D --> end, A --r--> C --> E --> end.
// Actions only matter in A. Aggregation groups are {A}, {B, E}, {C, D}.

#include "apelab/linear.hpp"
#include "apelab/mdp.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace apelab {

enum class CounterexampleKind { Oscillating, MultipleFixedPoint, WorstCase };

inline constexpr std::array<CounterexampleKind, 3> kAllKinds = {
    CounterexampleKind::Oscillating, CounterexampleKind::MultipleFixedPoint,
    CounterexampleKind::WorstCase};

namespace catalog {
inline constexpr State kA = 0;
inline constexpr State kB = 1;
inline constexpr State kC = 2;
inline constexpr State kD = 3;
inline constexpr State kE = 4;
inline constexpr Action kLeft = 0;
inline constexpr Action kRight = 1;
inline constexpr int kNumStates = 5;
}  // namespace catalog

/// "oscillating", "multiple", "worst".
std::string_view kind_name(CounterexampleKind kind);
std::optional<CounterexampleKind> parse_kind(std::string_view name);

struct Counterexample {
  CounterexampleKind kind;
  Mdp mdp;
  FeatureMap features;
};

Counterexample make_counterexample(CounterexampleKind kind);

/// The {A}, {B,E}, {C,D} aggregation.
FeatureMap catalog_aggregation();

/// pi(r|A) = rho, and l in every other state (where actions are irrelevant).
TabularPolicy policy_with_rho(double rho);
TabularPolicy policy_left();
TabularPolicy policy_right();

/// Closed-form weighted least-squares weights for pi(r|A) = rho.
LinearValue closed_form_theta_star(CounterexampleKind kind, double rho);

struct Interval {
  double lo;
  double hi;
};

enum class ObservationLayout {
  /// B and E share [3, 4]; C and D share [1, 2].
  SharedIntervals,
  /// Adjacent disjoint halves: C [1, 1.5), D [1.5, 2], B [3, 3.5), E [3.5, 4].
  DisjointSubIntervals,
  /// One interval per state with A in the middle of the line:
  /// C [-2, -1.5), D [-1.5, -1], A {0}, E [1, 1.5), B [1.5, 2].
  SplitAroundStart,
};

/// "shared", "disjoint", "split".
std::string_view layout_name(ObservationLayout layout);
std::optional<ObservationLayout> parse_layout(std::string_view name);

struct ContinuousObsProblem {
  CounterexampleKind kind;
  Mdp mdp;
  /// Observation interval per state; A is the degenerate point {0}.
  std::vector<Interval> intervals;
  double start_penalty = -1.0;
  ObservationLayout layout = ObservationLayout::SharedIntervals;
};

ContinuousObsProblem make_continuous_variant(
    CounterexampleKind kind, ObservationLayout layout = ObservationLayout::SharedIntervals);

/// Uniform draw from the state's interval; point intervals are returned as is.
double observe(const ContinuousObsProblem& problem, State s, Rng& rng);

}  // namespace apelab
