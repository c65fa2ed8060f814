#pragma once

// Linear value functions v(s; theta) = theta . x(s) and the weighted
// least-squares evaluation step.

#include "apelab/mdp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace apelab {

/// Row s holds the feature vector x(s).
class FeatureMap {
 public:
  explicit FeatureMap(Eigen::MatrixXd features);

  /// One-hot features; `group_of_state[s]` is the group index of state s.
  static FeatureMap aggregation(std::span<const int> group_of_state);
  /// One-hot features from a partition given by state labels. Every state must
  /// appear in exactly one group.
  static FeatureMap from_partition(const Mdp& mdp,
                                   const std::vector<std::vector<std::string>>& groups);
  /// One group per state (exact tabular representation).
  static FeatureMap identity(int n_states);

  int num_states() const { return static_cast<int>(features_.rows()); }
  int dimension() const { return static_cast<int>(features_.cols()); }
  auto row(State s) const { return features_.row(s); }
  const Eigen::MatrixXd& matrix() const { return features_; }

  /// Group index of `s` when the map is a one-hot aggregation.
  std::optional<int> group(State s) const;
  bool is_aggregation() const;

 private:
  Eigen::MatrixXd features_;
};

struct LinearValue {
  Eigen::VectorXd theta;
};

double predict(const LinearValue& lv, const FeatureMap& fm, State s);

/// v(s; theta) for every state.
ValueVector predict_all(const LinearValue& lv, const FeatureMap& fm);

/// argmin_theta sum_s w(s) (theta . x(s) - target(s))^2, minimum-norm on
/// rank deficiency. Throws std::invalid_argument for negative or all-zero
/// weights.
LinearValue fit_weighted_least_squares(const FeatureMap& fm, const ValueVector& targets,
                                       const ValueVector& weights);

}  // namespace apelab
