#include "apelab/linear.hpp"

#include <algorithm>
#include <cmath>

namespace apelab {

FeatureMap::FeatureMap(Eigen::MatrixXd features) : features_(std::move(features)) {
  if (features_.rows() == 0 || features_.cols() == 0) {
    throw std::invalid_argument("feature map must be non-empty");
  }
  if (!features_.allFinite()) throw std::invalid_argument("feature map has non-finite entries");
}

FeatureMap FeatureMap::aggregation(std::span<const int> group_of_state) {
  if (group_of_state.empty()) throw std::invalid_argument("aggregation needs at least one state");
  const int n_groups = *std::max_element(group_of_state.begin(), group_of_state.end()) + 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(group_of_state.size()), n_groups);
  for (std::size_t s = 0; s < group_of_state.size(); ++s) {
    if (group_of_state[s] < 0) throw std::invalid_argument("negative group index");
    x(static_cast<Eigen::Index>(s), group_of_state[s]) = 1.0;
  }
  return FeatureMap(std::move(x));
}

FeatureMap FeatureMap::from_partition(const Mdp& mdp,
                                      const std::vector<std::vector<std::string>>& groups) {
  std::vector<int> group_of(static_cast<std::size_t>(mdp.num_states()), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& label : groups[g]) {
      const auto s = mdp.find_state(label);
      if (!s) throw std::invalid_argument("partition names unknown state '" + label + "'");
      auto& slot = group_of[static_cast<std::size_t>(*s)];
      if (slot != -1) throw std::invalid_argument("state '" + label + "' appears in two groups");
      slot = static_cast<int>(g);
    }
  }
  for (State s = 0; s < mdp.num_states(); ++s) {
    if (group_of[static_cast<std::size_t>(s)] == -1) {
      throw std::invalid_argument("state '" + mdp.label(s) + "' is not in any group");
    }
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(mdp.num_states(), static_cast<Eigen::Index>(groups.size()));
  for (State s = 0; s < mdp.num_states(); ++s) x(s, group_of[static_cast<std::size_t>(s)]) = 1.0;
  return FeatureMap(std::move(x));
}

FeatureMap FeatureMap::identity(int n_states) {
  return FeatureMap(Eigen::MatrixXd::Identity(n_states, n_states));
}

std::optional<int> FeatureMap::group(State s) const {
  int found = -1;
  for (Eigen::Index j = 0; j < features_.cols(); ++j) {
    const double x = features_(s, j);
    if (x == 1.0) {
      if (found != -1) return std::nullopt;
      found = static_cast<int>(j);
    } else if (x != 0.0) {
      return std::nullopt;
    }
  }
  if (found == -1) return std::nullopt;
  return found;
}

bool FeatureMap::is_aggregation() const {
  for (State s = 0; s < num_states(); ++s) {
    if (!group(s)) return false;
  }
  return true;
}

double predict(const LinearValue& lv, const FeatureMap& fm, State s) {
  return fm.row(s).dot(lv.theta);
}

ValueVector predict_all(const LinearValue& lv, const FeatureMap& fm) {
  return fm.matrix() * lv.theta;
}

LinearValue fit_weighted_least_squares(const FeatureMap& fm, const ValueVector& targets,
                                       const ValueVector& weights) {
  if (targets.size() != fm.num_states() || weights.size() != fm.num_states()) {
    throw std::invalid_argument("targets/weights must have one entry per state");
  }
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw std::invalid_argument("weights must be finite and non-negative");
  }
  if (!(weights.array() > 0.0).any()) throw std::invalid_argument("all weights are zero");

  const Eigen::MatrixXd& x = fm.matrix();
  const Eigen::MatrixXd normal = x.transpose() * weights.asDiagonal() * x;
  const Eigen::VectorXd rhs = x.transpose() * weights.asDiagonal() * targets;
  // Complete orthogonal decomposition gives the minimum-norm solution when
  // some feature direction carries no weight.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-12);
  cod.compute(normal);
  return LinearValue{cod.solve(rhs)};
}

}  // namespace apelab
