#pragma once

// Miniature DQN on the continuous-observation problems: a 1-input MLP with a
// sigmoid hidden layer and two linear action-value outputs, uniform experience
// replay, RMSProp and L2 regularisation.

#include "apelab/catalog.hpp"
#include "apelab/parallel.hpp"
#include "apelab/records.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace apelab {

/// Parameters are stored flat: [w_in(H) | b_in(H) | w_out(2 x H, row per
/// action) | b_out(2)], H*1 + H + 2*H + 2 values in total.
class Mlp {
 public:
  explicit Mlp(int hidden_units);

  static Mlp random(int hidden_units, Rng& rng, double scale = 1.0);
  static std::size_t param_count(int hidden_units) {
    return static_cast<std::size_t>(4 * hidden_units + 2);
  }

  int hidden_units() const { return hidden_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  double& w_in(int j) { return params_[static_cast<std::size_t>(j)]; }
  double& b_in(int j) { return params_[static_cast<std::size_t>(hidden_ + j)]; }
  double& w_out(Action a, int j) { return params_[static_cast<std::size_t>(2 * hidden_ + a * hidden_ + j)]; }
  double& b_out(Action a) { return params_[static_cast<std::size_t>(4 * hidden_ + a)]; }
  double w_in(int j) const { return params_[static_cast<std::size_t>(j)]; }
  double b_in(int j) const { return params_[static_cast<std::size_t>(hidden_ + j)]; }
  double w_out(Action a, int j) const { return params_[static_cast<std::size_t>(2 * hidden_ + a * hidden_ + j)]; }
  double b_out(Action a) const { return params_[static_cast<std::size_t>(4 * hidden_ + a)]; }

 private:
  int hidden_;
  std::vector<double> params_;
};

struct ActionValues {
  double left = 0.0;
  double right = 0.0;

  double operator[](Action a) const { return a == 0 ? left : right; }
  double max() const { return left >= right ? left : right; }
};

double sigmoid(double z);

ActionValues mlp_forward(const Mlp& net, double obs);

struct TrainingSample {
  double obs;
  Action action;
  double target;
};

/// Gradient of mean_i (q(obs_i)[a_i] - target_i)^2 + l2 * |params|^2.
std::vector<double> mlp_backward(const Mlp& net, std::span<const TrainingSample> batch,
                                 double l2_coeff);

struct RmsPropState {
  std::vector<double> accumulator;
  double decay = 0.9;
  double damping = 1e-8;
  double step_size = 0.01;

  RmsPropState(std::size_t n_params, double step, double decay_rate = 0.9, double eps = 1e-8);

  /// acc <- decay acc + (1 - decay) g^2; p <- p - step g / (sqrt(acc) + damping)
  void update(std::vector<double>& params, std::span<const double> gradient);
};

struct Transition {
  double obs;
  Action action;
  double reward;
  std::optional<double> next_obs;  // empty at episode end
};

/// Fixed-capacity FIFO ring with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return entries_[i]; }
  /// Index of a uniformly drawn stored entry.
  std::size_t sample_index(Rng& rng) const;
  const Transition& sample(Rng& rng) const { return entries_[sample_index(rng)]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> entries_;
};

struct DqnConfig {
  int hidden_units = 4;
  double epsilon = 0.1;
  int batch = 32;
  double l2_coeff = 1e-4;
  double step_size = 0.01;
  int n_episodes = 50'000;
  std::uint64_t seed = 0;
  std::size_t replay_capacity = 10'000;
  double init_scale = 1.0;
  double rms_decay = 0.9;
  double rms_damping = 1e-8;
};

inline constexpr int kDeskScaleEpisodes = 50'000;
inline constexpr int kFullScaleEpisodes = 500'000;

void validate(const DqnConfig& cfg);

struct DqnRun {
  RunLog records;  // tracked_value_1 = q_l(0), tracked_value_2 = q_r(0)
  Mlp final_net;
};

DqnRun dqn_run(const ContinuousObsProblem& problem, const DqnConfig& cfg);

/// {0.0025 * 2^i : i = 0..5}
std::vector<double> step_size_grid();

struct SweepEntry {
  double step_size;
  double mean_final_return;  // over seeds, final 5% of episodes
};

struct SweepResult {
  double best_step_size;
  std::vector<SweepEntry> entries;
};

inline constexpr double kFinalWindow = 0.05;

/// Runs every grid step size on `n_seeds` seeds (cfg.seed + i) and picks the
/// one with the highest mean final return; ties go to the smaller step.
SweepResult step_size_sweep(const ContinuousObsProblem& problem, const DqnConfig& cfg,
                            int n_seeds = 1, Execution exec = Execution::Parallel);

}  // namespace apelab
