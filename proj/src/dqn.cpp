#include "apelab/dqn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace apelab {

Mlp::Mlp(int hidden_units) : hidden_(hidden_units), params_(param_count(hidden_units), 0.0) {
  if (hidden_units < 1) throw std::invalid_argument("MLP needs at least one hidden unit");
}

Mlp Mlp::random(int hidden_units, Rng& rng, double scale) {
  Mlp net(hidden_units);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& p : net.params_) p = scale * normal(rng);
  return net;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

ActionValues mlp_forward(const Mlp& net, double obs) {
  ActionValues q{net.b_out(0), net.b_out(1)};
  for (int j = 0; j < net.hidden_units(); ++j) {
    const double h = sigmoid(net.w_in(j) * obs + net.b_in(j));
    q.left += net.w_out(0, j) * h;
    q.right += net.w_out(1, j) * h;
  }
  return q;
}

std::vector<double> mlp_backward(const Mlp& net, std::span<const TrainingSample> batch,
                                 double l2_coeff) {
  if (batch.empty()) throw std::invalid_argument("mlp_backward needs a non-empty batch");
  const int hidden = net.hidden_units();
  const auto& params = net.params();
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> h(static_cast<std::size_t>(hidden));
  const double scale = 2.0 / static_cast<double>(batch.size());
  for (const TrainingSample& sample : batch) {
    const Action a = sample.action;
    double q = net.b_out(a);
    for (int j = 0; j < hidden; ++j) {
      h[static_cast<std::size_t>(j)] = sigmoid(net.w_in(j) * sample.obs + net.b_in(j));
      q += net.w_out(a, j) * h[static_cast<std::size_t>(j)];
    }
    const double d = scale * (q - sample.target);
    grad[static_cast<std::size_t>(4 * hidden + a)] += d;
    for (int j = 0; j < hidden; ++j) {
      const double hj = h[static_cast<std::size_t>(j)];
      grad[static_cast<std::size_t>(2 * hidden + a * hidden + j)] += d * hj;
      const double dz = d * net.w_out(a, j) * hj * (1.0 - hj);
      grad[static_cast<std::size_t>(j)] += dz * sample.obs;
      grad[static_cast<std::size_t>(hidden + j)] += dz;
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += 2.0 * l2_coeff * params[i];
  return grad;
}

RmsPropState::RmsPropState(std::size_t n_params, double step, double decay_rate, double eps)
    : accumulator(n_params, 0.0), decay(decay_rate), damping(eps), step_size(step) {}

void RmsPropState::update(std::vector<double>& params, std::span<const double> gradient) {
  if (params.size() != accumulator.size() || gradient.size() != accumulator.size()) {
    throw std::invalid_argument("RMSProp shape mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    accumulator[i] = decay * accumulator[i] + (1.0 - decay) * g * g;
    params[i] -= step_size * g / (std::sqrt(accumulator[i]) + damping);
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  entries_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (entries_.size() < capacity_) {
    entries_.push_back(t);
  } else {
    entries_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
  if (entries_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  return std::uniform_int_distribution<std::size_t>(0, entries_.size() - 1)(rng);
}

void validate(const DqnConfig& cfg) {
  if (cfg.hidden_units < 1) throw std::invalid_argument("hidden units must be positive");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (cfg.batch < 1) throw std::invalid_argument("batch size must be positive");
  if (!(cfg.l2_coeff >= 0.0)) throw std::invalid_argument("L2 coefficient must be non-negative");
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  if (cfg.n_episodes < 1) throw std::invalid_argument("need at least one episode");
  if (cfg.replay_capacity < static_cast<std::size_t>(cfg.batch)) {
    throw std::invalid_argument("replay capacity must hold at least one batch");
  }
}

DqnRun dqn_run(const ContinuousObsProblem& problem, const DqnConfig& cfg) {
  validate(cfg);
  const Mdp& mdp = problem.mdp;
  if (mdp.num_actions() != 2) throw std::invalid_argument("DQN expects two actions");
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  DqnRun run{{}, Mlp::random(cfg.hidden_units, rng, cfg.init_scale)};
  Mlp& net = run.final_net;
  RmsPropState optimizer(net.params().size(), cfg.step_size, cfg.rms_decay, cfg.rms_damping);
  ReplayBuffer replay(cfg.replay_capacity);
  std::vector<TrainingSample> batch(static_cast<std::size_t>(cfg.batch));
  run.records.reserve(static_cast<std::size_t>(cfg.n_episodes));
  const double start_obs = observe(problem, mdp.start_state(), rng);

  for (int episode = 0; episode < cfg.n_episodes; ++episode) {
    State s = mdp.start_state();
    double obs = observe(problem, s, rng);
    double ret = 0.0;
    for (std::size_t t = 0;; ++t) {
      if (t >= kDefaultStepCap) throw RunawayEpisodeError("DQN episode exceeded step cap");
      Action a;
      if (unit(rng) < cfg.epsilon) {
        a = unit(rng) < 0.5 ? 0 : 1;
      } else {
        const ActionValues q = mlp_forward(net, obs);
        a = q.right > q.left ? 1 : 0;
      }
      const Outcome& o = pick_outcome(mdp, s, a, unit(rng));
      ret += o.reward;
      std::optional<double> next_obs;
      if (o.next != kTerminal) next_obs = observe(problem, o.next, rng);
      replay.push(Transition{obs, a, o.reward, next_obs});

      if (replay.size() >= static_cast<std::size_t>(cfg.batch)) {
        for (auto& sample : batch) {
          const Transition& tr = replay.sample(rng);
          double target = tr.reward;
          if (tr.next_obs) target += mlp_forward(net, *tr.next_obs).max();
          sample = TrainingSample{tr.obs, tr.action, target};
        }
        const auto grad = mlp_backward(net, batch, cfg.l2_coeff);
        optimizer.update(net.params(), grad);
      }
      if (o.next == kTerminal) break;
      s = o.next;
      obs = *next_obs;
    }
    const ActionValues q0 = mlp_forward(net, start_obs);
    run.records.push_back(RunRecord{cfg.seed, episode, ret, q0.left, q0.right, std::nullopt});
  }
  return run;
}

std::vector<double> step_size_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 5; ++i) grid.push_back(0.0025 * std::ldexp(1.0, i));
  return grid;
}

SweepResult step_size_sweep(const ContinuousObsProblem& problem, const DqnConfig& cfg, int n_seeds,
                            Execution exec) {
  if (n_seeds < 1) throw std::invalid_argument("sweep needs at least one seed");
  const auto grid = step_size_grid();
  const std::size_t jobs = grid.size() * static_cast<std::size_t>(n_seeds);
  const auto finals = parallel_map(
      jobs,
      [&](std::size_t job) {
        DqnConfig run_cfg = cfg;
        run_cfg.step_size = grid[job / static_cast<std::size_t>(n_seeds)];
        run_cfg.seed = cfg.seed + job % static_cast<std::size_t>(n_seeds);
        const DqnRun run = dqn_run(problem, run_cfg);
        return tail_mean(run.records, kFinalWindow, [](const RunRecord& r) { return r.return_; });
      },
      exec);
  SweepResult result{grid.front(), {}};
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double sum = 0.0;
    for (int k = 0; k < n_seeds; ++k) sum += finals[i * static_cast<std::size_t>(n_seeds) + static_cast<std::size_t>(k)];
    const double mean = sum / n_seeds;
    result.entries.push_back(SweepEntry{grid[i], mean});
    if (mean > best) {
      best = mean;
      result.best_step_size = grid[i];
    }
  }
  return result;
}

}  // namespace apelab
