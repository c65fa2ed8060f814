#include "apelab/acceptance.hpp"

#include "apelab/agents.hpp"
#include "apelab/catalog.hpp"
#include "apelab/dp.hpp"
#include "apelab/dqn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>

namespace apelab {

namespace {

// Pinned tolerances and budgets.
constexpr double kClosedFormTol = 1e-10;
constexpr double kFastRuntime = 1.0;   // criteria 1-4, seconds
constexpr double kAviRuntime = 5.0;    // criterion 5, seconds
constexpr int kRhoGrid = 101;
constexpr int kApiMaxIters = 100;
constexpr int kAviMaxIters = 1000;
constexpr int kAviStarts = 30;
constexpr int kRlSeeds = 30;
constexpr int kRlEpisodes = 20000;
constexpr int kRlMajority = 27;
constexpr int kMinRankFlips = 10;
constexpr double kBurnIn = 0.25;
constexpr double kMinLeftProbability = 0.9;
constexpr double kMaxCriticGap = 0.5;
constexpr int kDqnSeeds = 30;
constexpr int kSweepSeeds = 3;
constexpr double kDqnMinReturn = 0.7;
constexpr double kDqnMaxGap = 1.0;
constexpr int kDqnMinSmallGap = 20;
constexpr int kRandomMdps = 200;
constexpr double kBellmanTol = 1e-10;
constexpr double kOrthogonalityTol = 1e-9;
constexpr int kGradientInstances = 100;
constexpr double kGradientRelTol = 1e-4;
constexpr double kGradientStep = 1e-5;
// Partials smaller than this are compared on an absolute scale.
constexpr double kGradientFloor = 1e-3;

using Clock = std::chrono::steady_clock;

double rho_at(int k) { return static_cast<double>(k) / (kRhoGrid - 1); }

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

struct Check {
  bool ok = true;
  std::string detail;
};

CriterionResult timed(int id, std::string name, double limit, const std::function<Check()>& body) {
  const auto t0 = Clock::now();
  Check c;
  try {
    c = body();
  } catch (const std::exception& e) {
    c = Check{false, std::string("threw: ") + e.what()};
  }
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  r.passed = c.ok;
  r.detail = c.detail;
  if (limit > 0.0 && r.seconds >= limit) {
    r.passed = false;
    r.detail += format("; runtime %.3f s exceeds %.1f s", r.seconds, limit);
  }
  return r;
}

Action start_action(const TabularPolicy& p) { return p.mode(catalog::kA); }

/// Expected greedy action at A after one API round from rho.
Action threshold_rule(CounterexampleKind kind, double rho) {
  switch (kind) {
    case CounterexampleKind::Oscillating:
      return rho > 0.5 ? catalog::kLeft : catalog::kRight;
    case CounterexampleKind::MultipleFixedPoint:
      return rho <= 0.25 ? catalog::kLeft : catalog::kRight;
    case CounterexampleKind::WorstCase:
      return catalog::kLeft;
  }
  return catalog::kLeft;
}

Check closed_form_recovery() {
  double worst = 0.0;
  int fits = 0;
  for (CounterexampleKind kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    for (int k = 0; k < kRhoGrid; ++k) {
      const TabularPolicy pi = policy_with_rho(rho_at(k));
      const LinearValue fit = fit_weighted_least_squares(
          ce.features, evaluate_exact(ce.mdp, pi), on_policy_distribution(ce.mdp, pi));
      const LinearValue expected = closed_form_theta_star(kind, rho_at(k));
      worst = std::max(worst, (fit.theta - expected.theta).cwiseAbs().maxCoeff());
      ++fits;
    }
  }
  return {worst < kClosedFormTol, format("%d fits, max deviation %.2e (tol %.0e)", fits, worst, kClosedFormTol)};
}

Check switching_thresholds() {
  int mismatches = 0, checked = 0;
  for (CounterexampleKind kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    for (int k = 0; k < kRhoGrid; ++k) {
      const double rho = rho_at(k);
      if (kind == CounterexampleKind::Oscillating && rho == 0.5) continue;  // boundary, no rule
      const DpIterate step = api_step(ce.mdp, ce.features, policy_with_rho(rho));
      ++checked;
      if (!step.policy.is_deterministic() || start_action(step.policy) != threshold_rule(kind, rho)) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, format("%d/%d grid points follow the threshold rules", checked - mismatches, checked)};
}

Check trajectory_classification() {
  int bad = 0, runs = 0;
  for (CounterexampleKind kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    for (int k = 0; k < kRhoGrid; ++k) {
      const double rho = rho_at(k);
      if (kind == CounterexampleKind::Oscillating && rho == 0.5) continue;
      const DpTrace trace = run_api(ce.mdp, ce.features, policy_with_rho(rho), kApiMaxIters);
      ++runs;
      bool ok = false;
      if (kind == CounterexampleKind::Oscillating) {
        const auto* c = std::get_if<Cycle>(&trace.outcome);
        ok = c && c->period == 2;
      } else {
        const auto* fp = std::get_if<FixedPoint>(&trace.outcome);
        ok = fp && start_action(trace.iterations.back().policy) == threshold_rule(kind, rho);
        if (kind == CounterexampleKind::WorstCase) ok = ok && fp->at <= 1;
      }
      bad += ok ? 0 : 1;
    }
  }
  return {bad == 0, format("%d/%d API runs classified as expected", runs - bad, runs)};
}

Check fixed_point_enumeration(Execution exec) {
  const int expected[] = {0, 2, 1};
  Check c;
  std::ostringstream d;
  for (std::size_t i = 0; i < kAllKinds.size(); ++i) {
    const Counterexample ce = make_counterexample(kAllKinds[i]);
    const FixedPointReport report = enumerate_fixed_points(ce.mdp, ce.features, exec);
    bool equal_sets = true;
    double best = -1e300;
    for (const auto& p : report.policies) {
      equal_sets = equal_sets && p.is_api_fixed_point == p.is_avi_fixed_point;
      best = std::max(best, p.start_value);
    }
    c.ok = c.ok && equal_sets && report.api_count() == expected[i] && report.avi_count() == expected[i];
    d << kind_name(kAllKinds[i]) << " API/AVI " << report.api_count() << '/' << report.avi_count()
      << (equal_sets ? "" : " (sets differ)") << "; ";
    if (kAllKinds[i] == CounterexampleKind::WorstCase) {
      for (const auto& p : report.policies) {
        if (!p.is_api_fixed_point) continue;
        const bool ok = p.actions[catalog::kA] == catalog::kLeft && std::abs(p.start_value) < 1e-12 &&
                        std::abs(best - 2.0) < 1e-12;
        c.ok = c.ok && ok;
        d << "worst fixed point start value " << p.start_value << " vs optimal " << best;
      }
    }
  }
  c.detail = d.str();
  return c;
}

Check avi_behaviour() {
  Check c;
  std::ostringstream d;
  for (CounterexampleKind kind : kAllKinds) {
    const Counterexample ce = make_counterexample(kind);
    int fixed = 0, cycles = 0, capped = 0;
    for (int k = 0; k < kAviStarts; ++k) {
      Rng rng(static_cast<std::uint64_t>(k));
      const AviStart start = random_avi_start(ce.mdp, ce.features, rng);
      const DpTrace trace = run_avi(ce.mdp, ce.features, start.theta0, start.policy0, kAviMaxIters);
      if (std::holds_alternative<FixedPoint>(trace.outcome)) ++fixed;
      else if (std::holds_alternative<Cycle>(trace.outcome)) ++cycles;
      else ++capped;
    }
    const bool ok = kind == CounterexampleKind::Oscillating ? fixed == 0 : fixed == kAviStarts;
    c.ok = c.ok && ok;
    d << kind_name(kind) << ": " << fixed << " fixed, " << cycles << " cycle, " << capped
      << " max-iters; ";
  }
  c.detail = d.str() + format("%d starts each, theta0 ~ N(0,I), rho0 ~ U[0,1]", kAviStarts);
  return c;
}

Check rl_pathologies(Execution exec) {
  const Counterexample worst = make_counterexample(CounterexampleKind::WorstCase);
  const Counterexample osc = make_counterexample(CounterexampleKind::Oscillating);
  auto cfg_for = [](std::size_t seed) {
    AgentConfig cfg;
    cfg.step_size = 0.05;
    cfg.epsilon = 0.05;
    cfg.n_episodes = kRlEpisodes;
    cfg.seed = seed;
    return cfg;
  };
  const int g_a = *worst.features.group(catalog::kA);
  struct Seeded {
    bool q_left;
    double ac_mc_left, ac_td_left;
    int flips;
    double mc_gap;
  };
  const auto rows = parallel_map(
      kRlSeeds,
      [&](std::size_t seed) {
        const AgentConfig cfg = cfg_for(seed);
        auto left_prob = [](const RunRecord& r) { return 1.0 - r.policy_statistic.value_or(0.0); };
        Seeded s{};
        const QLearningRun q = q_learning_run(worst.mdp, worst.features, cfg);
        s.q_left = argmax_lowest(q.final_table.values.row(g_a).transpose()) == catalog::kLeft;
        s.ac_mc_left = tail_mean(actor_critic_run(worst.mdp, worst.features, cfg, CriticMode::MonteCarlo).records,
                                 kFinalWindow, left_prob);
        s.ac_td_left = tail_mean(actor_critic_run(worst.mdp, worst.features, cfg, CriticMode::TD0).records,
                                 kFinalWindow, left_prob);
        s.flips = count_rank_flips(q_learning_run(osc.mdp, osc.features, cfg).records, kBurnIn);
        s.mc_gap = std::abs(tail_mean(
            actor_critic_run(osc.mdp, osc.features, cfg, CriticMode::MonteCarlo).records, kFinalWindow,
            [](const RunRecord& r) { return r.tracked_value_1 - r.tracked_value_2; }));
        return s;
      },
      exec);
  int q_left = 0, flips_ok = 0;
  double mc_left = 0.0, td_left = 0.0, gap = 0.0;
  for (const Seeded& s : rows) {
    q_left += s.q_left ? 1 : 0;
    flips_ok += s.flips >= kMinRankFlips ? 1 : 0;
    mc_left += s.ac_mc_left / kRlSeeds;
    td_left += s.ac_td_left / kRlSeeds;
    gap += s.mc_gap / kRlSeeds;
  }
  const bool ok = q_left >= kRlMajority && mc_left >= kMinLeftProbability &&
                  td_left >= kMinLeftProbability && flips_ok >= kRlMajority && gap < kMaxCriticGap;
  return {ok, format("worst: Q-learning l in %d/%d, AC-MC pi(l|A) %.3f, AC-TD pi(l|A) %.3f; "
                     "oscillating: >=%d flips in %d/%d, AC-MC |wB-wC| %.3f",
                     q_left, kRlSeeds, mc_left, td_left, kMinRankFlips, flips_ok, kRlSeeds, gap)};
}

Check dqn_behaviour(bool full_scale, Execution exec) {
  DqnConfig base;
  base.n_episodes = full_scale ? kFullScaleEpisodes : kDeskScaleEpisodes;
  const auto layout = ObservationLayout::SplitAroundStart;
  const ContinuousObsProblem worst = make_continuous_variant(CounterexampleKind::WorstCase, layout);
  const ContinuousObsProblem osc = make_continuous_variant(CounterexampleKind::Oscillating, layout);

  DqnConfig wide = base;
  wide.hidden_units = 4;
  const SweepResult sweep = step_size_sweep(worst, wide, kSweepSeeds, exec);
  double best_return = -1e300;
  for (const auto& e : sweep.entries) {
    if (e.step_size == sweep.best_step_size) best_return = e.mean_final_return;
  }

  DqnConfig narrow = base;
  narrow.hidden_units = 2;
  narrow.step_size = sweep.best_step_size;
  struct Pair {
    bool worst_left;
    bool osc_close;
  };
  const auto pairs = parallel_map(
      kDqnSeeds,
      [&](std::size_t seed) {
        DqnConfig cfg = narrow;
        cfg.seed = seed;
        const RunRecord w = dqn_run(worst, cfg).records.back();
        const RunRecord o = dqn_run(osc, cfg).records.back();
        return Pair{w.tracked_value_1 > w.tracked_value_2,
                    std::abs(o.tracked_value_1 - o.tracked_value_2) < kDqnMaxGap};
      },
      exec);
  int left = 0, close = 0;
  for (const Pair& p : pairs) {
    left += p.worst_left ? 1 : 0;
    close += p.osc_close ? 1 : 0;
  }
  const bool ok = best_return >= kDqnMinReturn && 2 * left > kDqnSeeds && close >= kDqnMinSmallGap;
  return {ok, format("%d episodes, layout %s: H=4 step %.4g final return %.3f; H=2 worst q_l>q_r in "
                     "%d/%d; H=2 oscillating |q_l-q_r|<%.1f in %d/%d",
                     base.n_episodes, std::string(layout_name(layout)).c_str(), sweep.best_step_size,
                     best_return, left, kDqnSeeds, kDqnMaxGap, close, kDqnSeeds)};
}

double gradient_check_error(Rng& rng, int hidden) {
  Mlp net = Mlp::random(hidden, rng);
  std::uniform_real_distribution<double> obs(-2.0, 4.0), target(-3.0, 3.0);
  std::uniform_int_distribution<int> size(1, 8), action(0, 1);
  std::vector<TrainingSample> batch(static_cast<std::size_t>(size(rng)));
  for (auto& s : batch) s = TrainingSample{obs(rng), action(rng), target(rng)};
  const double l2 = 1e-4;
  auto loss = [&](const Mlp& m) {
    double sum = 0.0;
    for (const auto& s : batch) {
      const double r = mlp_forward(m, s.obs)[s.action] - s.target;
      sum += r * r;
    }
    double sq = 0.0;
    for (double p : m.params()) sq += p * p;
    return sum / static_cast<double>(batch.size()) + l2 * sq;
  };
  const auto grad = mlp_backward(net, batch, l2);
  double worst = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    Mlp up = net, down = net;
    up.params()[i] += kGradientStep;
    down.params()[i] -= kGradientStep;
    const double fd = (loss(up) - loss(down)) / (2.0 * kGradientStep);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), kGradientFloor});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

Check property_suite() {
  Rng rng(2024);
  std::uniform_int_distribution<int> n_states(1, 8), n_actions(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double bellman = 0.0;
  for (int i = 0; i < kRandomMdps; ++i) {
    const Mdp mdp = make_random_episodic_mdp(n_states(rng), n_actions(rng), rng);
    Eigen::MatrixXd probs(mdp.num_states(), mdp.num_actions());
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
      for (Eigen::Index a = 0; a < probs.cols(); ++a) probs(s, a) = unit(rng) + 1e-3;
      probs.row(s) /= probs.row(s).sum();
    }
    const TabularPolicy pi(probs);
    const ValueVector v = evaluate_exact(mdp, pi);
    bellman = std::max(bellman, (v - bellman_backup(mdp, pi, v)).cwiseAbs().maxCoeff());
  }

  double orthogonality = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < kRandomMdps; ++i) {
    const int n = 2 + i % 7, d = 1 + i % n;
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd t(n), w(n);
    for (int s = 0; s < n; ++s) {
      for (int j = 0; j < d; ++j) x(s, j) = normal(rng);
      t(s) = normal(rng);
      w(s) = unit(rng);
    }
    const FeatureMap fm(x);
    const LinearValue lv = fit_weighted_least_squares(fm, t, w);
    const Eigen::VectorXd residual = x.transpose() * (w.asDiagonal() * (x * lv.theta - t));
    orthogonality = std::max(orthogonality, residual.cwiseAbs().maxCoeff());
  }

  double gradient = 0.0;
  for (int i = 0; i < kGradientInstances; ++i) {
    gradient = std::max(gradient, gradient_check_error(rng, i % 2 == 0 ? 2 : 4));
  }

  // Reruns with the same seed must serialise to identical bytes.
  bool identical = true;
  {
    const Counterexample ce = make_counterexample(CounterexampleKind::Oscillating);
    AgentConfig cfg;
    cfg.n_episodes = 2000;
    cfg.seed = 7;
    auto csv = [](const RunLog& log) {
      std::ostringstream s;
      write_run_csv(s, log);
      return s.str();
    };
    identical = identical && csv(q_learning_run(ce.mdp, ce.features, cfg).records) ==
                                 csv(q_learning_run(ce.mdp, ce.features, cfg).records);
    identical = identical &&
                csv(actor_critic_run(ce.mdp, ce.features, cfg, CriticMode::TD0).records) ==
                    csv(actor_critic_run(ce.mdp, ce.features, cfg, CriticMode::TD0).records);
    DqnConfig dqn;
    dqn.n_episodes = 300;
    dqn.seed = 7;
    const ContinuousObsProblem p = make_continuous_variant(CounterexampleKind::WorstCase);
    identical = identical && csv(dqn_run(p, dqn).records) == csv(dqn_run(p, dqn).records);
  }

  const bool ok = bellman < kBellmanTol && orthogonality < kOrthogonalityTol &&
                  gradient < kGradientRelTol && identical;
  return {ok, format("Bellman residual %.2e over %d MDPs; orthogonality %.2e; gradient rel. error "
                     "%.2e over %d nets; reruns %s",
                     bellman, kRandomMdps, orthogonality, gradient, kGradientInstances,
                     identical ? "byte-identical" : "DIFFER")};
}

void print(std::ostream& out, const CriterionResult& r) {
  const char* tag = r.skipped ? "[SKIP]" : r.passed ? "[PASS]" : "[FAIL]";
  out << tag << " criterion " << r.id << " " << r.name << " (" << format("%.3f", r.seconds)
      << " s): " << r.detail << std::endl;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out) {
  std::vector<CriterionResult> results;
  auto add = [&](CriterionResult r) {
    print(out, r);
    results.push_back(std::move(r));
  };
  auto skip = [&](int id, std::string name) {
    CriterionResult r;
    r.id = id;
    r.name = std::move(name);
    r.skipped = true;
    r.detail = "not run in fast mode";
    add(std::move(r));
  };
  const Execution exec = options.exec;
  add(timed(1, "closed-form recovery", kFastRuntime, closed_form_recovery));
  add(timed(2, "switching thresholds", kFastRuntime, switching_thresholds));
  add(timed(3, "API trajectory classification", kFastRuntime, trajectory_classification));
  add(timed(4, "fixed-point enumeration", kFastRuntime, [&] { return fixed_point_enumeration(exec); }));
  add(timed(5, "AVI behaviour", kAviRuntime, avi_behaviour));
  if (options.fast) {
    skip(6, "RL pathologies");
    skip(7, "DQN behaviour");
  } else {
    add(timed(6, "RL pathologies", 0.0, [&] { return rl_pathologies(exec); }));
    add(timed(7, "DQN behaviour", 0.0, [&] { return dqn_behaviour(options.full_scale, exec); }));
  }
  add(timed(8, "property suite", 0.0, property_suite));
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CriterionResult& r) { return r.skipped || r.passed; });
}

}  // namespace apelab
