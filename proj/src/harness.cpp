#include "apelab/harness.hpp"

#include "apelab/dp.hpp"
#include "apelab/mdp_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace apelab {

namespace {

constexpr std::array<Algorithm, 7> kAllAlgorithms = {
    Algorithm::Api,  Algorithm::Avi,   Algorithm::QLearning, Algorithm::AcMc,
    Algorithm::AcTd0, Algorithm::Dqn, Algorithm::Enumerate};

bool is_dp(Algorithm a) { return a == Algorithm::Api || a == Algorithm::Avi; }
bool is_tabular_agent(Algorithm a) {
  return a == Algorithm::QLearning || a == Algorithm::AcMc || a == Algorithm::AcTd0;
}

int episodes_for(const ExperimentConfig& cfg) {
  if (cfg.n_episodes) return *cfg.n_episodes;
  return cfg.algorithm == Algorithm::Dqn ? kDeskScaleEpisodes : AgentConfig{}.n_episodes;
}

struct Problem {
  Mdp mdp;
  FeatureMap features;
  std::string name;
};

Problem load_problem(const ExperimentConfig& cfg) {
  if (cfg.mdp_file) {
    Mdp mdp = load_mdp(*cfg.mdp_file);
    FeatureMap fm = cfg.partition.empty() ? FeatureMap::identity(mdp.num_states())
                                          : FeatureMap::from_partition(mdp, cfg.partition);
    return Problem{std::move(mdp), std::move(fm), cfg.mdp_file->stem().string()};
  }
  Counterexample ce = make_counterexample(cfg.problem);
  return Problem{std::move(ce.mdp), std::move(ce.features), std::string(kind_name(cfg.problem))};
}

std::string run_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.csv", prefix, i);
  return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_for_write(path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

State first_successor(const Mdp& mdp, State s, Action a) {
  return mdp.outcomes(s, a).front().next;
}

RunRecord dp_record(const Mdp& mdp, const FeatureMap& fm, const DpIterate& it, std::uint64_t seed,
                    std::int64_t index) {
  const State start = mdp.start_state();
  auto v_hat = [&](Action a) {
    const State next = first_successor(mdp, start, std::min(a, mdp.num_actions() - 1));
    return next == kTerminal ? 0.0 : predict(it.theta, fm, next);
  };
  const double pi_1 = mdp.num_actions() > 1 ? it.policy.prob(start, 1) : 0.0;
  return RunRecord{seed, index, evaluate_exact(mdp, it.policy)(start), v_hat(0), v_hat(1), pi_1};
}

std::string outcome_kind(const DpOutcome& outcome) {
  if (std::holds_alternative<FixedPoint>(outcome)) return "FixedPoint";
  if (const auto* c = std::get_if<Cycle>(&outcome)) {
    return "Cycle{period " + std::to_string(c->period) + "}";
  }
  return "MaxIters";
}

nlohmann::json theta_json(const LinearValue& lv) {
  return std::vector<double>(lv.theta.data(), lv.theta.data() + lv.theta.size());
}

struct RunOutput {
  RunLog log;
  nlohmann::json info;
  std::string trace_csv;
};

RunOutput run_dp(const ExperimentConfig& cfg, const Problem& p, std::size_t i) {
  const std::uint64_t seed = cfg.seed_base + i;
  RunOutput out;
  out.info["seed"] = seed;
  DpTrace trace;
  if (cfg.algorithm == Algorithm::Api) {
    double rho = cfg.rho.value_or(0.5);
    if (cfg.n_runs > 1 && !cfg.rho) rho = static_cast<double>(i) / (cfg.n_runs - 1);
    out.info["rho"] = rho;
    trace = run_api(p.mdp, p.features, start_mixture_policy(p.mdp, rho), cfg.max_iters);
  } else {
    Rng rng(seed);
    const AviStart start = random_avi_start(p.mdp, p.features, rng);
    out.info["theta0"] = theta_json(start.theta0);
    out.info["rho0"] = start.policy0.prob(p.mdp.start_state(), 1);
    trace = run_avi(p.mdp, p.features, start.theta0, start.policy0, cfg.max_iters);
  }
  for (std::size_t k = 0; k < trace.iterations.size(); ++k) {
    out.log.push_back(dp_record(p.mdp, p.features, trace.iterations[k], seed,
                                static_cast<std::int64_t>(k)));
  }
  const DpIterate& last = trace.iterations.back();
  out.info["outcome"] = describe(trace.outcome);
  out.info["outcome_kind"] = outcome_kind(trace.outcome);
  out.info["final_start_action"] = p.mdp.action_label(last.policy.mode(p.mdp.start_state()));
  out.info["final_theta"] = theta_json(last.theta);
  std::ostringstream csv;
  write_trace_csv(csv, p.mdp, p.features, trace);
  out.trace_csv = csv.str();
  return out;
}

void add_final_stats(RunOutput& out) {
  const RunLog& log = out.log;
  out.info["final_return"] = tail_mean(log, kFinalWindow, [](const RunRecord& r) { return r.return_; });
  out.info["final_tracked_value_1"] =
      tail_mean(log, kFinalWindow, [](const RunRecord& r) { return r.tracked_value_1; });
  out.info["final_tracked_value_2"] =
      tail_mean(log, kFinalWindow, [](const RunRecord& r) { return r.tracked_value_2; });
  if (!log.empty() && log.back().policy_statistic) {
    out.info["final_pi_r_at_A"] =
        tail_mean(log, kFinalWindow, [](const RunRecord& r) { return r.policy_statistic.value_or(0.0); });
  }
}

RunOutput run_agent(const ExperimentConfig& cfg, const Problem& p, std::size_t i) {
  AgentConfig agent = cfg.agent;
  agent.seed = cfg.seed_base + i;
  agent.n_episodes = episodes_for(cfg);
  RunOutput out;
  out.info["seed"] = agent.seed;
  const int g_start = *p.features.group(p.mdp.start_state());
  if (cfg.algorithm == Algorithm::QLearning) {
    QLearningRun run = q_learning_run(p.mdp, p.features, agent);
    const Action a = argmax_lowest(run.final_table.values.row(g_start).transpose());
    out.info["final_start_action"] = p.mdp.action_label(a);
    out.info["rank_flips"] = count_rank_flips(run.records, 0.25);
    out.log = std::move(run.records);
  } else {
    const CriticMode mode =
        cfg.algorithm == Algorithm::AcMc ? CriticMode::MonteCarlo : CriticMode::TD0;
    ActorCriticRun run = actor_critic_run(p.mdp, p.features, agent, mode);
    const Action a = argmax_lowest(run.final_params.policy(g_start));
    out.info["final_start_action"] = p.mdp.action_label(a);
    out.log = std::move(run.records);
  }
  add_final_stats(out);
  return out;
}

RunOutput run_dqn(const ExperimentConfig& cfg, const ContinuousObsProblem& problem, std::size_t i) {
  DqnConfig dqn = cfg.dqn;
  dqn.seed = cfg.seed_base + i;
  dqn.n_episodes = episodes_for(cfg);
  DqnRun run = dqn_run(problem, dqn);
  RunOutput out;
  out.info["seed"] = dqn.seed;
  const RunRecord& last = run.records.back();
  out.info["final_start_action"] =
      problem.mdp.action_label(last.tracked_value_2 > last.tracked_value_1 ? 1 : 0);
  out.info["final_q_gap"] = std::abs(last.tracked_value_1 - last.tracked_value_2);
  out.log = std::move(run.records);
  add_final_stats(out);
  return out;
}

std::string policy_string(const Mdp& mdp, const std::vector<Action>& actions) {
  std::string s;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    if (k) s += ' ';
    s += mdp.label(static_cast<State>(k)) + ":" + mdp.action_label(actions[k]);
  }
  return s;
}

std::string theta_string(const LinearValue& lv) {
  std::string s;
  for (Eigen::Index i = 0; i < lv.theta.size(); ++i) {
    if (i) s += ' ';
    s += format_number(lv.theta(i));
  }
  return s;
}

ExperimentResult run_enumeration(const ExperimentConfig& cfg, const Problem& p, Execution exec,
                                 const std::filesystem::path& dir) {
  const FixedPointReport report = enumerate_fixed_points(p.mdp, p.features, exec);
  ExperimentResult result;
  result.output_dir = dir;
  nlohmann::json& s = result.summary;
  s["api_fixed_points"] = report.api_count();
  s["avi_fixed_points"] = report.avi_count();
  bool sets_equal = true;
  double best_start = -std::numeric_limits<double>::infinity();
  nlohmann::json fixed = nlohmann::json::array();
  std::ostringstream csv;
  csv << "policy,api_fixed,avi_fixed,start_value,api_theta,avi_theta\n";
  for (const PolicyFixedPoint& pf : report.policies) {
    sets_equal = sets_equal && pf.is_api_fixed_point == pf.is_avi_fixed_point;
    best_start = std::max(best_start, pf.start_value);
    const std::string name = policy_string(p.mdp, pf.actions);
    if (pf.is_api_fixed_point || pf.is_avi_fixed_point) {
      fixed.push_back({{"policy", name},
                       {"api", pf.is_api_fixed_point},
                       {"avi", pf.is_avi_fixed_point},
                       {"start_value", pf.start_value}});
    }
    csv << name << ',' << (pf.is_api_fixed_point ? 1 : 0) << ',' << (pf.is_avi_fixed_point ? 1 : 0)
        << ',' << format_number(pf.start_value) << ',' << theta_string(pf.api_theta) << ','
        << (pf.avi_theta ? theta_string(*pf.avi_theta) : std::string()) << '\n';
  }
  s["fixed_point_sets_equal"] = sets_equal;
  s["optimal_start_value"] = best_start;
  s["fixed_points"] = fixed;
  if (cfg.write_files) {
    std::filesystem::create_directories(dir);
    write_text(dir / "fixed_points.csv", csv.str());
  }
  return result;
}

}  // namespace

std::string_view algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Api: return "api";
    case Algorithm::Avi: return "avi";
    case Algorithm::QLearning: return "qlearning";
    case Algorithm::AcMc: return "ac-mc";
    case Algorithm::AcTd0: return "ac-td0";
    case Algorithm::Dqn: return "dqn";
    case Algorithm::Enumerate: return "enumerate";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (Algorithm a : kAllAlgorithms) {
    if (algorithm_name(a) == name) return a;
  }
  return std::nullopt;
}

void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "algorithm") {
        const auto a = parse_algorithm(value.get<std::string>());
        if (!a) throw ConfigError("unknown algorithm '" + value.get<std::string>() + "'");
        cfg.algorithm = *a;
      } else if (key == "problem") {
        const auto k = parse_kind(value.get<std::string>());
        if (!k) throw ConfigError("unknown problem '" + value.get<std::string>() + "'");
        cfg.problem = *k;
      } else if (key == "mdp_file") {
        cfg.mdp_file = value.get<std::string>();
      } else if (key == "partition") {
        cfg.partition = value.get<std::vector<std::vector<std::string>>>();
      } else if (key == "layout") {
        const auto l = parse_layout(value.get<std::string>());
        if (!l) throw ConfigError("unknown layout '" + value.get<std::string>() + "'");
        cfg.layout = *l;
      } else if (key == "n_runs") {
        cfg.n_runs = value.get<int>();
      } else if (key == "n_episodes") {
        cfg.n_episodes = value.get<int>();
      } else if (key == "max_iters") {
        cfg.max_iters = value.get<int>();
      } else if (key == "seed") {
        cfg.seed_base = value.get<std::uint64_t>();
      } else if (key == "rho") {
        cfg.rho = value.get<double>();
      } else if (key == "step_size") {
        cfg.agent.step_size = cfg.dqn.step_size = value.get<double>();
      } else if (key == "epsilon") {
        cfg.agent.epsilon = cfg.dqn.epsilon = value.get<double>();
      } else if (key == "init_scale") {
        cfg.agent.init_scale = cfg.dqn.init_scale = value.get<double>();
      } else if (key == "actor_baseline") {
        cfg.agent.actor_baseline = value.get<bool>();
      } else if (key == "hidden_units") {
        cfg.dqn.hidden_units = value.get<int>();
      } else if (key == "batch") {
        cfg.dqn.batch = value.get<int>();
      } else if (key == "l2") {
        cfg.dqn.l2_coeff = value.get<double>();
      } else if (key == "replay_capacity") {
        cfg.dqn.replay_capacity = value.get<std::size_t>();
      } else if (key == "output_dir") {
        cfg.output_dir = value.get<std::string>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  apply_config_json(cfg, doc);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.n_runs < 1) throw ConfigError("n_runs must be at least 1");
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (cfg.n_episodes && *cfg.n_episodes < 1) throw ConfigError("n_episodes must be at least 1");
  if (cfg.rho) {
    if (cfg.algorithm != Algorithm::Api) throw ConfigError("rho only applies to api");
    if (!(*cfg.rho >= 0.0 && *cfg.rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  }
  if (!cfg.partition.empty() && !cfg.mdp_file) {
    throw ConfigError("partition needs an mdp_file; catalog problems carry their own");
  }
  if (cfg.mdp_file && cfg.algorithm == Algorithm::Dqn) {
    throw ConfigError("dqn runs only on the catalog's continuous variants");
  }
  try {
    if (is_tabular_agent(cfg.algorithm)) {
      AgentConfig agent = cfg.agent;
      agent.n_episodes = episodes_for(cfg);
      validate(agent);
    }
    if (cfg.algorithm == Algorithm::Dqn) {
      DqnConfig dqn = cfg.dqn;
      dqn.n_episodes = episodes_for(cfg);
      validate(dqn);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir) return *cfg.output_dir;
  const char* root = std::getenv(kOutputRootEnv);
  const std::filesystem::path base = root && *root ? root : "apelab_out";
  std::string problem = cfg.mdp_file ? cfg.mdp_file->stem().string() : std::string(kind_name(cfg.problem));
  return base / (std::string(algorithm_name(cfg.algorithm)) + "_" + problem);
}

ExperimentResult run_experiment_suite(const ExperimentConfig& cfg, Execution exec) {
  validate(cfg);
  const std::filesystem::path dir = resolve_output_dir(cfg);
  const Problem problem = load_problem(cfg);

  nlohmann::json echo = {{"algorithm", algorithm_name(cfg.algorithm)},
                         {"problem", problem.name},
                         {"n_runs", cfg.n_runs},
                         {"seed", cfg.seed_base}};
  if (cfg.algorithm == Algorithm::Enumerate) {
    ExperimentResult result = run_enumeration(cfg, problem, exec, dir);
    result.summary["config"] = echo;
    if (cfg.write_files) write_text(dir / "summary.json", result.summary.dump(2) + "\n");
    return result;
  }

  const auto n = static_cast<std::size_t>(cfg.n_runs);
  std::vector<RunOutput> outputs;
  if (is_dp(cfg.algorithm)) {
    echo["max_iters"] = cfg.max_iters;
    outputs = parallel_map(n, [&](std::size_t i) { return run_dp(cfg, problem, i); }, exec);
  } else if (cfg.algorithm == Algorithm::Dqn) {
    const ContinuousObsProblem continuous = make_continuous_variant(cfg.problem, cfg.layout);
    echo["layout"] = layout_name(cfg.layout);
    echo["hidden_units"] = cfg.dqn.hidden_units;
    echo["step_size"] = cfg.dqn.step_size;
    echo["n_episodes"] = episodes_for(cfg);
    outputs = parallel_map(n, [&](std::size_t i) { return run_dqn(cfg, continuous, i); }, exec);
  } else {
    echo["step_size"] = cfg.agent.step_size;
    echo["epsilon"] = cfg.agent.epsilon;
    echo["n_episodes"] = episodes_for(cfg);
    outputs = parallel_map(n, [&](std::size_t i) { return run_agent(cfg, problem, i); }, exec);
  }

  ExperimentResult result;
  result.output_dir = dir;
  nlohmann::json runs = nlohmann::json::array();
  std::map<std::string, int> outcomes;
  std::map<std::string, int> actions;
  std::vector<double> final_returns;
  for (RunOutput& out : outputs) {
    if (out.info.contains("outcome_kind")) ++outcomes[out.info["outcome_kind"].get<std::string>()];
    ++actions[out.info["final_start_action"].get<std::string>()];
    if (out.info.contains("final_return")) final_returns.push_back(out.info["final_return"].get<double>());
    runs.push_back(out.info);
  }
  nlohmann::json& s = result.summary;
  s["config"] = echo;
  if (!outcomes.empty()) s["outcomes"] = outcomes;
  s["final_start_action"] = actions;
  if (!final_returns.empty()) {
    const MeanSe m = mean_and_se(final_returns);
    s["final_return"] = {{"mean", m.mean}, {"se", m.se}};
  }
  s["runs"] = runs;

  for (RunOutput& out : outputs) result.runs.push_back(std::move(out.log));
  if (cfg.write_files) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < n; ++i) {
      std::ofstream f = open_for_write(dir / run_name("run", i));
      write_run_csv(f, result.runs[i]);
      if (!outputs[i].trace_csv.empty()) write_text(dir / run_name("trace", i), outputs[i].trace_csv);
    }
    std::ofstream agg = open_for_write(dir / "aggregate.csv");
    write_aggregate_csv(agg, aggregate_runs(result.runs));
    write_text(dir / "summary.json", s.dump(2) + "\n");
  }
  return result;
}

}  // namespace apelab
