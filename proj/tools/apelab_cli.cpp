// Command-line front end: dp, rl, dqn, enumerate, sweep, plot, accept.

#include "apelab/acceptance.hpp"
#include "apelab/harness.hpp"
#include "apelab/plot.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace apelab;

namespace {

struct Shared {
  std::string problem = "worst";
  std::string mdp_file;
  std::string config_file;
  std::string output_dir;
  int threads = 0;
  std::uint64_t seed = 0;
};

CounterexampleKind kind_or_throw(const std::string& name) {
  const auto k = parse_kind(name);
  if (!k) throw ConfigError("unknown problem '" + name + "' (oscillating|multiple|worst)");
  return *k;
}

ExperimentConfig base_config(const Shared& s, Algorithm algorithm) {
  ExperimentConfig cfg;
  cfg.algorithm = algorithm;
  cfg.problem = kind_or_throw(s.problem);
  cfg.seed_base = s.seed;
  if (!s.mdp_file.empty()) cfg.mdp_file = s.mdp_file;
  if (!s.output_dir.empty()) cfg.output_dir = s.output_dir;
  return cfg;
}

void finish(ExperimentConfig& cfg, const Shared& s) {
  if (!s.config_file.empty()) apply_config_file(cfg, s.config_file);
}

void print_summary(const ExperimentResult& r) {
  const auto& s = r.summary;
  if (s.contains("outcomes")) {
    for (const auto& [kind, count] : s["outcomes"].items()) {
      std::cout << "outcome " << kind << ": " << count.get<int>() << " run(s)\n";
    }
  }
  if (s.contains("runs") && s["runs"].size() == 1 && s["runs"][0].contains("outcome")) {
    std::cout << "trace: " << s["runs"][0]["outcome"].get<std::string>() << '\n';
  }
  if (s.contains("final_start_action")) {
    for (const auto& [action, count] : s["final_start_action"].items()) {
      std::cout << "final action at start = " << action << ": " << count.get<int>() << " run(s)\n";
    }
  }
  if (s.contains("final_return")) {
    std::cout << "final return (last 5%): " << s["final_return"]["mean"].get<double>() << " +- "
              << s["final_return"]["se"].get<double>() << '\n';
  }
  if (s.contains("api_fixed_points")) {
    std::cout << "API fixed points: " << s["api_fixed_points"].get<int>()
              << "\nAVI fixed points: " << s["avi_fixed_points"].get<int>()
              << "\nsets equal: " << (s["fixed_point_sets_equal"].get<bool>() ? "yes" : "no") << '\n';
    for (const auto& fp : s["fixed_points"]) {
      std::cout << "  " << fp["policy"].get<std::string>()
                << "  start value " << fp["start_value"].get<double>() << '\n';
    }
  }
  std::cout << "output: " << r.output_dir.string() << '\n';
}

void add_shared(CLI::App* sub, Shared& s, bool with_mdp) {
  sub->add_option("--problem", s.problem, "oscillating|multiple|worst")->capture_default_str();
  if (with_mdp) sub->add_option("--mdp", s.mdp_file, "JSON MDP document replacing the catalog problem");
  sub->add_option("--seed", s.seed, "seed of run 0; run i uses seed + i")->capture_default_str();
  sub->add_option("--out", s.output_dir, "output directory (default $APELAB_OUT/<algorithm>_<problem>)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate policy evaluation pathology lab"};
  app.require_subcommand(1);
  Shared s;
  app.add_option("--config", s.config_file, "JSON config; its keys override flags");
  app.add_option("--threads", s.threads, "worker threads (0 = available parallelism)");

  // dp
  auto* dp = app.add_subcommand("dp", "API or AVI on a catalog or JSON MDP");
  std::string dp_algorithm = "api";
  double rho = -1.0;
  int dp_runs = 1, max_iters = 1000;
  add_shared(dp, s, true);
  dp->add_option("--algorithm", dp_algorithm, "api|avi")->capture_default_str();
  dp->add_option("--rho", rho, "pi(r|A) of the initial API policy");
  dp->add_option("--runs", dp_runs, "runs; API spreads rho over [0,1] when --rho is absent")->capture_default_str();
  dp->add_option("--max-iters", max_iters)->capture_default_str();

  // rl
  auto* rl = app.add_subcommand("rl", "Q-learning or actor-critic on an aggregated MDP");
  std::string rl_algorithm = "qlearning";
  int runs = 30, episodes = 0;
  AgentConfig agent;
  bool no_baseline = false;
  add_shared(rl, s, true);
  rl->add_option("--algorithm", rl_algorithm, "qlearning|ac-mc|ac-td0")->capture_default_str();
  rl->add_option("--runs", runs)->capture_default_str();
  rl->add_option("--episodes", episodes, "episodes per run (default 20000)");
  rl->add_option("--step-size", agent.step_size)->capture_default_str();
  rl->add_option("--epsilon", agent.epsilon)->capture_default_str();
  rl->add_option("--init-scale", agent.init_scale)->capture_default_str();
  rl->add_flag("--no-baseline", no_baseline, "actor target r + v(s') without subtracting v(s)");

  // dqn
  auto* dqn = app.add_subcommand("dqn", "miniature DQN on a continuous-observation variant");
  DqnConfig dqn_cfg;
  std::string layout = "split";
  bool full_scale = false;
  add_shared(dqn, s, false);
  dqn->add_option("--runs", runs)->capture_default_str();
  dqn->add_option("--episodes", episodes, "episodes per run (default 50000)");
  dqn->add_option("--hidden", dqn_cfg.hidden_units)->capture_default_str();
  dqn->add_option("--step-size", dqn_cfg.step_size)->capture_default_str();
  dqn->add_option("--epsilon", dqn_cfg.epsilon)->capture_default_str();
  dqn->add_option("--layout", layout, "shared|disjoint|split")->capture_default_str();
  dqn->add_flag("--full-scale", full_scale, "500000 episodes per run");

  // enumerate
  auto* en = app.add_subcommand("enumerate", "API/AVI fixed points over all deterministic policies");
  add_shared(en, s, true);

  // sweep
  auto* sw = app.add_subcommand("sweep", "DQN step-size sweep over {0.0025 * 2^i}");
  int sweep_seeds = 1;
  add_shared(sw, s, false);
  sw->add_option("--seeds", sweep_seeds)->capture_default_str();
  sw->add_option("--episodes", episodes, "episodes per run (default 50000)");
  sw->add_option("--hidden", dqn_cfg.hidden_units)->capture_default_str();
  sw->add_option("--layout", layout, "shared|disjoint|split")->capture_default_str();
  sw->add_flag("--full-scale", full_scale, "500000 episodes per run");

  // plot
  auto* pl = app.add_subcommand("plot", "render an aggregate (figure2) or run CSVs (figure5) as SVG");
  std::vector<std::string> inputs;
  std::string style = "figure2", output, title;
  pl->add_option("--input", inputs, "aggregate CSV (figure2) or run CSVs (figure5)")->required();
  pl->add_option("--style", style, "figure2|figure5")->capture_default_str();
  pl->add_option("--output", output, "SVG path")->required();
  pl->add_option("--title", title);

  // accept
  auto* ac = app.add_subcommand("accept", "run the acceptance suite");
  bool fast = false;
  ac->add_flag("--fast", fast, "DP, linear-algebra and property criteria only");
  ac->add_flag("--full-scale", full_scale, "DQN criterion at 500000 episodes");

  if (argc < 2) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  set_worker_count(s.threads);

  try {
    if (dp->parsed()) {
      const auto algorithm = parse_algorithm(dp_algorithm);
      if (algorithm != Algorithm::Api && algorithm != Algorithm::Avi) {
        throw ConfigError("dp --algorithm must be api or avi");
      }
      ExperimentConfig cfg = base_config(s, *algorithm);
      cfg.n_runs = dp_runs;
      cfg.max_iters = max_iters;
      if (rho >= 0.0 || dp->count("--rho")) cfg.rho = rho;
      finish(cfg, s);
      print_summary(run_experiment_suite(cfg));
    } else if (rl->parsed()) {
      const auto algorithm = parse_algorithm(rl_algorithm);
      if (algorithm != Algorithm::QLearning && algorithm != Algorithm::AcMc &&
          algorithm != Algorithm::AcTd0) {
        throw ConfigError("rl --algorithm must be qlearning, ac-mc or ac-td0");
      }
      ExperimentConfig cfg = base_config(s, *algorithm);
      cfg.n_runs = runs;
      if (episodes > 0) cfg.n_episodes = episodes;
      agent.actor_baseline = !no_baseline;
      cfg.agent = agent;
      finish(cfg, s);
      print_summary(run_experiment_suite(cfg));
    } else if (dqn->parsed()) {
      ExperimentConfig cfg = base_config(s, Algorithm::Dqn);
      cfg.n_runs = runs;
      if (episodes > 0) cfg.n_episodes = episodes;
      if (full_scale) cfg.n_episodes = kFullScaleEpisodes;
      const auto l = parse_layout(layout);
      if (!l) throw ConfigError("unknown layout '" + layout + "'");
      cfg.layout = *l;
      cfg.dqn = dqn_cfg;
      finish(cfg, s);
      print_summary(run_experiment_suite(cfg));
    } else if (en->parsed()) {
      ExperimentConfig cfg = base_config(s, Algorithm::Enumerate);
      finish(cfg, s);
      print_summary(run_experiment_suite(cfg));
    } else if (sw->parsed()) {
      ExperimentConfig cfg = base_config(s, Algorithm::Dqn);
      cfg.n_episodes = full_scale ? kFullScaleEpisodes : (episodes > 0 ? episodes : kDeskScaleEpisodes);
      const auto l = parse_layout(layout);
      if (!l) throw ConfigError("unknown layout '" + layout + "'");
      cfg.layout = *l;
      cfg.dqn.hidden_units = dqn_cfg.hidden_units;
      finish(cfg, s);
      validate(cfg);
      DqnConfig run_cfg = cfg.dqn;
      run_cfg.n_episodes = *cfg.n_episodes;
      run_cfg.seed = cfg.seed_base;
      const SweepResult result = step_size_sweep(make_continuous_variant(cfg.problem, cfg.layout),
                                                 run_cfg, sweep_seeds);
      const auto dir = resolve_output_dir(cfg);
      std::filesystem::create_directories(dir);
      std::ofstream csv(dir / "sweep.csv");
      if (!csv) throw std::runtime_error("cannot write " + (dir / "sweep.csv").string());
      csv << "step_size,mean_final_return\n";
      for (const auto& e : result.entries) {
        std::cout << "step " << e.step_size << ": mean final return " << e.mean_final_return << '\n';
        csv << format_number(e.step_size) << ',' << format_number(e.mean_final_return) << '\n';
      }
      std::cout << "best step size: " << result.best_step_size << "\noutput: " << dir.string() << '\n';
    } else if (pl->parsed()) {
      const auto st = parse_plot_style(style);
      if (!st) throw ConfigError("unknown plot style '" + style + "'");
      PlotOptions options;
      options.title = title;
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      emit_plot(paths, *st, output, options);
      std::cout << "wrote " << output << '\n';
    } else if (ac->parsed()) {
      AcceptanceOptions options;
      options.fast = fast;
      options.full_scale = full_scale;
      return all_passed(run_acceptance(options, std::cout)) ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
