#pragma once

// Multi-seed experiment runner behind the CLI.
//
// Output layout under the experiment directory:
//   run_000.csv ...   per-run records (run CSV schema, see records.hpp)
//   trace_000.csv ... DP runs only (trace CSV schema, see dp.hpp)
//   aggregate.csv     per-episode mean and standard error over runs
//   summary.json      configuration echo, outcome and final-policy tallies
//   fixed_points.csv  enumerate only:
//                     policy,api_fixed,avi_fixed,start_value,api_theta,avi_theta
//
// When no output directory is configured the experiment goes to
// $APELAB_OUT/<algorithm>_<problem> (or ./apelab_out/... if unset).

#include "apelab/agents.hpp"
#include "apelab/catalog.hpp"
#include "apelab/dqn.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace apelab {

enum class Algorithm { Api, Avi, QLearning, AcMc, AcTd0, Dqn, Enumerate };

/// "api", "avi", "qlearning", "ac-mc", "ac-td0", "dqn", "enumerate".
std::string_view algorithm_name(Algorithm algorithm);
std::optional<Algorithm> parse_algorithm(std::string_view name);

inline constexpr const char* kOutputRootEnv = "APELAB_OUT";

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::Api;
  CounterexampleKind problem = CounterexampleKind::WorstCase;
  /// Replaces the catalog problem when set; features come from `partition`
  /// (lists of state labels) or are one-hot per state.
  std::optional<std::filesystem::path> mdp_file;
  std::vector<std::vector<std::string>> partition;
  ObservationLayout layout = ObservationLayout::SplitAroundStart;

  int n_runs = 30;
  /// Defaults to 20k for the tabular agents and 50k for DQN.
  std::optional<int> n_episodes;
  int max_iters = 1000;
  std::uint64_t seed_base = 0;
  /// API start for a single run; multi-run API sweeps rho over [0, 1].
  std::optional<double> rho;

  AgentConfig agent;
  DqnConfig dqn;

  std::optional<std::filesystem::path> output_dir;
  bool write_files = true;
};

/// Overrides fields from a JSON object. Recognised keys:
///   algorithm, problem, mdp_file, partition, layout, n_runs, n_episodes,
///   max_iters, seed, rho, step_size, epsilon, init_scale, actor_baseline,
///   hidden_units, batch, l2, replay_capacity, output_dir
/// Unknown keys raise ConfigError. step_size and epsilon apply to whichever
/// agent the algorithm selects.
void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& doc);
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);

/// Throws ConfigError on incompatible settings.
void validate(const ExperimentConfig& cfg);

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<RunLog> runs;
  nlohmann::json summary;
  std::filesystem::path output_dir;
};

ExperimentResult run_experiment_suite(const ExperimentConfig& cfg,
                                      Execution exec = Execution::Parallel);

}  // namespace apelab
