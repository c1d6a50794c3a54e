#pragma once

#include "sdpso/domain.hpp"
#include "sdpso/orchestrator.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sdpso {

enum class Mode { pso, dpso, sdpso };

/// Reads `key = value` lines ('#' starts a comment) into a validated RunConfig.
/// `overrides` are applied after the file, in order.
RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Builds a validated RunConfig from key/value settings. Unset keys take their
/// defaults; missing bounds take the problem's default box. The `mode` key
/// forces pso (1 swarm, no exchange, no surrogate), dpso (no surrogate) or
/// sdpso (requires s_prob > 0).
RunConfig config_from_settings(const std::vector<std::pair<std::string, std::string>>& settings);

/// "PSO", "D-PSO" or "SD-PSO(<s_prob>)".
std::string method_name(const RunConfig& config);

/// Seed of repetition `run` (0-based).
inline std::uint64_t run_seed(std::uint64_t base_seed, int run) {
  return base_seed + static_cast<std::uint64_t>(run) * 10007u;
}

/// Objective(s) for the configured problem, with the artificial delay applied.
/// External problems spawn one model process per swarm.
ObjectiveFactory make_objective_factory(const RunConfig& config);

struct FitnessStats {
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
  double best = 0.0;
  double worst = 0.0;
};

FitnessStats fitness_stats(const std::vector<double>& values);

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::string problem;
  int dim = 0;
  double best_fitness = 0.0;
  double elapsed_seconds = 0.0;
  long true_evals = 0;
  long surrogate_calls = 0;
  long tee_count = 0;
  bool ok = true;
  std::string error;
};

struct ExperimentSummary {
  std::string method;
  std::string problem;
  int dim = 0;
  FitnessStats fitness;
  double mean_elapsed_seconds = 0.0;
  double mean_true_evals = 0.0;
  std::optional<double> prediction_rmse;  ///< over verification pairs of all runs
  std::optional<double> train_rmse_mean;
  std::optional<double> train_rmse_std;
  int completed_runs = 0;
  int failed_runs = 0;
};

struct ExperimentOptions {
  bool parallel_runs = false;
  std::ostream* log = nullptr;
  /// Objective override (tests); defaults to make_objective_factory(config).
  ObjectiveFactory objectives;
  /// Keep every RunResult in memory.
  bool keep_results = false;
};

struct ExperimentOutput {
  ExperimentSummary summary;
  std::vector<RunRecord> runs;
  std::vector<RunResult> results;  ///< filled when keep_results is set
};

/// Runs config.num_runs independent repetitions. When `out_dir` is non-empty
/// the per-run logs and summary.csv are written there.
ExperimentOutput run_experiment(const RunConfig& config, const std::filesystem::path& out_dir = {},
                                const ExperimentOptions& options = {});

struct SweepPoint {
  double s_prob = 0.0;
  ExperimentSummary summary;
};

/// One experiment per probability, sharing seeds. Writes sweep.csv plus one
/// sub-directory of logs per probability when `out_dir` is non-empty.
std::vector<SweepPoint> sweep_sprob(const RunConfig& config, const std::vector<double>& probabilities,
                                    const std::filesystem::path& out_dir = {}, const ExperimentOptions& options = {});

// CSV logs. Every file starts with a header row; doubles use 17 significant digits.

void write_generations_csv(const std::filesystem::path& path, const std::vector<std::pair<int, RunResult>>& runs);
void write_training_csv(const std::filesystem::path& path, const std::vector<std::pair<int, RunResult>>& runs);
void write_verification_csv(const std::filesystem::path& path, const std::vector<std::pair<int, RunResult>>& runs);
void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs);
void write_summary_csv(const std::filesystem::path& path, const std::vector<ExperimentSummary>& summaries);

/// Minimal CSV table: header plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Recomputes summaries from runs.csv, verification.csv and (if present)
/// surrogate_training.csv in `log_dir`, one per (method, problem, D).
std::vector<ExperimentSummary> report(const std::filesystem::path& log_dir);

}  // namespace sdpso
