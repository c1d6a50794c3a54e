// Command-line front end: run an experiment, sweep the surrogate
// probability, or recompute summaries from existing logs.

#include "sdpso/experiment.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

namespace {

void print_summaries(const std::vector<sdpso::ExperimentSummary>& summaries) {
  std::cout << std::left << std::setw(16) << "method" << std::setw(12) << "problem" << std::setw(5) << "D"
            << std::setw(14) << "mean" << std::setw(14) << "std" << std::setw(14) << "best" << std::setw(14)
            << "worst" << std::setw(12) << "elapsed_s" << "pred_rmse\n";
  for (const auto& s : summaries) {
    std::cout << std::left << std::setw(16) << s.method << std::setw(12) << s.problem << std::setw(5) << s.dim
              << std::setw(14) << s.fitness.mean << std::setw(14) << s.fitness.std << std::setw(14)
              << s.fitness.best << std::setw(14) << s.fitness.worst << std::setw(12) << s.mean_elapsed_seconds;
    if (s.prediction_rmse) std::cout << *s.prediction_rmse;
    else std::cout << "-";
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted distributed particle swarm optimisation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "results";
  bool parallel_runs = false;

  auto* run_cmd = app.add_subcommand("run", "Run num_runs repetitions of one configuration");
  run_cmd->add_option("-c,--config", config_path, "Configuration file (key = value lines)")->required();
  run_cmd->add_option("-s,--set", overrides, "Override a configuration key, e.g. --set s_prob=0.5");
  run_cmd->add_option("-o,--out", out_dir, "Directory for CSV logs")->capture_default_str();
  run_cmd->add_flag("--parallel-runs", parallel_runs, "Run repetitions concurrently (timings become unreliable)");

  std::vector<double> probabilities;
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat the experiment for several surrogate probabilities");
  sweep_cmd->add_option("-c,--config", config_path, "Configuration file")->required();
  sweep_cmd->add_option("-s,--set", overrides, "Override a configuration key");
  sweep_cmd->add_option("-p,--probs", probabilities, "Surrogate probabilities")->required()->delimiter(',');
  sweep_cmd->add_option("-o,--out", out_dir, "Directory for CSV logs")->capture_default_str();
  sweep_cmd->add_flag("--parallel-runs", parallel_runs, "Run repetitions concurrently");

  std::string logs_dir;
  std::string summary_out;
  auto* report_cmd = app.add_subcommand("report", "Recompute summary statistics from run logs");
  report_cmd->add_option("-l,--logs", logs_dir, "Directory containing runs.csv and verification.csv")->required();
  report_cmd->add_option("-o,--out", summary_out, "Write the recomputed summary.csv here");

  CLI11_PARSE(app, argc, argv);

  try {
    sdpso::ExperimentOptions options;
    options.parallel_runs = parallel_runs;
    if (*run_cmd) {
      const auto config = sdpso::parse_config(config_path, overrides);
      const auto output = sdpso::run_experiment(config, out_dir, options);
      print_summaries({output.summary});
      return output.summary.completed_runs > 0 ? 0 : 1;
    }
    if (*sweep_cmd) {
      const auto config = sdpso::parse_config(config_path, overrides);
      const auto points = sdpso::sweep_sprob(config, probabilities, out_dir, options);
      std::vector<sdpso::ExperimentSummary> summaries;
      for (const auto& p : points) summaries.push_back(p.summary);
      print_summaries(summaries);
      return 0;
    }
    if (*report_cmd) {
      const auto summaries = sdpso::report(logs_dir);
      print_summaries(summaries);
      if (!summary_out.empty()) sdpso::write_summary_csv(summary_out, summaries);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
