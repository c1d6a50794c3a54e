#pragma once

#include "sdpso/domain.hpp"
#include "sdpso/objectives.hpp"
#include "sdpso/pso.hpp"
#include "sdpso/surrogate.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace sdpso {

/// Best particles of one swarm sent to its ring neighbour.
struct ExchangeMessage {
  int from_swarm = 0;
  int to_swarm = 0;
  std::vector<Particle> emigrants;
};

/// Per-swarm counters after a generation. Counters are cumulative.
struct GenerationRecord {
  int swarm_id = 0;
  long generation = 0;
  double gbest = 0.0;
  long evals = 0;
  long true_evals = 0;
  long surrogate_calls = 0;
  long tee_count = 0;
  long snapshot_version = 0;  ///< surrogate version the swarm used for this generation
};

struct TrainingRecord {
  long version = 0;
  std::size_t sample_count = 0;
  double train_rmse = 0.0;
};

struct RunResult {
  Vector best_position;
  double best_fitness = 0.0;
  int best_swarm = 0;
  std::vector<std::vector<double>> gbest_trajectories;  ///< [swarm][generation - 1]
  std::vector<GenerationRecord> generations;
  std::vector<double> barrier_best;  ///< ensemble best after each barrier
  double elapsed_seconds = 0.0;
  long true_eval_count = 0;
  long surrogate_call_count = 0;
  long tee_count = 0;
  std::vector<TrainingRecord> training_log;
  std::vector<VerificationPair> verification_log;
  std::vector<double> final_block_true_fitness;  ///< true samples from the last psi generations
  std::size_t dataset_size = 0;
  std::vector<std::string> warnings;
  std::vector<SwarmState> final_swarms;
};

/// Thrown when a worker fails; carries whatever the run had logged so far.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(const std::string& what, RunResult partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunResult& partial() const { return partial_; }

 private:
  RunResult partial_;
};

using Trainer = std::function<SurrogateSnapshot(const TrainingDataset&, const SurrogateSnapshot*,
                                                const SurrogateConfig&, RandomStream&)>;
using ObjectiveFactory = std::function<Objective(int swarm_id)>;

struct RunHooks {
  Trainer trainer;                 ///< defaults to sdpso::train
  std::ostream* log = nullptr;     ///< warnings; defaults to std::cerr
  /// Called at every barrier after exchange and training.
  std::function<void(const std::vector<SwarmState>&, long generation)> on_barrier;
};

/// Stream id of the manager's random stream (swarms use their own index).
inline constexpr std::uint64_t kManagerStream = 0xFFFFu;

/// Selects the best `count` particles by personal-best fitness.
std::vector<Particle> select_emigrants(const SwarmState& swarm, int count);

/// Replaces the `immigrants.size()` worst particles (by personal-best fitness)
/// and refreshes the swarm best.
void receive_immigrants(SwarmState& swarm, const std::vector<Particle>& immigrants);

/// For every swarm m, with probability beta, sends its best particles to
/// swarm (m + 1) mod M. Emigrants are chosen from the pre-exchange
/// populations. Returns the messages that were delivered.
std::vector<ExchangeMessage> attempt_exchange(std::vector<SwarmState>& swarms, double beta, int emigrant_count,
                                              RandomStream& stream);

/// Appends the swarms' pending samples (in swarm order) and retrains. On
/// training failure the previous snapshot is kept and a warning is recorded.
std::shared_ptr<const SurrogateSnapshot> collect_and_train(std::vector<std::vector<Sample>>& pending,
                                                           TrainingDataset& dataset,
                                                           std::shared_ptr<const SurrogateSnapshot> previous,
                                                           const SurrogateConfig& config, RandomStream& stream,
                                                           const Trainer& trainer, std::vector<std::string>& warnings);

/// Picks the best swarm and aggregates counters.
void finalize(const std::vector<SwarmState>& swarms, RunResult& result);

RunResult run(const RunConfig& config, const Objective& objective, const RunHooks& hooks = {});
RunResult run(const RunConfig& config, const ObjectiveFactory& objectives, const RunHooks& hooks = {});

}  // namespace sdpso
