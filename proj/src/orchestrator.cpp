#include "sdpso/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <exception>
#include <iostream>
#include <numeric>
#include <thread>

namespace sdpso {

namespace {

/// Everything owned by one swarm worker. Touched only by its own thread
/// between barriers and by the manager at barriers.
struct Worker {
  Worker(RandomStream stream_, Objective objective_) : stream(std::move(stream_)), objective(std::move(objective_)) {}

  SwarmState swarm;
  RandomStream stream;
  Objective objective;
  std::vector<Sample> pending;
  std::vector<GenerationRecord> records;
  std::vector<VerificationPair> verification;
  std::deque<std::pair<long, double>> recent_true;  // (generation, fitness)
  std::exception_ptr error;
};

std::vector<std::size_t> order_by_pbest(const SwarmState& swarm) {
  std::vector<std::size_t> idx(swarm.particles.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return swarm.particles[a].pbest_fitness < swarm.particles[b].pbest_fitness;
  });
  return idx;
}

void refresh_gbest(SwarmState& swarm) {
  for (const auto& p : swarm.particles) {
    if (p.pbest_fitness < swarm.gbest_fitness) {
      swarm.gbest_fitness = p.pbest_fitness;
      swarm.gbest_position = p.pbest_position;
    }
  }
}

GenerationRecord make_record(const SwarmState& s, long snapshot_version) {
  return {s.swarm_id, s.generation, s.gbest_fitness, s.evals, s.true_eval_count, s.surrogate_call_count,
          s.verification_eval_count, snapshot_version};
}

void remember_true(Worker& w, long generation, double fitness, int psi) {
  w.recent_true.emplace_back(generation, fitness);
  while (!w.recent_true.empty() && w.recent_true.front().first <= generation - psi) w.recent_true.pop_front();
}

template <typename Fn>
void for_each_worker(std::vector<Worker>& workers, Fn&& fn) {
  if (workers.size() == 1) {
    try {
      fn(workers.front());
    } catch (...) {
      workers.front().error = std::current_exception();
    }
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(workers.size());
  for (auto& w : workers) {
    threads.emplace_back([&fn, &w] {
      try {
        fn(w);
      } catch (...) {
        w.error = std::current_exception();
      }
    });
  }
}

std::string describe(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

}  // namespace

std::vector<Particle> select_emigrants(const SwarmState& swarm, int count) {
  const auto idx = order_by_pbest(swarm);
  std::vector<Particle> out;
  for (int k = 0; k < count && k < static_cast<int>(idx.size()); ++k) out.push_back(swarm.particles[idx[k]]);
  return out;
}

void receive_immigrants(SwarmState& swarm, const std::vector<Particle>& immigrants) {
  const auto idx = order_by_pbest(swarm);
  const std::size_t n = std::min(immigrants.size(), idx.size());
  for (std::size_t k = 0; k < n; ++k) swarm.particles[idx[idx.size() - 1 - k]] = immigrants[k];
  refresh_gbest(swarm);
}

std::vector<ExchangeMessage> attempt_exchange(std::vector<SwarmState>& swarms, double beta, int emigrant_count,
                                              RandomStream& stream) {
  std::vector<ExchangeMessage> messages;
  const int m_count = static_cast<int>(swarms.size());
  if (m_count < 2 || emigrant_count < 1) return messages;
  for (int m = 0; m < m_count; ++m) {
    if (stream.uniform() < beta) {
      messages.push_back({m, (m + 1) % m_count, select_emigrants(swarms[static_cast<std::size_t>(m)], emigrant_count)});
    }
  }
  for (const auto& msg : messages) receive_immigrants(swarms[static_cast<std::size_t>(msg.to_swarm)], msg.emigrants);
  return messages;
}

std::shared_ptr<const SurrogateSnapshot> collect_and_train(std::vector<std::vector<Sample>>& pending,
                                                           TrainingDataset& dataset,
                                                           std::shared_ptr<const SurrogateSnapshot> previous,
                                                           const SurrogateConfig& config, RandomStream& stream,
                                                           const Trainer& trainer, std::vector<std::string>& warnings) {
  for (auto& samples : pending) {
    dataset.append(samples);
    samples.clear();
  }
  try {
    const Trainer& fit = trainer;
    SurrogateSnapshot next = fit ? fit(dataset, previous.get(), config, stream)
                                 : train(dataset, previous.get(), config, stream);
    return std::make_shared<const SurrogateSnapshot>(std::move(next));
  } catch (const std::exception& e) {
    warnings.push_back(std::string("surrogate training failed, keeping version ") +
                       std::to_string(previous ? previous->version : 0) + ": " + e.what());
    return previous;
  }
}

void finalize(const std::vector<SwarmState>& swarms, RunResult& result) {
  result.true_eval_count = 0;
  result.surrogate_call_count = 0;
  result.tee_count = 0;
  for (std::size_t m = 0; m < swarms.size(); ++m) {
    const auto& s = swarms[m];
    if (m == 0 || s.gbest_fitness < result.best_fitness) {
      result.best_fitness = s.gbest_fitness;
      result.best_position = s.gbest_position;
      result.best_swarm = s.swarm_id;
    }
    result.true_eval_count += s.true_eval_count;
    result.surrogate_call_count += s.surrogate_call_count;
    result.tee_count += s.verification_eval_count;
  }
}

RunResult run(const RunConfig& config, const Objective& objective, const RunHooks& hooks) {
  return run(config, ObjectiveFactory([&objective](int) { return objective; }), hooks);
}

RunResult run(const RunConfig& config, const ObjectiveFactory& objectives, const RunHooks& hooks) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  std::ostream& log = hooks.log ? *hooks.log : std::cerr;

  RunResult result;
  const int m_count = config.swarms;
  std::vector<Worker> workers;
  workers.reserve(static_cast<std::size_t>(m_count));
  for (int m = 0; m < m_count; ++m) {
    Objective obj = objectives(m);
    if (obj.dim != config.dim) {
      throw ConfigError("objective '" + obj.name + "' has dimension " + std::to_string(obj.dim) +
                        ", configuration expects " + std::to_string(config.dim));
    }
    workers.emplace_back(seeded_stream(config.seed, static_cast<std::uint64_t>(m)), std::move(obj));
  }
  RandomStream manager = seeded_stream(config.seed, kManagerStream);
  TrainingDataset dataset(config.bounds, config.surrogate.dataset_cap);
  std::shared_ptr<const SurrogateSnapshot> snapshot;
  const bool use_surrogate = config.s_prob > 0.0;

  auto collect_partial = [&](const std::string& why) {
    for (const auto& w : workers) {
      result.generations.insert(result.generations.end(), w.records.begin(), w.records.end());
      result.verification_log.insert(result.verification_log.end(), w.verification.begin(), w.verification.end());
    }
    result.warnings.push_back(why);
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return RunFailure(why, result);
  };
  auto check_errors = [&] {
    for (const auto& w : workers) {
      if (w.error) {
        throw collect_partial("swarm " + std::to_string(w.swarm.swarm_id) + " failed: " + describe(w.error));
      }
    }
  };

  for_each_worker(workers, [&](Worker& w) {
    const int id = static_cast<int>(&w - workers.data());
    w.swarm = init_swarm(config, w.objective, w.stream, id);
    w.pending = initial_samples(w.swarm);
    for (const auto& s : w.pending) remember_true(w, 1, s.fitness, config.psi);
    w.records.push_back(make_record(w.swarm, 0));
  });
  check_errors();

  long generation = 1;
  auto alive = [&] { return generation * config.pop_size < config.t_max; };
  while (alive()) {
    const long next_exchange = (generation / config.phi + 1) * config.phi;
    const long next_training = (generation / config.psi + 1) * config.psi;
    const long last_generation = (config.t_max + config.pop_size - 1) / config.pop_size;
    const long barrier = std::min({next_exchange, next_training, last_generation});
    const SurrogateSnapshot* current = snapshot.get();
    const long version = current ? current->version : 0;

    for_each_worker(workers, [&](Worker& w) {
      while (w.swarm.generation < barrier && w.swarm.evals < config.t_max) {
        StepOutcome out = step_generation(w.swarm, w.objective, current, config, w.stream);
        for (const auto& s : out.new_samples) remember_true(w, out.generation, s.fitness, config.psi);
        if (use_surrogate) std::move(out.new_samples.begin(), out.new_samples.end(), std::back_inserter(w.pending));
        w.verification.insert(w.verification.end(), out.verification_pairs.begin(), out.verification_pairs.end());
        w.records.push_back(make_record(w.swarm, version));
      }
    });
    check_errors();
    generation = barrier;

    if (alive()) {
      std::vector<SwarmState> states;
      if (generation % config.phi == 0 && m_count > 1) {
        states.reserve(workers.size());
        for (auto& w : workers) states.push_back(std::move(w.swarm));
        attempt_exchange(states, config.beta, config.emigrant_count(), manager);
        for (std::size_t m = 0; m < workers.size(); ++m) workers[m].swarm = std::move(states[m]);
      }
      if (generation % config.psi == 0 && use_surrogate) {
        std::vector<std::vector<Sample>> pending;
        for (auto& w : workers) pending.push_back(std::move(w.pending));
        for (auto& w : workers) w.pending.clear();
        const std::size_t before = result.warnings.size();
        snapshot = collect_and_train(pending, dataset, snapshot, config.surrogate, manager, hooks.trainer,
                                     result.warnings);
        if (result.warnings.size() > before) log << "warning: " << result.warnings.back() << '\n';
        if (snapshot && snapshot->version > (result.training_log.empty() ? 0 : result.training_log.back().version)) {
          result.training_log.push_back({snapshot->version, snapshot->sample_count, snapshot->train_rmse});
        }
      }
    }

    double ensemble = workers.front().swarm.gbest_fitness;
    for (const auto& w : workers) ensemble = std::min(ensemble, w.swarm.gbest_fitness);
    result.barrier_best.push_back(ensemble);

    if (hooks.on_barrier) {
      std::vector<SwarmState> view;
      for (const auto& w : workers) view.push_back(w.swarm);
      hooks.on_barrier(view, generation);
    }
  }

  std::vector<SwarmState> finals;
  for (auto& w : workers) {
    result.gbest_trajectories.emplace_back();
    for (const auto& r : w.records) result.gbest_trajectories.back().push_back(r.gbest);
    result.generations.insert(result.generations.end(), w.records.begin(), w.records.end());
    result.verification_log.insert(result.verification_log.end(), w.verification.begin(), w.verification.end());
    for (const auto& [g, f] : w.recent_true) result.final_block_true_fitness.push_back(f);
    finals.push_back(w.swarm);
  }
  finalize(finals, result);
  result.final_swarms = std::move(finals);
  result.dataset_size = dataset.size();
  result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace sdpso
