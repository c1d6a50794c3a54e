#include "sdpso/pso.hpp"

#include <limits>

namespace sdpso {

SwarmState init_swarm(const RunConfig& config, const Objective& objective, RandomStream& stream, int swarm_id) {
  const Bounds& bounds = config.bounds;
  const Vector vmax = config.vmax();
  SwarmState swarm;
  swarm.swarm_id = swarm_id;
  swarm.particles.resize(static_cast<std::size_t>(config.pop_size));
  swarm.gbest_fitness = std::numeric_limits<double>::infinity();

  for (auto& p : swarm.particles) {
    p.position = bounds.lo + stream.uniform_vector(bounds.dim()).cwiseProduct(bounds.width());
    p.velocity = (2.0 * stream.uniform_vector(bounds.dim()).array() - 1.0).matrix().cwiseProduct(vmax);
    p.fitness = objective(p.position);
    p.fitness_is_true = true;
    p.pbest_position = p.position;
    p.pbest_fitness = p.fitness;
    p.history.push(p.fitness);
    ++swarm.true_eval_count;
    if (p.pbest_fitness < swarm.gbest_fitness || swarm.gbest_position.size() == 0) {
      swarm.gbest_fitness = p.pbest_fitness;
      swarm.gbest_position = p.pbest_position;
    }
  }
  swarm.generation = 1;
  swarm.evals = config.pop_size;
  return swarm;
}

std::vector<Sample> initial_samples(const SwarmState& swarm) {
  std::vector<Sample> out;
  out.reserve(swarm.particles.size());
  for (const auto& p : swarm.particles) out.push_back({p.position, p.fitness, swarm.swarm_id, 1, true});
  return out;
}

Vector velocity_update(const Particle& particle, const Vector& gbest_position, double alpha, double c1, double c2,
                       const Vector& gamma1, const Vector& gamma2, const Vector& vmax) {
  const Vector v = alpha * particle.velocity +
                   c1 * gamma1.cwiseProduct(particle.pbest_position - particle.position) +
                   c2 * gamma2.cwiseProduct(gbest_position - particle.position);
  return v.cwiseMax(-vmax).cwiseMin(vmax);
}

Vector velocity_update(const Particle& particle, const Vector& gbest_position, double alpha, double c1, double c2,
                       const Vector& vmax, RandomStream& stream) {
  const Vector gamma1 = stream.uniform_vector(particle.position.size());
  const Vector gamma2 = stream.uniform_vector(particle.position.size());
  return velocity_update(particle, gbest_position, alpha, c1, c2, gamma1, gamma2, vmax);
}

Vector position_update(const Particle& particle, const Vector& v_new, const Bounds& bounds) {
  return clamp_to_bounds(particle.position + v_new, bounds);
}

FitnessSource decide_fitness_source(RandomStream& stream, double s_prob, bool surrogate_ready) {
  if (!surrogate_ready || s_prob <= 0.0) return FitnessSource::true_model;
  return stream.uniform() < s_prob ? FitnessSource::surrogate : FitnessSource::true_model;
}

double blend_pseudo_fitness(double pseudo, const FitnessHistory& history, double pseudo_weight) {
  if (!history.full()) {
    throw std::logic_error("blend_pseudo_fitness: history holds " + std::to_string(history.size()) +
                           " entries, expected " + std::to_string(FitnessHistory::kCapacity));
  }
  return pseudo_weight * pseudo + (1.0 - pseudo_weight) * history.mean();
}

std::optional<VerificationPair> update_bests(SwarmState& swarm, std::size_t index, double candidate_fitness,
                                             bool fitness_is_true, const Objective& objective) {
  Particle& p = swarm.particles.at(index);
  if (!(candidate_fitness < p.pbest_fitness)) return std::nullopt;

  std::optional<VerificationPair> verification;
  bool improved = false;
  if (fitness_is_true) {
    p.pbest_fitness = candidate_fitness;
    p.pbest_position = p.position;
    improved = true;
  } else {
    const double actual = objective(p.position);
    ++swarm.verification_eval_count;
    ++swarm.true_eval_count;
    verification = VerificationPair{candidate_fitness, actual, swarm.swarm_id, swarm.generation + 1};
    if (actual < p.pbest_fitness) {
      p.pbest_fitness = actual;
      p.pbest_position = p.position;
      improved = true;
    }
  }
  if (improved && p.pbest_fitness < swarm.gbest_fitness) {
    swarm.gbest_fitness = p.pbest_fitness;
    swarm.gbest_position = p.pbest_position;
  }
  return verification;
}

StepOutcome step_generation(SwarmState& swarm, const Objective& objective, const SurrogateSnapshot* surrogate,
                            const RunConfig& config, RandomStream& stream) {
  StepOutcome outcome;
  outcome.generation = swarm.generation + 1;
  const bool surrogate_ready = surrogate != nullptr && surrogate->trained();
  const Vector vmax = config.vmax();
  const long true_before = swarm.true_eval_count;

  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    Particle& p = swarm.particles[i];
    p.velocity = velocity_update(p, swarm.gbest_position, config.alpha, config.c1, config.c2, vmax, stream);
    p.position = position_update(p, p.velocity, config.bounds);

    double fitness;
    bool is_true;
    if (decide_fitness_source(stream, config.s_prob, surrogate_ready) == FitnessSource::surrogate) {
      const double pseudo = predict_pseudo_fitness(*surrogate, p.position);
      fitness = blend_pseudo_fitness(pseudo, p.history, config.pseudo_weight);
      is_true = false;
      ++outcome.surrogate_calls;
      ++swarm.surrogate_call_count;
    } else {
      fitness = objective(p.position);
      is_true = true;
      ++swarm.true_eval_count;
      outcome.new_samples.push_back({p.position, fitness, swarm.swarm_id, outcome.generation, true});
    }
    p.fitness = fitness;
    p.fitness_is_true = is_true;

    if (auto pair = update_bests(swarm, i, fitness, is_true, objective)) {
      outcome.verification_pairs.push_back(*pair);
    }
    p.history.push(fitness);
  }

  swarm.generation += 1;
  swarm.evals += static_cast<long>(swarm.particles.size());
  outcome.true_evals = swarm.true_eval_count - true_before;
  return outcome;
}

}  // namespace sdpso
