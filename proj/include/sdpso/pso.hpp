#pragma once

#include "sdpso/domain.hpp"
#include "sdpso/objectives.hpp"
#include "sdpso/surrogate.hpp"

#include <optional>
#include <vector>

namespace sdpso {

/// A surrogate-assisted fitness that improved on a personal best and was
/// re-checked against the true objective.
struct VerificationPair {
  double pseudo_fitness = 0.0;
  double true_fitness = 0.0;
  int swarm_id = 0;
  long generation = 0;
};

/// What one generation of a swarm produced for the manager.
struct StepOutcome {
  std::vector<Sample> new_samples;  ///< true evaluations only
  long surrogate_calls = 0;
  long true_evals = 0;              ///< includes verification evaluations
  std::vector<VerificationPair> verification_pairs;
  long generation = 0;
};

enum class FitnessSource { surrogate, true_model };

/// Random positions and velocities within bounds, each particle truly
/// evaluated. The initial evaluation counts as generation 1.
SwarmState init_swarm(const RunConfig& config, const Objective& objective, RandomStream& stream, int swarm_id = 0);

/// (position, fitness) pairs of a freshly initialised swarm.
std::vector<Sample> initial_samples(const SwarmState& swarm);

/// Inertia plus cognitive and social attraction, with caller-supplied
/// per-dimension random factors. Components are clamped to [-vmax, vmax].
Vector velocity_update(const Particle& particle, const Vector& gbest_position, double alpha, double c1, double c2,
                       const Vector& gamma1, const Vector& gamma2, const Vector& vmax);

/// As above, drawing gamma1 then gamma2 (D values each) from `stream`.
Vector velocity_update(const Particle& particle, const Vector& gbest_position, double alpha, double c1, double c2,
                       const Vector& vmax, RandomStream& stream);

/// x + v, clamped into bounds. The velocity itself is left as computed.
Vector position_update(const Particle& particle, const Vector& v_new, const Bounds& bounds);

/// Surrogate iff a trained surrogate exists and a fresh U[0,1) draw is below
/// `s_prob`. No draw is consumed when the surrogate cannot be used.
FitnessSource decide_fitness_source(RandomStream& stream, double s_prob, bool surrogate_ready);

/// w * pseudo + (1 - w) * mean of the last three assigned fitness values.
double blend_pseudo_fitness(double pseudo, const FitnessHistory& history, double pseudo_weight = 0.5);

/// Updates the personal and swarm bests of particle `index` from the fitness
/// just assigned to its current position. Surrogate-derived improvements are
/// confirmed with one true evaluation first; the returned pair records it.
std::optional<VerificationPair> update_bests(SwarmState& swarm, std::size_t index, double candidate_fitness,
                                             bool fitness_is_true, const Objective& objective);

/// One generation over every particle: move, assign fitness (true or blended
/// surrogate estimate), update bests. `surrogate` may be null.
StepOutcome step_generation(SwarmState& swarm, const Objective& objective, const SurrogateSnapshot* surrogate,
                            const RunConfig& config, RandomStream& stream);

}  // namespace sdpso
