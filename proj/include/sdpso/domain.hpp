#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdpso {

using Vector = Eigen::VectorXd;

/// Raised for invalid configuration or mismatched dimensions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or inconsistent input data (grids, datasets).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an objective or external model fails to produce a fitness.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in parameter space.
struct Bounds {
  Vector lo;
  Vector hi;

  Bounds() = default;
  Bounds(Vector lo_, Vector hi_);

  /// Same interval [lo, hi] in every one of `dim` dimensions.
  static Bounds uniform(Eigen::Index dim, double lo, double hi);

  Eigen::Index dim() const { return lo.size(); }
  Vector width() const { return hi - lo; }
  bool contains(const Vector& x) const;
};

/// Component-wise clamp of `position` into `bounds`.
template <typename Derived>
Vector clamp_to_bounds(const Eigen::MatrixBase<Derived>& position, const Bounds& bounds) {
  if (position.size() != bounds.dim()) {
    throw ConfigError("clamp_to_bounds: position has dimension " + std::to_string(position.size()) +
                      ", bounds have " + std::to_string(bounds.dim()));
  }
  return position.derived().cwiseMax(bounds.lo).cwiseMin(bounds.hi);
}

/// Deterministic uniform random stream. Each (seed, stream_id) pair owns an
/// independent 64-bit Mersenne Twister, seeded through seed_seq so that
/// neighbouring ids do not produce correlated states.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  /// Vector of `n` independent U[0,1) draws, drawn in index order.
  Vector uniform_vector(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline RandomStream seeded_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return RandomStream(seed, stream_id);
}

/// Fixed-capacity record of a particle's most recent assigned fitness values.
class FitnessHistory {
 public:
  static constexpr std::size_t kCapacity = 3;

  void push(double fitness);
  std::size_t size() const { return values_.size(); }
  bool full() const { return values_.size() == kCapacity; }
  double mean() const;
  const std::deque<double>& values() const { return values_; }

 private:
  std::deque<double> values_;
};

struct Particle {
  Vector position;
  Vector velocity;
  double fitness = 0.0;
  bool fitness_is_true = true;
  Vector pbest_position;
  double pbest_fitness = 0.0;
  FitnessHistory history;
};

struct SwarmState {
  int swarm_id = 0;
  std::vector<Particle> particles;
  Vector gbest_position;
  double gbest_fitness = 0.0;
  long generation = 0;
  long evals = 0;
  long true_eval_count = 0;
  long verification_eval_count = 0;
  long surrogate_call_count = 0;
};

enum class ProblemKind { spherical, rosenbrock, ackley, rastrigin, external };

std::string to_string(ProblemKind kind);
ProblemKind problem_from_string(const std::string& name);

/// Network and optimizer settings for the surrogate.
struct SurrogateConfig {
  int hidden1 = 0;  ///< 0 selects max(D, 20)
  int hidden2 = 0;  ///< 0 selects max(ceil(D/2), 10)
  int epochs = 150;        ///< used when the network starts from fresh weights
  int warm_epochs = 20;    ///< used when continuing from the previous snapshot
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t dataset_cap = 0;  ///< 0 disables eviction
};

struct RunConfig {
  ProblemKind problem = ProblemKind::spherical;
  int dim = 30;
  Bounds bounds;
  int swarms = 8;
  int pop_size = 20;
  double alpha = 0.729;
  double c1 = 1.4;
  double c2 = 1.4;
  int psi = 10;
  int phi = 5;
  double beta = 0.9;
  double s_prob = 0.0;
  long t_max = 10000;
  double exchange_fraction = 0.2;
  double delay = 0.0;
  std::uint64_t seed = 1;
  int num_runs = 1;

  double pseudo_weight = 0.5;  ///< weight of the surrogate estimate in the blend
  double vmax_fraction = 0.25;
  SurrogateConfig surrogate;

  // external model
  std::vector<std::string> model_command;
  double model_timeout = 300.0;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  Vector vmax() const { return vmax_fraction * bounds.width(); }
  int emigrant_count() const;
};

}  // namespace sdpso
