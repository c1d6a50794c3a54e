#pragma once

#include "sdpso/domain.hpp"
#include "sdpso/mlp.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace sdpso {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An evaluated position. `true_fitness` is false for surrogate-derived values,
/// which the training set refuses.
struct Sample {
  Vector position;
  double fitness = 0.0;
  int swarm_id = 0;
  long generation = 0;
  bool true_fitness = true;
};

/// Accumulated (position, true fitness) pairs from every swarm.
class TrainingDataset {
 public:
  TrainingDataset() = default;
  TrainingDataset(Bounds bounds, std::size_t cap = 0) : bounds_(std::move(bounds)), cap_(cap) {}

  /// Appends in order. Throws DataError for out-of-bounds inputs or samples
  /// without true-fitness provenance; nothing is appended in that case.
  void append(const std::vector<Sample>& samples);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const Bounds& bounds() const { return bounds_; }

  Eigen::MatrixXd inputs() const;    ///< D x N
  Eigen::VectorXd targets() const;   ///< N

 private:
  Bounds bounds_;
  std::size_t cap_ = 0;
  std::vector<Sample> samples_;
};

inline void append_samples(TrainingDataset& dataset, const std::vector<Sample>& samples) { dataset.append(samples); }

/// Immutable trained network with the normalisation it was trained under.
struct SurrogateSnapshot {
  MlpParameters<double> params;
  Vector input_lo;
  Vector input_hi;
  double target_min = 0.0;
  double target_max = 1.0;
  long version = 0;
  double train_rmse = 0.0;
  std::size_t sample_count = 0;
  std::vector<double> epoch_loss;  ///< normalised full-dataset MSE after each epoch

  bool trained() const { return version >= 1; }

  /// Inputs map linearly from [lo, hi] onto [-1, 1].
  Vector normalize_input(const Vector& x) const;
  double normalize_target(double f) const { return (f - target_min) / target_span(); }
  double denormalize_target(double y) const { return target_min + y * target_span(); }
  double target_span() const { return target_max > target_min ? target_max - target_min : 1.0; }
};

/// Raw network output for `x` in normalised target space.
double forward(const SurrogateSnapshot& snapshot, const Vector& x);

/// Surrogate estimate in original fitness units. Requires a trained snapshot.
double predict_pseudo_fitness(const SurrogateSnapshot& snapshot, const Vector& x);

/// Resolved (h1, h2) for a D-dimensional problem: configured sizes, or (D, ceil(D/2)).
std::pair<int, int> hidden_layer_sizes(const SurrogateConfig& config, int dim);

/// Fits the network to the full dataset with mini-batch Adam on normalised MSE.
/// Warm-starts from `previous` when it has the same architecture; the returned
/// snapshot has version previous->version + 1 (or 1).
SurrogateSnapshot train(const TrainingDataset& dataset, const SurrogateSnapshot* previous,
                        const SurrogateConfig& config, RandomStream& stream);

/// sqrt(mean((true - pseudo)^2)); nullopt for an empty list.
std::optional<double> prediction_rmse(const std::vector<std::pair<double, double>>& true_pseudo_pairs);

void save_snapshot(const SurrogateSnapshot& snapshot, std::ostream& out);
SurrogateSnapshot load_snapshot(std::istream& in);
void save_snapshot(const SurrogateSnapshot& snapshot, const std::filesystem::path& path);
SurrogateSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace sdpso
