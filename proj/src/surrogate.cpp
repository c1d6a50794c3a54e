#include "sdpso/surrogate.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace sdpso {

void TrainingDataset::append(const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    if (!s.true_fitness) {
      throw DataError("training dataset: sample from swarm " + std::to_string(s.swarm_id) + " generation " +
                      std::to_string(s.generation) + " carries pseudo-fitness");
    }
    if (!bounds_.contains(s.position)) {
      throw DataError("training dataset: sample from swarm " + std::to_string(s.swarm_id) + " is outside bounds");
    }
    if (!std::isfinite(s.fitness)) throw DataError("training dataset: non-finite fitness");
  }
  samples_.insert(samples_.end(), samples.begin(), samples.end());
  if (cap_ > 0 && samples_.size() > cap_) {
    samples_.erase(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(samples_.size() - cap_));
  }
}

Eigen::MatrixXd TrainingDataset::inputs() const {
  Eigen::MatrixXd xs(bounds_.dim(), static_cast<Eigen::Index>(samples_.size()));
  for (std::size_t i = 0; i < samples_.size(); ++i) xs.col(static_cast<Eigen::Index>(i)) = samples_[i].position;
  return xs;
}

Eigen::VectorXd TrainingDataset::targets() const {
  Eigen::VectorXd ys(static_cast<Eigen::Index>(samples_.size()));
  for (std::size_t i = 0; i < samples_.size(); ++i) ys[static_cast<Eigen::Index>(i)] = samples_[i].fitness;
  return ys;
}

Vector SurrogateSnapshot::normalize_input(const Vector& x) const {
  return (2.0 * (x - input_lo).array() / (input_hi - input_lo).array() - 1.0).matrix();
}

double forward(const SurrogateSnapshot& snapshot, const Vector& x) {
  if (x.size() != snapshot.params.inputs()) throw ConfigError("surrogate forward: input dimension mismatch");
  return mlp_forward(snapshot.params, snapshot.normalize_input(x));
}

double predict_pseudo_fitness(const SurrogateSnapshot& snapshot, const Vector& x) {
  if (!snapshot.trained()) throw std::logic_error("predict_pseudo_fitness: surrogate has not been trained");
  return snapshot.denormalize_target(forward(snapshot, x));
}

std::pair<int, int> hidden_layer_sizes(const SurrogateConfig& config, int dim) {
  return {config.hidden1 > 0 ? config.hidden1 : std::max(dim, 20),
          config.hidden2 > 0 ? config.hidden2 : std::max((dim + 1) / 2, 10)};
}

SurrogateSnapshot train(const TrainingDataset& dataset, const SurrogateSnapshot* previous,
                        const SurrogateConfig& config, RandomStream& stream) {
  if (dataset.empty()) throw TrainingError("train: dataset is empty");
  const auto& bounds = dataset.bounds();
  const int dim = static_cast<int>(bounds.dim());
  const auto [h1, h2] = hidden_layer_sizes(config, dim);

  SurrogateSnapshot snap;
  snap.input_lo = bounds.lo;
  snap.input_hi = bounds.hi;
  const Eigen::VectorXd raw_targets = dataset.targets();
  snap.target_min = raw_targets.minCoeff();
  snap.target_max = raw_targets.maxCoeff();
  snap.version = previous ? previous->version + 1 : 1;
  snap.sample_count = dataset.size();

  const auto shape = MlpParameters<double>::zeros(dim, h1, h2);
  const bool warm = previous && previous->params.same_shape(shape);
  if (warm) {
    snap.params = previous->params;
  } else {
    snap.params = MlpParameters<double>::glorot(dim, h1, h2, stream);
  }

  Eigen::MatrixXd xs = dataset.inputs();
  for (Eigen::Index j = 0; j < xs.cols(); ++j) xs.col(j) = snap.normalize_input(xs.col(j));
  const Eigen::VectorXd ys = (raw_targets.array() - snap.target_min) / snap.target_span();
  if (!warm) {
    // Start the output layer at the mean target: constant data is then an exact fixed point and
    // early epochs are not spent learning the offset.
    snap.params.w3.setZero();
    snap.params.b3 = ys.mean();
  }
  const Eigen::Index n = xs.cols();
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);

  AdamOptimizer<double> adam(snap.params.size(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
  Eigen::VectorXd flat = snap.params.flatten();
  MlpParameters<double> grad = shape;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd bx(dim, batch);
  Eigen::VectorXd by(batch);

  // A warm start only has to absorb the samples added since the last round.
  const int epochs = warm ? config.warm_epochs : config.epochs;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[stream.index(i)]);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      for (Eigen::Index k = 0; k < len; ++k) {
        bx.col(k) = xs.col(order[static_cast<std::size_t>(start + k)]);
        by[k] = ys[order[static_cast<std::size_t>(start + k)]];
      }
      const double loss = mlp_mse_gradient(snap.params, bx.leftCols(len), by.head(len), grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + " (dataset size " +
                            std::to_string(n) + ")");
      }
      adam.update(flat, grad.flatten());
      snap.params.assign(flat);
    }
    const Eigen::RowVectorXd out = mlp_forward_batch(snap.params, xs);
    const double mse = (out.transpose() - ys).squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(mse)) throw TrainingError("train: non-finite loss after epoch " + std::to_string(epoch));
    snap.epoch_loss.push_back(mse);
  }

  const Eigen::RowVectorXd out = mlp_forward_batch(snap.params, xs);
  const Eigen::VectorXd predicted = snap.target_min + out.transpose().array() * snap.target_span();
  snap.train_rmse = std::sqrt((predicted - raw_targets).squaredNorm() / static_cast<double>(n));
  return snap;
}

std::optional<double> prediction_rmse(const std::vector<std::pair<double, double>>& true_pseudo_pairs) {
  if (true_pseudo_pairs.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [f, f_hat] : true_pseudo_pairs) sum += (f - f_hat) * (f - f_hat);
  return std::sqrt(sum / static_cast<double>(true_pseudo_pairs.size()));
}

namespace {

constexpr const char* kMagic = "sdpso-surrogate-v1";

void write_values(std::ostream& out, const char* key, const Eigen::VectorXd& v) {
  out << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v[i];
  out << '\n';
}

Eigen::VectorXd read_values(std::istream& in, const char* key) {
  std::string tag;
  Eigen::Index n = 0;
  if (!(in >> tag >> n) || tag != key || n < 0) throw DataError(std::string("snapshot: expected '") + key + "'");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in >> v[i])) throw DataError(std::string("snapshot: truncated '") + key + "'");
  }
  return v;
}

template <typename T>
T read_field(std::istream& in, const char* key) {
  std::string tag;
  T value{};
  if (!(in >> tag >> value) || tag != key) throw DataError(std::string("snapshot: expected '") + key + "'");
  return value;
}

}  // namespace

void save_snapshot(const SurrogateSnapshot& snapshot, std::ostream& out) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << kMagic << '\n';
  out << "version " << snapshot.version << '\n';
  out << "layers " << snapshot.params.inputs() << ' ' << snapshot.params.hidden1() << ' '
      << snapshot.params.hidden2() << " 1\n";
  out << "sample_count " << snapshot.sample_count << '\n';
  out << "train_rmse " << snapshot.train_rmse << '\n';
  out << "target_min " << snapshot.target_min << '\n';
  out << "target_max " << snapshot.target_max << '\n';
  write_values(out, "input_lo", snapshot.input_lo);
  write_values(out, "input_hi", snapshot.input_hi);
  write_values(out, "params", snapshot.params.flatten());
  out.precision(old_precision);
}

SurrogateSnapshot load_snapshot(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != kMagic) throw DataError("snapshot: bad header");
  SurrogateSnapshot snap;
  snap.version = read_field<long>(in, "version");
  std::string tag;
  Eigen::Index d = 0, h1 = 0, h2 = 0, out_units = 0;
  if (!(in >> tag >> d >> h1 >> h2 >> out_units) || tag != "layers" || out_units != 1 || d < 1 || h1 < 1 || h2 < 1) {
    throw DataError("snapshot: bad layer sizes");
  }
  snap.sample_count = read_field<std::size_t>(in, "sample_count");
  snap.train_rmse = read_field<double>(in, "train_rmse");
  snap.target_min = read_field<double>(in, "target_min");
  snap.target_max = read_field<double>(in, "target_max");
  snap.input_lo = read_values(in, "input_lo");
  snap.input_hi = read_values(in, "input_hi");
  if (snap.input_lo.size() != d || snap.input_hi.size() != d) throw DataError("snapshot: normalisation size mismatch");
  snap.params = MlpParameters<double>::zeros(d, h1, h2);
  const Eigen::VectorXd flat = read_values(in, "params");
  if (flat.size() != snap.params.size()) throw DataError("snapshot: parameter count does not match layer sizes");
  snap.params.assign(flat);
  return snap;
}

void save_snapshot(const SurrogateSnapshot& snapshot, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write snapshot " + path.string());
  save_snapshot(snapshot, out);
}

SurrogateSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open snapshot " + path.string());
  return load_snapshot(in);
}

}  // namespace sdpso
