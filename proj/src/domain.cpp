#include "sdpso/domain.hpp"

#include <cmath>
#include <numeric>

namespace sdpso {

Bounds::Bounds(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) {
    throw ConfigError("bounds: lo has " + std::to_string(lo.size()) + " entries, hi has " +
                      std::to_string(hi.size()));
  }
  if (lo.size() < 1) throw ConfigError("bounds: dimension must be >= 1");
  for (Eigen::Index d = 0; d < lo.size(); ++d) {
    if (!(lo[d] < hi[d])) {
      throw ConfigError("bounds: lo[" + std::to_string(d) + "] must be < hi[" + std::to_string(d) + "]");
    }
  }
}

Bounds Bounds::uniform(Eigen::Index dim, double lo, double hi) {
  return Bounds(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Bounds::contains(const Vector& x) const {
  return x.size() == dim() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                    0x5d9f3bu};
  engine_.seed(seq);
}

std::size_t RandomStream::index(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

Vector RandomStream::uniform_vector(Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform();
  return v;
}

void FitnessHistory::push(double fitness) {
  values_.push_back(fitness);
  if (values_.size() > kCapacity) values_.pop_front();
}

double FitnessHistory::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::spherical: return "spherical";
    case ProblemKind::rosenbrock: return "rosenbrock";
    case ProblemKind::ackley: return "ackley";
    case ProblemKind::rastrigin: return "rastrigin";
    case ProblemKind::external: return "external";
  }
  return "unknown";
}

ProblemKind problem_from_string(const std::string& name) {
  if (name == "spherical" || name == "sphere") return ProblemKind::spherical;
  if (name == "rosenbrock") return ProblemKind::rosenbrock;
  if (name == "ackley") return ProblemKind::ackley;
  if (name == "rastrigin") return ProblemKind::rastrigin;
  if (name == "external") return ProblemKind::external;
  throw ConfigError("problem: unknown objective '" + name + "'");
}

int RunConfig::emigrant_count() const {
  return static_cast<int>(std::floor(exchange_fraction * pop_size + 1e-9));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw ConfigError(field + ": " + rule);
  };
  if (dim < 1) fail("dim", "must be >= 1");
  if (problem == ProblemKind::rosenbrock && dim < 2) fail("dim", "rosenbrock requires dim >= 2");
  if (bounds.dim() != dim) fail("bounds", "dimension must equal dim (" + std::to_string(dim) + ")");
  if (swarms < 1) fail("swarms", "must be >= 1");
  if (pop_size < 2) fail("pop_size", "must be >= 2");
  if (psi < 3) fail("psi", "must be >= 3");
  if (phi < 1) fail("phi", "must be >= 1");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("beta", "must be in [0, 1]");
  if (!(s_prob >= 0.0 && s_prob <= 1.0)) fail("s_prob", "must be in [0, 1]");
  if (t_max < pop_size) fail("t_max", "must be >= pop_size");
  if (!(exchange_fraction > 0.0 && exchange_fraction <= 0.5)) fail("exchange_fraction", "must be in (0, 0.5]");
  if (!(delay >= 0.0)) fail("delay", "must be >= 0");
  if (num_runs < 1) fail("num_runs", "must be >= 1");
  if (!(pseudo_weight >= 0.0 && pseudo_weight <= 1.0)) fail("pseudo_weight", "must be in [0, 1]");
  if (!(vmax_fraction > 0.0)) fail("vmax_fraction", "must be > 0");
  if (!std::isfinite(alpha) || !std::isfinite(c1) || !std::isfinite(c2)) fail("alpha/c1/c2", "must be finite");
  if (surrogate.epochs < 1) fail("epochs", "must be >= 1");
  if (surrogate.warm_epochs < 1) fail("warm_epochs", "must be >= 1");
  if (surrogate.batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(surrogate.learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (surrogate.hidden1 < 0 || surrogate.hidden2 < 0) fail("hidden1/hidden2", "must be >= 0");
  if (problem == ProblemKind::external && model_command.empty()) fail("model_command", "required for external problem");
  if (!(model_timeout > 0.0)) fail("model_timeout", "must be > 0");
}

}  // namespace sdpso
