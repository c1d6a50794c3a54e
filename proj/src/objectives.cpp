#include "sdpso/objectives.hpp"

#include <chrono>
#include <thread>

namespace sdpso {

Bounds default_bounds(ProblemKind kind, int dim) {
  switch (kind) {
    case ProblemKind::spherical:
    case ProblemKind::rastrigin: return Bounds::uniform(dim, -5.12, 5.12);
    case ProblemKind::ackley: return Bounds::uniform(dim, -32.768, 32.768);
    case ProblemKind::rosenbrock: return Bounds::uniform(dim, -2.048, 2.048);
    case ProblemKind::external: break;
  }
  throw ConfigError("bounds: external problems have no default bounds");
}

Objective make_benchmark(ProblemKind kind, int dim) {
  return make_benchmark(kind, dim, default_bounds(kind, dim));
}

Objective make_benchmark(ProblemKind kind, int dim, Bounds bounds) {
  if (bounds.dim() != dim) throw ConfigError("bounds: dimension must equal dim");
  Objective obj;
  obj.name = to_string(kind);
  obj.dim = dim;
  obj.bounds = std::move(bounds);
  switch (kind) {
    case ProblemKind::spherical:
      obj.evaluate = [](const Vector& x) { return eval_spherical(x); };
      break;
    case ProblemKind::rosenbrock:
      if (dim < 2) throw ConfigError("dim: rosenbrock requires dim >= 2");
      obj.evaluate = [](const Vector& x) { return eval_rosenbrock(x); };
      break;
    case ProblemKind::ackley:
      obj.evaluate = [](const Vector& x) { return eval_ackley(x); };
      break;
    case ProblemKind::rastrigin:
      obj.evaluate = [](const Vector& x) { return eval_rastrigin(x); };
      break;
    case ProblemKind::external:
      throw ConfigError("problem: external objectives are created through extmodel");
  }
  return obj;
}

Objective with_delay(Objective objective, double delay) {
  if (!(delay >= 0.0)) throw ConfigError("delay: must be >= 0");
  if (delay == 0.0) return objective;
  auto inner = std::move(objective.evaluate);
  const auto pause = std::chrono::duration<double>(delay);
  objective.evaluate = [inner = std::move(inner), pause](const Vector& x) {
    std::this_thread::sleep_for(pause);
    return inner(x);
  };
  objective.delay += delay;
  return objective;
}

}  // namespace sdpso
