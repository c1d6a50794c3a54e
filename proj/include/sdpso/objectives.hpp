#pragma once

#include "sdpso/domain.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace sdpso {

// Benchmark functions. All are minimised with optimum value 0.

template <typename Derived>
typename Derived::Scalar eval_spherical(const Eigen::MatrixBase<Derived>& x) {
  return x.squaredNorm();
}

/// Rosenbrock valley with a = 1, b = 100.
template <typename Derived>
typename Derived::Scalar eval_rosenbrock(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  if (n < 2) throw ConfigError("rosenbrock: dimension must be >= 2");
  const auto head = x.head(n - 1).array();
  const auto tail = x.tail(n - 1).array();
  return (Scalar(100) * (tail - head.square()).square() + (Scalar(1) - head).square()).sum();
}

/// Ackley with a = 20, b = 0.2, c = 2*pi.
template <typename Derived>
typename Derived::Scalar eval_ackley(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar a(20), b(0.2), c(2 * std::numbers::pi);
  const Scalar n = static_cast<Scalar>(x.size());
  const Scalar mean_sq = x.squaredNorm() / n;
  const Scalar mean_cos = (c * x.array()).cos().sum() / n;
  return -a * std::exp(-b * std::sqrt(mean_sq)) - std::exp(mean_cos) + a + std::numbers::e_v<Scalar>;
}

template <typename Derived>
typename Derived::Scalar eval_rastrigin(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar two_pi(2 * std::numbers::pi);
  return Scalar(10) * static_cast<Scalar>(x.size()) +
         (x.array().square() - Scalar(10) * (two_pi * x.array()).cos()).sum();
}

/// A fitness function with its domain. `evaluate` must be deterministic and
/// safe to call concurrently unless the objective is bound to one worker.
struct Objective {
  std::string name;
  int dim = 0;
  Bounds bounds;
  std::function<double(const Vector&)> evaluate;
  double delay = 0.0;

  double operator()(const Vector& x) const { return evaluate(x); }
};

/// Default search box for a benchmark problem.
Bounds default_bounds(ProblemKind kind, int dim);

/// Benchmark objective of the given kind without delay.
Objective make_benchmark(ProblemKind kind, int dim);
Objective make_benchmark(ProblemKind kind, int dim, Bounds bounds);

/// Wraps `objective` so that each evaluation first sleeps `delay` seconds of
/// wall time. The returned fitness is the wrapped objective's value.
Objective with_delay(Objective objective, double delay);

}  // namespace sdpso
