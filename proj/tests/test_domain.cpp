#include "sdpso/domain.hpp"

#include <doctest.h>

using namespace sdpso;

TEST_CASE("clamp_to_bounds") {
  SUBCASE("interior point unchanged") {
    Vector x(1);
    x << 0.5;
    CHECK(clamp_to_bounds(x, Bounds::uniform(1, 0, 1))[0] == 0.5);
  }
  SUBCASE("clamps to nearest bound") {
    Vector x(2);
    x << 1.7, -2.0;
    const Vector c = clamp_to_bounds(x, Bounds::uniform(2, 0, 1));
    CHECK(c[0] == 1.0);
    CHECK(c[1] == 0.0);
  }
  SUBCASE("rainfall-style box") {
    Vector lo(1), hi(1), x(1);
    lo << 0.0;
    hi << 3.0;
    x << 3.2;
    CHECK(clamp_to_bounds(x, Bounds(lo, hi))[0] == 3.0);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(clamp_to_bounds(Vector::Zero(3), Bounds::uniform(2, 0, 1)), ConfigError);
  }
  SUBCASE("idempotent") {
    RandomStream rng(7, 0);
    const Bounds b = Bounds::uniform(5, -1, 2);
    for (int trial = 0; trial < 200; ++trial) {
      const Vector x = (rng.uniform_vector(5).array() * 10 - 5).matrix();
      const Vector once = clamp_to_bounds(x, b);
      CHECK(clamp_to_bounds(once, b) == once);
      CHECK(b.contains(once));
    }
  }
}

TEST_CASE("bounds invariants") {
  CHECK_THROWS_AS(Bounds(Vector::Zero(2), Vector::Ones(3)), ConfigError);
  CHECK_THROWS_AS(Bounds(Vector::Ones(2), Vector::Ones(2)), ConfigError);
  CHECK_THROWS_AS(Bounds(Vector(0), Vector(0)), ConfigError);
  CHECK(Bounds::uniform(3, -1, 1).width() == Vector::Constant(3, 2.0));
}

TEST_CASE("seeded_stream") {
  SUBCASE("identical seed and id give identical draws") {
    RandomStream a = seeded_stream(42, 0), b = seeded_stream(42, 0);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  }
  SUBCASE("distinct ids differ") {
    RandomStream a = seeded_stream(42, 0), b = seeded_stream(42, 1);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a.uniform() == b.uniform();
    CHECK(same == 0);
  }
  SUBCASE("uniform mean") {
    RandomStream a = seeded_stream(42, 0);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const double u = a.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / 100000 - 0.5) < 0.01);
  }
  SUBCASE("index stays in range") {
    RandomStream a = seeded_stream(3, 3);
    for (int i = 0; i < 1000; ++i) CHECK(a.index(7) < 7u);
  }
}

TEST_CASE("fitness history keeps the last three values") {
  FitnessHistory h;
  h.push(1);
  h.push(2);
  CHECK_FALSE(h.full());
  h.push(3);
  h.push(4);
  CHECK(h.full());
  CHECK(h.size() == 3);
  CHECK(h.values().front() == 2);
  CHECK(h.mean() == doctest::Approx(3.0));
}

TEST_CASE("RunConfig validation") {
  RunConfig c;
  c.dim = 4;
  c.bounds = Bounds::uniform(4, -1, 1);
  CHECK_NOTHROW(c.validate());

  auto rejects = [&](auto mutate, const char* field) {
    RunConfig bad = c;
    mutate(bad);
    try {
      bad.validate();
      FAIL("expected rejection of " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  rejects([](RunConfig& r) { r.psi = 2; }, "psi");
  rejects([](RunConfig& r) { r.phi = 0; }, "phi");
  rejects([](RunConfig& r) { r.swarms = 0; }, "swarms");
  rejects([](RunConfig& r) { r.pop_size = 1; }, "pop_size");
  rejects([](RunConfig& r) { r.s_prob = 1.3; }, "s_prob");
  rejects([](RunConfig& r) { r.beta = -0.1; }, "beta");
  rejects([](RunConfig& r) { r.exchange_fraction = 0.6; }, "exchange_fraction");
  rejects([](RunConfig& r) { r.delay = -1; }, "delay");
  rejects([](RunConfig& r) { r.bounds = Bounds::uniform(3, -1, 1); }, "bounds");
  rejects([](RunConfig& r) { r.problem = ProblemKind::external; }, "model_command");

  CHECK(c.emigrant_count() == 4);
  c.pop_size = 10;
  CHECK(c.emigrant_count() == 2);
  c.pop_size = 7;
  CHECK(c.emigrant_count() == 1);
}

TEST_CASE("problem names round-trip") {
  for (auto k : {ProblemKind::spherical, ProblemKind::rosenbrock, ProblemKind::ackley, ProblemKind::rastrigin,
                 ProblemKind::external}) {
    CHECK(problem_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(problem_from_string("griewank"), ConfigError);
}
