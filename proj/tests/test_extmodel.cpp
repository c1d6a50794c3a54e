#include <functional>
#include <optional>
#include "sdpso/extmodel.hpp"
#include "sdpso/objectives.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <csignal>
#include <thread>

using namespace sdpso;

namespace {

EndpointSpec stub_spec(int dim, std::vector<std::string> extra = {}, double timeout = 5.0) {
  EndpointSpec spec;
  spec.command = {SDPSO_MODEL_DOUBLE};
  spec.command.insert(spec.command.end(), extra.begin(), extra.end());
  spec.dim = dim;
  spec.bounds = Bounds::uniform(dim, -5.12, 5.12);
  spec.timeout = timeout;
  spec.shutdown_timeout = 1.0;
  return spec;
}

ExtModelError::Kind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const ExtModelError& e) {
    return e.kind();
  }
  FAIL("expected ExtModelError");
  return ExtModelError::Kind::closed;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

}  // namespace

TEST_CASE("spawn") {
  SUBCASE("stub with D=6 becomes ready") {
    auto ep = spawn(stub_spec(6));
    CHECK(ep->state() == EndpointState::ready);
    CHECK(ep->pid() > 0);
    shutdown(*ep);
  }
  SUBCASE("declared dimension mismatch") {
    CHECK(error_kind([] { spawn(stub_spec(6, {"--dim", "5"})); }) == ExtModelError::Kind::dimension_mismatch);
  }
  SUBCASE("nonexistent command") {
    EndpointSpec spec = stub_spec(2);
    spec.command = {"/nonexistent/sdpso-model"};
    CHECK(error_kind([&] { spawn(spec); }) == ExtModelError::Kind::launch);
    spec.command.clear();
    CHECK(error_kind([&] { spawn(spec); }) == ExtModelError::Kind::launch);
  }
  SUBCASE("child that dies before the handshake") {
    EndpointSpec spec = stub_spec(2);
    spec.command = {"/bin/sh", "-c", "exit 0"};
    CHECK(error_kind([&] { spawn(spec); }) == ExtModelError::Kind::handshake);
  }
  SUBCASE("bounds must match dim") {
    EndpointSpec spec = stub_spec(2);
    spec.bounds = Bounds::uniform(3, -1, 1);
    CHECK_THROWS_AS(spawn(spec), ConfigError);
  }
}

TEST_CASE("evaluate_remote") {
  SUBCASE("quadratic stub at [1, 2] is 5") {
    auto ep = spawn(stub_spec(2));
    CHECK(evaluate_remote(*ep, vec({1, 2})) == 5.0);
    CHECK(ep->requests_sent() == 1);
  }
  SUBCASE("100 random vectors match eval_spherical") {
    auto ep = spawn(stub_spec(7));
    RandomStream rng(31, 0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vector x = ep->spec().bounds.lo + rng.uniform_vector(7).cwiseProduct(ep->spec().bounds.width());
      worst = std::max(worst, std::abs(evaluate_remote(*ep, x) - eval_spherical(x)));
    }
    CHECK(worst <= 1e-9);
    CHECK(ep->requests_sent() == 100);
  }
  SUBCASE("slow model takes at least its sleep") {
    auto ep = spawn(stub_spec(2, {"--sleep", "0.2"}));
    const auto t0 = std::chrono::steady_clock::now();
    evaluate_remote(*ep, vec({0.5, 0.5}));
    CHECK(seconds_since(t0) >= 0.2);
  }
  SUBCASE("aux object is passed through") {
    auto ep = spawn(stub_spec(2, {"--aux"}));
    std::string aux;
    CHECK(ep->evaluate(vec({1, 1}), &aux) == 2.0);
    CHECK(aux.find("f_topo") != std::string::npos);
    auto plain = spawn(stub_spec(2));
    plain->evaluate(vec({1, 1}), &aux);
    CHECK(aux.empty());
  }
  SUBCASE("input validation") {
    auto ep = spawn(stub_spec(2));
    CHECK_THROWS_AS(ep->evaluate(vec({1, 2, 3})), ConfigError);
    CHECK_THROWS_AS(ep->evaluate(vec({1, 100})), ConfigError);
    CHECK(ep->state() == EndpointState::ready);
  }
}

TEST_CASE("fault injection surfaces typed errors") {
  const auto t0 = std::chrono::steady_clock::now();
  SUBCASE("model exits mid-run") {
    auto ep = spawn(stub_spec(2, {"--exit-after", "2"}));
    ep->evaluate(vec({1, 0}));
    ep->evaluate(vec({0, 1}));
    CHECK(error_kind([&] { ep->evaluate(vec({1, 1})); }) == ExtModelError::Kind::child_exited);
    CHECK(ep->state() == EndpointState::failed);
    CHECK(error_kind([&] { ep->evaluate(vec({1, 1})); }) == ExtModelError::Kind::closed);
  }
  SUBCASE("model killed externally") {
    auto ep = spawn(stub_spec(2));
    ep->evaluate(vec({1, 0}));
    ::kill(ep->pid(), SIGKILL);
    CHECK(error_kind([&] { ep->evaluate(vec({1, 1})); }) == ExtModelError::Kind::child_exited);
  }
  SUBCASE("model stops answering") {
    auto ep = spawn(stub_spec(2, {"--hang-after", "1"}, 0.3));
    ep->evaluate(vec({1, 0}));
    const auto t1 = std::chrono::steady_clock::now();
    CHECK(error_kind([&] { ep->evaluate(vec({1, 1})); }) == ExtModelError::Kind::timeout);
    CHECK(seconds_since(t1) >= 0.3);
    CHECK(seconds_since(t1) < 2.0);
  }
  SUBCASE("malformed reply") {
    auto ep = spawn(stub_spec(2, {"--garbage-after", "0"}));
    CHECK(error_kind([&] { ep->evaluate(vec({1, 1})); }) == ExtModelError::Kind::protocol);
  }
  SUBCASE("mismatched reply id") {
    auto ep = spawn(stub_spec(2, {"--wrong-id"}));
    CHECK(error_kind([&] { ep->evaluate(vec({1, 1})); }) == ExtModelError::Kind::protocol);
  }
  CHECK(seconds_since(t0) < 5.0);
}

TEST_CASE("shutdown") {
  SUBCASE("after zero evaluations") {
    auto ep = spawn(stub_spec(3));
    const pid_t pid = ep->pid();
    shutdown(*ep);
    CHECK(ep->state() == EndpointState::closed);
    CHECK_FALSE(ep->forced_termination());
    CHECK(::waitpid(pid, nullptr, WNOHANG) < 0);  // already reaped
  }
  SUBCASE("twice is a no-op") {
    auto ep = spawn(stub_spec(3));
    shutdown(*ep);
    shutdown(*ep);
    CHECK(ep->state() == EndpointState::closed);
    CHECK(error_kind([&] { ep->evaluate(Vector::Zero(3)); }) == ExtModelError::Kind::closed);
  }
  SUBCASE("aborts an in-flight request") {
    auto ep = spawn(stub_spec(2, {"--sleep", "3"}, 10.0));
    std::optional<ExtModelError::Kind> seen;
    std::thread worker([&] {
      try {
        ep->evaluate(vec({1, 1}));
      } catch (const ExtModelError& e) {
        seen = e.kind();
      }
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto t0 = std::chrono::steady_clock::now();
    ep->shutdown();
    worker.join();
    REQUIRE(seen.has_value());
    CHECK(*seen == ExtModelError::Kind::aborted);
    CHECK(ep->state() == EndpointState::closed);
    CHECK(seconds_since(t0) < 3.0);
  }
  SUBCASE("unresponsive child is killed") {
    auto ep = spawn(stub_spec(2, {"--ignore-bye"}));
    ep->evaluate(vec({1, 1}));
    ep->shutdown();
    CHECK(ep->forced_termination());
    CHECK(ep->state() == EndpointState::closed);
  }
}

TEST_CASE("request ids pair exactly over interleaved endpoints") {
  auto a = spawn(stub_spec(2));
  auto b = spawn(stub_spec(2));
  RandomStream rng(8, 0);
  for (int k = 0; k < 30; ++k) {
    auto& ep = rng.uniform() < 0.5 ? *a : *b;
    const Vector x = rng.uniform_vector(2);
    CHECK(ep.evaluate(x) == doctest::Approx(eval_spherical(x)).epsilon(1e-15));
  }
  CHECK(a->requests_sent() + b->requests_sent() == 30);
}

TEST_CASE("external objective") {
  auto ep = spawn(stub_spec(4));
  const Objective obj = make_external_objective(ep, "stub");
  CHECK(obj.dim == 4);
  CHECK(obj.name == "stub");
  const Vector x = Vector::Constant(4, 0.5);
  CHECK(obj(x) == 1.0);
  ep.reset();
  CHECK(obj(x) == 1.0);  // the objective keeps the endpoint alive
}
