#include "sdpso/experiment.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

using namespace sdpso;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sdpso_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small(int swarms, double s_prob, long t_max = 400) {
  return config_from_settings({{"problem", "spherical"},
                               {"dim", "3"},
                               {"swarms", std::to_string(swarms)},
                               {"pop_size", "10"},
                               {"t_max", std::to_string(t_max)},
                               {"s_prob", std::to_string(s_prob)},
                               {"epochs", "10"},
                               {"num_runs", "3"},
                               {"seed", "5"}});
}

}  // namespace

TEST_CASE("parse_config") {
  TempDir tmp("parse");
  SUBCASE("distributed configuration with the usual coefficients") {
    const auto path = write_file(tmp.path / "dpso.cfg",
                                 "# D-PSO on Rastrigin\n"
                                 "mode = dpso\n"
                                 "problem = rastrigin   # benchmark\n"
                                 "dim = 30\n"
                                 "swarms = 8\npop_size = 20\nalpha = 0.729\nc1 = 1.4\nc2 = 1.4\n\n");
    const RunConfig c = parse_config(path);
    CHECK(c.swarms == 8);
    CHECK(c.pop_size == 20);
    CHECK(c.alpha == 0.729);
    CHECK(c.c1 == 1.4);
    CHECK(c.c2 == 1.4);
    CHECK(c.s_prob == 0.0);
    CHECK(c.problem == ProblemKind::rastrigin);
    CHECK(c.bounds.hi[0] == 5.12);
    CHECK(method_name(c) == "D-PSO");
  }
  SUBCASE("overrides apply after the file") {
    const auto path = write_file(tmp.path / "base.cfg", "dim = 4\ns_prob = 0.25\n");
    const RunConfig c = parse_config(path, {"s_prob=0.5", "lo = -1", "hi=1,2,3,4"});
    CHECK(c.s_prob == 0.5);
    CHECK(c.bounds.lo == Vector::Constant(4, -1));
    CHECK(c.bounds.hi[3] == 4.0);
    CHECK(method_name(c) == "SD-PSO(0.5)");
  }
  SUBCASE("pso mode collapses to a single swarm") {
    const RunConfig c = config_from_settings({{"mode", "pso"}, {"swarms", "8"}, {"s_prob", "0.5"}});
    CHECK(c.swarms == 1);
    CHECK(c.beta == 0.0);
    CHECK(c.s_prob == 0.0);
    CHECK(method_name(c) == "PSO");
  }
  SUBCASE("rejections name the field") {
    auto message = [](std::vector<std::pair<std::string, std::string>> s) {
      try {
        config_from_settings(s);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("accepted");
    };
    CHECK(message({{"psi", "2"}}).find("psi") != std::string::npos);
    CHECK(message({{"s_prob", "1.3"}}).find("s_prob") != std::string::npos);
    CHECK(message({{"swarmz", "3"}}).find("swarmz") != std::string::npos);
    CHECK(message({{"dim", "three"}}).find("dim") != std::string::npos);
    CHECK(message({{"mode", "sdpso"}}).find("s_prob") != std::string::npos);
    CHECK(message({{"lo", "-1"}}).find("lo/hi") != std::string::npos);
    CHECK(message({{"problem", "external"}, {"dim", "2"}}).find("lo/hi") != std::string::npos);
    CHECK(message({{"dim", "3"}, {"lo", "0,0"}, {"hi", "1"}}).find("lo") != std::string::npos);
  }
  SUBCASE("file errors") {
    CHECK_THROWS_AS(parse_config(tmp.path / "missing.cfg"), ConfigError);
    const auto bad = write_file(tmp.path / "bad.cfg", "dim 3\n");
    CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains(":1:"), ConfigError);
  }
}

TEST_CASE("fitness_stats") {
  const auto one = fitness_stats({2.5});
  CHECK(one.std == 0.0);
  CHECK(one.best == 2.5);
  CHECK(one.worst == 2.5);
  CHECK(one.mean == 2.5);
  const auto s = fitness_stats({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(1.1180339887498949).epsilon(1e-15));
  CHECK(s.best == 1.0);
  CHECK(s.worst == 4.0);
}

TEST_CASE("run_experiment") {
  TempDir tmp("experiment");
  SUBCASE("single run has zero spread") {
    RunConfig c = small(2, 0.0);
    c.num_runs = 1;
    const auto out = run_experiment(c);
    CHECK(out.summary.fitness.std == 0.0);
    CHECK(out.summary.fitness.best == out.summary.fitness.mean);
    CHECK(out.summary.fitness.worst == out.summary.fitness.mean);
    CHECK(out.summary.completed_runs == 1);
  }
  SUBCASE("repeatable under a fixed seed") {
    const RunConfig c = small(3, 0.0);
    const auto a = run_experiment(c);
    const auto b = run_experiment(c);
    CHECK(a.summary.fitness.mean == b.summary.fitness.mean);
    CHECK(a.summary.fitness.std == b.summary.fitness.std);
    for (std::size_t r = 0; r < a.runs.size(); ++r) {
      CHECK(a.runs[r].seed == run_seed(5, static_cast<int>(r)));
      CHECK(a.runs[r].best_fitness == b.runs[r].best_fitness);
    }
    CHECK(a.runs[1].seed == 5 + 10007);
  }
  SUBCASE("parallel repetitions give the same fitness") {
    const RunConfig c = small(2, 0.3);
    ExperimentOptions par;
    par.parallel_runs = true;
    const auto a = run_experiment(c);
    const auto b = run_experiment(c, {}, par);
    for (std::size_t r = 0; r < a.runs.size(); ++r) CHECK(a.runs[r].best_fitness == b.runs[r].best_fitness);
  }
  SUBCASE("logs follow the schemas and report reproduces the summary") {
    const RunConfig c = small(2, 0.5, 600);
    ExperimentOptions opts;
    opts.keep_results = true;
    const auto out = run_experiment(c, tmp.path, opts);

    const CsvTable gens = read_csv(tmp.path / "generations.csv");
    CHECK(gens.header == std::vector<std::string>{"run", "swarm", "generation", "gbest", "evals", "true_evals",
                                                  "surrogate_calls", "tee_count"});
    CHECK(gens.rows.size() == 3u * 2u * 60u);
    const CsvTable train = read_csv(tmp.path / "surrogate_training.csv");
    CHECK(train.header == std::vector<std::string>{"run", "version", "sample_count", "train_rmse"});
    CHECK(train.rows.size() == 3u * 5u);
    const CsvTable ver = read_csv(tmp.path / "verification.csv");
    CHECK(ver.header == std::vector<std::string>{"run", "swarm", "generation", "pseudo_fitness", "true_fitness"});
    std::size_t pairs = 0;
    for (const auto& r : out.results) pairs += r.verification_log.size();
    CHECK(ver.rows.size() == pairs);
    const CsvTable summary = read_csv(tmp.path / "summary.csv");
    CHECK(summary.header == std::vector<std::string>{"method", "problem", "D", "mean", "std", "best", "worst",
                                                     "elapsed_seconds", "prediction_rmse"});
    REQUIRE(summary.rows.size() == 1);
    CHECK(summary.rows[0][0] == "SD-PSO(0.5)");
    CHECK(std::stod(summary.rows[0][summary.column("mean")]) == out.summary.fitness.mean);

    // Values in the logs parse back to the exact doubles.
    const auto& first = out.results[0].generations.front();
    CHECK(std::stod(gens.rows[0][gens.column("gbest")]) == first.gbest);
    CHECK(std::stod(train.rows[0][train.column("train_rmse")]) == out.results[0].training_log[0].train_rmse);

    const auto recomputed = report(tmp.path);
    REQUIRE(recomputed.size() == 1);
    write_summary_csv(tmp.path / "recomputed.csv", recomputed);
    CHECK(slurp(tmp.path / "recomputed.csv") == slurp(tmp.path / "summary.csv"));
    CHECK(recomputed[0].train_rmse_mean == out.summary.train_rmse_mean);
  }
  SUBCASE("failed runs are recorded and excluded") {
    RunConfig c = small(2, 0.0);
    ExperimentOptions opts;
    std::ostringstream log;
    opts.log = &log;
    // Runs are sequential and each asks for one objective per swarm, so the
    // fourth objective handed out belongs to run 1.
    auto handed_out = std::make_shared<int>(0);
    opts.objectives = [handed_out](int) {
      Objective o = make_benchmark(ProblemKind::spherical, 3);
      if (++*handed_out == 4) {
        auto calls = std::make_shared<int>(0);
        auto inner = o.evaluate;
        o.evaluate = [inner, calls](const Vector& x) {
          if (++*calls > 50) throw EvaluationError("model diverged");
          return inner(x);
        };
      }
      return o;
    };
    const auto out = run_experiment(c, tmp.path, opts);
    CHECK(out.summary.completed_runs == 2);
    CHECK(out.summary.failed_runs == 1);
    CHECK_FALSE(out.runs[1].ok);
    const CsvTable runs = read_csv(tmp.path / "runs.csv");
    CHECK(runs.rows[1][runs.column("status")].find("model diverged") != std::string::npos);
    CHECK(log.str().find("model diverged") != std::string::npos);
    CHECK(log.str().find("completed runs only") != std::string::npos);
    CHECK(out.summary.fitness.mean == (out.runs[0].best_fitness + out.runs[2].best_fitness) / 2);
    const auto recomputed = report(tmp.path);
    write_summary_csv(tmp.path / "recomputed.csv", recomputed);
    CHECK(slurp(tmp.path / "recomputed.csv") == slurp(tmp.path / "summary.csv"));
  }
}

TEST_CASE("sweep_sprob") {
  TempDir tmp("sweep");
  RunConfig c = small(2, 0.0, 200);
  c.num_runs = 1;
  CHECK_THROWS_AS(sweep_sprob(c, {}), ConfigError);
  CHECK_THROWS_AS(sweep_sprob(c, {0.5, 1.5}), ConfigError);

  SUBCASE("probability zero is plain D-PSO") {
    const auto points = sweep_sprob(c, {0.0});
    const auto plain = run_experiment(c);
    REQUIRE(points.size() == 1);
    CHECK(points[0].summary.method == "D-PSO");
    CHECK(points[0].summary.fitness.mean == plain.summary.fitness.mean);
  }
  SUBCASE("elapsed time falls as the surrogate takes over") {
    c.delay = 0.01;
    c.t_max = 300;
    c.surrogate.epochs = 20;
    const auto points = sweep_sprob(c, {0.0, 0.25, 0.5, 0.75}, tmp.path);
    REQUIRE(points.size() == 4);
    for (std::size_t k = 1; k < points.size(); ++k) {
      CAPTURE(k);
      CHECK(points[k].summary.mean_elapsed_seconds < points[k - 1].summary.mean_elapsed_seconds);
      CHECK(points[k].summary.mean_true_evals < points[k - 1].summary.mean_true_evals);
    }
    const CsvTable sweep = read_csv(tmp.path / "sweep.csv");
    CHECK(sweep.rows.size() == 4);
    CHECK(sweep.header.front() == "s_prob");
    CHECK(fs::exists(tmp.path / "sprob_0.25" / "generations.csv"));
    CHECK(read_csv(tmp.path / "summary.csv").rows.size() == 4);
  }
}

TEST_CASE("command line") {
  TempDir tmp("cli");
  const auto cfg = write_file(tmp.path / "run.cfg", "dim = 2\nswarms = 2\npop_size = 10\nt_max = 300\nnum_runs = 2\n");
  const std::string cli = SDPSO_CLI;
  const std::string out = (tmp.path / "out").string();
  const std::string quiet = " > " + (tmp.path / "stdout.txt").string() + " 2>&1";

  CHECK(std::system((cli + " run -c " + cfg.string() + " -s s_prob=0.5 -s epochs=5 -o " + out + quiet).c_str()) == 0);
  CHECK(fs::exists(fs::path(out) / "summary.csv"));
  const std::string recomputed = (tmp.path / "recomputed.csv").string();
  CHECK(std::system((cli + " report -l " + out + " -o " + recomputed + quiet).c_str()) == 0);
  CHECK(slurp(recomputed) == slurp(fs::path(out) / "summary.csv"));

  CHECK(std::system((cli + " sweep -c " + cfg.string() + " -p 0,0.5 -s epochs=5 -o " + out + "/sweep" + quiet).c_str()) == 0);
  CHECK(read_csv(fs::path(out) / "sweep" / "sweep.csv").rows.size() == 2);

  const int bad = std::system((cli + " run -c " + cfg.string() + " -s psi=2 -o " + out + quiet).c_str());
  CHECK(WEXITSTATUS(bad) == 2);
  CHECK(slurp(tmp.path / "stdout.txt").find("psi") != std::string::npos);
  CHECK(std::system((cli + " report -l " + (tmp.path / "nowhere").string() + quiet).c_str()) != 0);
}
