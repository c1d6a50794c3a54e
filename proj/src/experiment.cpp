#include "sdpso/experiment.hpp"

#include "sdpso/extmodel.hpp"
#include "sdpso/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace sdpso {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

long to_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
}

int to_int(const std::string& key, const std::string& value) {
  const long v = to_long(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": out of range");
  }
  return static_cast<int>(v);
}

Vector to_bound_vector(const std::string& key, const std::string& value, int dim) {
  const auto parts = split(value, ',');
  if (parts.size() == 1) return Vector::Constant(dim, to_double(key, parts[0]));
  if (static_cast<int>(parts.size()) != dim) {
    throw ConfigError(key + ": expected 1 or " + std::to_string(dim) + " values, got " + std::to_string(parts.size()));
  }
  Vector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = to_double(key, parts[static_cast<std::size_t>(d)]);
  return v;
}

std::pair<std::string, std::string> split_setting(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("setting '" + text + "': expected key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt(*v) : std::string{}; }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

struct TrainStats {
  std::optional<double> mean, std;
};

TrainStats train_rmse_stats(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto s = fitness_stats(values);
  return {s.mean, s.std};
}

ExperimentSummary summarize(const RunConfig& config, const std::vector<RunRecord>& runs,
                            const std::vector<std::pair<double, double>>& verification,
                            const std::vector<double>& train_rmse) {
  ExperimentSummary summary;
  summary.method = method_name(config);
  summary.problem = to_string(config.problem);
  summary.dim = config.dim;
  std::vector<double> fitness;
  double elapsed = 0.0, true_evals = 0.0;
  for (const auto& r : runs) {
    if (!r.ok) {
      ++summary.failed_runs;
      continue;
    }
    fitness.push_back(r.best_fitness);
    elapsed += r.elapsed_seconds;
    true_evals += static_cast<double>(r.true_evals);
  }
  summary.completed_runs = static_cast<int>(fitness.size());
  if (!fitness.empty()) {
    summary.fitness = fitness_stats(fitness);
    summary.mean_elapsed_seconds = elapsed / static_cast<double>(fitness.size());
    summary.mean_true_evals = true_evals / static_cast<double>(fitness.size());
  }
  summary.prediction_rmse = prediction_rmse(verification);
  const auto ts = train_rmse_stats(train_rmse);
  summary.train_rmse_mean = ts.mean;
  summary.train_rmse_std = ts.std;
  return summary;
}

}  // namespace

RunConfig config_from_settings(const std::vector<std::pair<std::string, std::string>>& settings) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : settings) kv[k] = v;

  RunConfig c;
  auto take = [&kv](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("problem")) c.problem = problem_from_string(*v);
  if (auto v = take("dim")) c.dim = to_int("dim", *v);
  if (auto v = take("swarms")) c.swarms = to_int("swarms", *v);
  if (auto v = take("pop_size")) c.pop_size = to_int("pop_size", *v);
  if (auto v = take("alpha")) c.alpha = to_double("alpha", *v);
  if (auto v = take("c1")) c.c1 = to_double("c1", *v);
  if (auto v = take("c2")) c.c2 = to_double("c2", *v);
  if (auto v = take("psi")) c.psi = to_int("psi", *v);
  if (auto v = take("phi")) c.phi = to_int("phi", *v);
  if (auto v = take("beta")) c.beta = to_double("beta", *v);
  if (auto v = take("s_prob")) c.s_prob = to_double("s_prob", *v);
  if (auto v = take("t_max")) c.t_max = to_long("t_max", *v);
  if (auto v = take("exchange_fraction")) c.exchange_fraction = to_double("exchange_fraction", *v);
  if (auto v = take("delay")) c.delay = to_double("delay", *v);
  if (auto v = take("seed")) c.seed = static_cast<std::uint64_t>(to_long("seed", *v));
  if (auto v = take("num_runs")) c.num_runs = to_int("num_runs", *v);
  if (auto v = take("pseudo_weight")) c.pseudo_weight = to_double("pseudo_weight", *v);
  if (auto v = take("vmax_fraction")) c.vmax_fraction = to_double("vmax_fraction", *v);
  if (auto v = take("hidden1")) c.surrogate.hidden1 = to_int("hidden1", *v);
  if (auto v = take("hidden2")) c.surrogate.hidden2 = to_int("hidden2", *v);
  if (auto v = take("epochs")) c.surrogate.epochs = to_int("epochs", *v);
  if (auto v = take("warm_epochs")) c.surrogate.warm_epochs = to_int("warm_epochs", *v);
  if (auto v = take("batch_size")) c.surrogate.batch_size = to_int("batch_size", *v);
  if (auto v = take("learning_rate")) c.surrogate.learning_rate = to_double("learning_rate", *v);
  if (auto v = take("dataset_cap")) c.surrogate.dataset_cap = static_cast<std::size_t>(to_long("dataset_cap", *v));
  if (auto v = take("model_command")) {
    std::istringstream ss(*v);
    std::string arg;
    while (ss >> arg) c.model_command.push_back(arg);
  }
  if (auto v = take("model_timeout")) c.model_timeout = to_double("model_timeout", *v);

  auto lo = take("lo");
  auto hi = take("hi");
  if (c.dim < 1) throw ConfigError("dim: must be >= 1");
  if (lo || hi) {
    if (!lo || !hi) throw ConfigError("lo/hi: both bounds must be given together");
    c.bounds = Bounds(to_bound_vector("lo", *lo, c.dim), to_bound_vector("hi", *hi, c.dim));
  } else if (c.problem == ProblemKind::external) {
    throw ConfigError("lo/hi: external problems need explicit bounds");
  } else {
    c.bounds = default_bounds(c.problem, c.dim);
  }

  if (auto v = take("mode")) {
    if (*v == "pso") {
      c.swarms = 1;
      c.beta = 0.0;
      c.s_prob = 0.0;
    } else if (*v == "dpso") {
      c.s_prob = 0.0;
    } else if (*v == "sdpso") {
      if (!(c.s_prob > 0.0)) throw ConfigError("s_prob: mode sdpso requires s_prob > 0");
    } else {
      throw ConfigError("mode: expected pso, dpso or sdpso, got '" + *v + "'");
    }
  }
  if (!kv.empty()) throw ConfigError(kv.begin()->first + ": unknown configuration key");
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> settings;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      settings.push_back(split_setting(line));
    } catch (const ConfigError&) {
      throw ConfigError("config " + path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
  }
  for (const auto& o : overrides) settings.push_back(split_setting(o));
  return config_from_settings(settings);
}

std::string method_name(const RunConfig& config) {
  if (config.s_prob > 0.0) {
    std::ostringstream ss;
    ss << "SD-PSO(" << config.s_prob << ")";
    return ss.str();
  }
  return config.swarms == 1 ? "PSO" : "D-PSO";
}

ObjectiveFactory make_objective_factory(const RunConfig& config) {
  if (config.problem == ProblemKind::external) {
    return [config](int) {
      EndpointSpec spec;
      spec.command = config.model_command;
      spec.dim = config.dim;
      spec.bounds = config.bounds;
      spec.timeout = config.model_timeout;
      return with_delay(make_external_objective(spawn(std::move(spec))), config.delay);
    };
  }
  Objective base = with_delay(make_benchmark(config.problem, config.dim, config.bounds), config.delay);
  return [base](int) { return base; };
}

FitnessStats fitness_stats(const std::vector<double>& values) {
  FitnessStats s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  s.best = *std::min_element(values.begin(), values.end());
  s.worst = *std::max_element(values.begin(), values.end());
  return s;
}

ExperimentOutput run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                                const ExperimentOptions& options) {
  config.validate();
  std::ostream& log = options.log ? *options.log : std::cerr;
  const ObjectiveFactory objectives = options.objectives ? options.objectives : make_objective_factory(config);

  ExperimentOutput output;
  output.runs.resize(static_cast<std::size_t>(config.num_runs));
  std::vector<std::optional<RunResult>> results(static_cast<std::size_t>(config.num_runs));
  std::mutex log_mutex;

  auto one = [&](int r) {
    RunConfig rc = config;
    rc.seed = run_seed(config.seed, r);
    RunRecord& rec = output.runs[static_cast<std::size_t>(r)];
    rec.run = r;
    rec.seed = rc.seed;
    rec.method = method_name(config);
    rec.problem = to_string(config.problem);
    rec.dim = config.dim;
    RunHooks hooks;
    std::ostringstream run_log;
    hooks.log = &run_log;
    try {
      RunResult res = run(rc, objectives, hooks);
      rec.best_fitness = res.best_fitness;
      rec.elapsed_seconds = res.elapsed_seconds;
      rec.true_evals = res.true_eval_count;
      rec.surrogate_calls = res.surrogate_call_count;
      rec.tee_count = res.tee_count;
      results[static_cast<std::size_t>(r)] = std::move(res);
    } catch (const RunFailure& e) {
      rec.ok = false;
      rec.error = e.what();
      results[static_cast<std::size_t>(r)] = e.partial();
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    std::lock_guard lock(log_mutex);
    log << run_log.str();
    if (!rec.ok) log << "warning: run " << r << " failed: " << rec.error << '\n';
  };

  if (options.parallel_runs && config.num_runs > 1) {
    std::vector<std::jthread> threads;
    for (int r = 0; r < config.num_runs; ++r) threads.emplace_back(one, r);
  } else {
    for (int r = 0; r < config.num_runs; ++r) one(r);
  }

  std::vector<std::pair<double, double>> verification;
  std::vector<double> train_rmse;
  std::vector<std::pair<int, RunResult>> logged;
  for (int r = 0; r < config.num_runs; ++r) {
    auto& res = results[static_cast<std::size_t>(r)];
    if (!res) continue;
    if (output.runs[static_cast<std::size_t>(r)].ok) {
      for (const auto& v : res->verification_log) verification.emplace_back(v.true_fitness, v.pseudo_fitness);
      for (const auto& t : res->training_log) train_rmse.push_back(t.train_rmse);
    }
    logged.emplace_back(r, std::move(*res));
  }
  output.summary = summarize(config, output.runs, verification, train_rmse);
  if (output.summary.failed_runs > 0) {
    log << "warning: " << output.summary.failed_runs << " of " << config.num_runs
        << " runs failed; summary covers completed runs only\n";
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_generations_csv(out_dir / "generations.csv", logged);
    write_training_csv(out_dir / "surrogate_training.csv", logged);
    write_verification_csv(out_dir / "verification.csv", logged);
    write_runs_csv(out_dir / "runs.csv", output.runs);
    write_summary_csv(out_dir / "summary.csv", {output.summary});
  }
  if (options.keep_results) {
    for (auto& [r, res] : logged) output.results.push_back(std::move(res));
  }
  return output;
}

std::vector<SweepPoint> sweep_sprob(const RunConfig& config, const std::vector<double>& probabilities,
                                    const std::filesystem::path& out_dir, const ExperimentOptions& options) {
  if (probabilities.empty()) throw ConfigError("sweep: probability list is empty");
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep: probability " + fmt(p) + " outside [0, 1]");
  }
  std::vector<SweepPoint> points;
  for (double p : probabilities) {
    RunConfig c = config;
    c.s_prob = p;
    std::filesystem::path dir;
    if (!out_dir.empty()) {
      std::ostringstream name;
      name << "sprob_" << p;
      dir = out_dir / name.str();
    }
    points.push_back({p, run_experiment(c, dir, options).summary});
  }
  if (!out_dir.empty()) {
    auto out = open_out(out_dir / "sweep.csv");
    out << "s_prob,method,problem,D,mean,std,best,worst,elapsed_seconds,mean_true_evals,prediction_rmse\n";
    for (const auto& pt : points) {
      const auto& s = pt.summary;
      out << fmt(pt.s_prob) << ',' << csv_escape(s.method) << ',' << s.problem << ',' << s.dim << ','
          << fmt(s.fitness.mean) << ',' << fmt(s.fitness.std) << ',' << fmt(s.fitness.best) << ','
          << fmt(s.fitness.worst) << ',' << fmt(s.mean_elapsed_seconds) << ',' << fmt(s.mean_true_evals) << ','
          << fmt_optional(s.prediction_rmse) << '\n';
    }
    std::vector<ExperimentSummary> summaries;
    for (const auto& pt : points) summaries.push_back(pt.summary);
    write_summary_csv(out_dir / "summary.csv", summaries);
  }
  return points;
}

void write_generations_csv(const std::filesystem::path& path, const std::vector<std::pair<int, RunResult>>& runs) {
  auto out = open_out(path);
  out << "run,swarm,generation,gbest,evals,true_evals,surrogate_calls,tee_count\n";
  for (const auto& [r, res] : runs) {
    for (const auto& g : res.generations) {
      out << r << ',' << g.swarm_id << ',' << g.generation << ',' << fmt(g.gbest) << ',' << g.evals << ','
          << g.true_evals << ',' << g.surrogate_calls << ',' << g.tee_count << '\n';
    }
  }
}

void write_training_csv(const std::filesystem::path& path, const std::vector<std::pair<int, RunResult>>& runs) {
  auto out = open_out(path);
  out << "run,version,sample_count,train_rmse\n";
  for (const auto& [r, res] : runs) {
    for (const auto& t : res.training_log) {
      out << r << ',' << t.version << ',' << t.sample_count << ',' << fmt(t.train_rmse) << '\n';
    }
  }
}

void write_verification_csv(const std::filesystem::path& path, const std::vector<std::pair<int, RunResult>>& runs) {
  auto out = open_out(path);
  out << "run,swarm,generation,pseudo_fitness,true_fitness\n";
  for (const auto& [r, res] : runs) {
    for (const auto& v : res.verification_log) {
      out << r << ',' << v.swarm_id << ',' << v.generation << ',' << fmt(v.pseudo_fitness) << ','
          << fmt(v.true_fitness) << '\n';
    }
  }
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
  auto out = open_out(path);
  out << "run,seed,method,problem,D,best_fitness,elapsed_seconds,true_evals,surrogate_calls,tee_count,status\n";
  for (const auto& r : runs) {
    out << r.run << ',' << r.seed << ',' << csv_escape(r.method) << ',' << r.problem << ',' << r.dim << ','
        << fmt(r.best_fitness) << ',' << fmt(r.elapsed_seconds) << ',' << r.true_evals << ',' << r.surrogate_calls
        << ',' << r.tee_count << ',' << (r.ok ? "ok" : csv_escape("failed: " + r.error)) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<ExperimentSummary>& summaries) {
  auto out = open_out(path);
  out << "method,problem,D,mean,std,best,worst,elapsed_seconds,prediction_rmse\n";
  for (const auto& s : summaries) {
    out << csv_escape(s.method) << ',' << s.problem << ',' << s.dim << ',' << fmt(s.fitness.mean) << ','
        << fmt(s.fitness.std) << ',' << fmt(s.fitness.best) << ',' << fmt(s.fitness.worst) << ','
        << fmt(s.mean_elapsed_seconds) << ',' << fmt_optional(s.prediction_rmse) << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  table.header = parse_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = parse_csv_line(line);
    if (row.size() != table.header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(table.rows.size() + 1) + " has " +
                      std::to_string(row.size()) + " cells, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<ExperimentSummary> report(const std::filesystem::path& log_dir) {
  const CsvTable runs = read_csv(log_dir / "runs.csv");
  const auto c_run = runs.column("run"), c_method = runs.column("method"), c_problem = runs.column("problem"),
             c_dim = runs.column("D"), c_best = runs.column("best_fitness"),
             c_elapsed = runs.column("elapsed_seconds"), c_true = runs.column("true_evals"),
             c_status = runs.column("status");

  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::vector<RunRecord>> groups;
  std::vector<Key> order;
  std::map<long, Key> key_of_run;
  for (const auto& row : runs.rows) {
    RunRecord r;
    r.run = to_int("run", row[c_run]);
    r.method = row[c_method];
    r.problem = row[c_problem];
    r.dim = to_int("D", row[c_dim]);
    r.best_fitness = to_double("best_fitness", row[c_best]);
    r.elapsed_seconds = to_double("elapsed_seconds", row[c_elapsed]);
    r.true_evals = to_long("true_evals", row[c_true]);
    r.ok = row[c_status] == "ok";
    Key key{r.method, r.problem, r.dim};
    if (!groups.count(key)) order.push_back(key);
    key_of_run[r.run] = key;
    groups[key].push_back(r);
  }

  std::map<Key, std::vector<std::pair<double, double>>> verification;
  const CsvTable ver = read_csv(log_dir / "verification.csv");
  const auto v_run = ver.column("run"), v_pseudo = ver.column("pseudo_fitness"), v_true = ver.column("true_fitness");
  std::set<long> failed;
  for (const auto& [k, rs] : groups)
    for (const auto& r : rs)
      if (!r.ok) failed.insert(r.run);
  for (const auto& row : ver.rows) {
    const long r = to_long("run", row[v_run]);
    if (failed.count(r) || !key_of_run.count(r)) continue;
    verification[key_of_run[r]].emplace_back(to_double("true_fitness", row[v_true]),
                                             to_double("pseudo_fitness", row[v_pseudo]));
  }

  std::map<Key, std::vector<double>> train;
  if (std::filesystem::exists(log_dir / "surrogate_training.csv")) {
    const CsvTable tr = read_csv(log_dir / "surrogate_training.csv");
    const auto t_run = tr.column("run"), t_rmse = tr.column("train_rmse");
    for (const auto& row : tr.rows) {
      const long r = to_long("run", row[t_run]);
      if (failed.count(r) || !key_of_run.count(r)) continue;
      train[key_of_run[r]].push_back(to_double("train_rmse", row[t_rmse]));
    }
  }

  std::vector<ExperimentSummary> out;
  for (const auto& key : order) {
    RunConfig shell;
    ExperimentSummary s = summarize(shell, groups[key], verification[key], train[key]);
    s.method = std::get<0>(key);
    s.problem = std::get<1>(key);
    s.dim = std::get<2>(key);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sdpso
