#include "commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <future>
#include <ostream>
#include <set>

#include "moo/io.hpp"
#include "moo/random.hpp"
#include "moo/toy_problem.hpp"

namespace moo::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::set<std::string> kCommonKeys = {
    "problem",      "combinator",    "max_steps", "lr",          "groupdro_eta",
    "solver",       "convergence_tol", "record_every", "seed",     "lr_schedule",
    "warmup_ratio", "output_dir"};
const std::set<std::string> kToyKeys = {"init"};
const std::set<std::string> kDpoKeys = {"num_prompts", "num_responses", "num_objectives", "rho",
                                        "beta",        "batch_size",    "datasets"};

double get_number(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return v.get<double>();
}

long long get_integer(const json& doc, const std::string& key, long long min_value) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < min_value) {
    throw ConfigError("config: '" + key + "' must be >= " + std::to_string(min_value));
  }
  return x;
}

std::string get_string(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

json opt_int(const std::optional<std::int64_t>& x) { return x ? json(*x) : json(nullptr); }

Vector final_toy_losses(const Trajectory& traj) { return toy_losses(traj.final_params).values; }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_json(const fs::path& path, const ordered_json& doc) {
  io::write_file(path, doc.dump(2) + "\n");
}

std::vector<Vector> parse_vectors(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("solve: malformed JSON: ") + e.what());
  }
  if (doc.is_object()) {
    if (!doc.contains("vectors") || doc.size() != 1) {
      throw ConfigError("solve: expected {\"vectors\": [[...], ...]}");
    }
    doc = doc["vectors"];
  }
  if (!doc.is_array() || doc.empty()) throw ConfigError("solve: expected a non-empty array of vectors");
  std::vector<Vector> out;
  for (const auto& row : doc) {
    if (!row.is_array() || row.empty()) throw ConfigError("solve: each vector must be a non-empty array");
    Vector v;
    for (const auto& x : row) {
      if (!x.is_number()) throw ConfigError("solve: vector entries must be numbers");
      v.push_back(x.get<double>());
    }
    if (!out.empty() && v.size() != out.front().size()) {
      throw ConfigError("solve: vectors must share one dimension");
    }
    if (!all_finite(v)) throw ConfigError("solve: vector entries must be finite");
    out.push_back(std::move(v));
  }
  return out;
}

ordered_json summary_json(const RunConfig& cfg, const Trajectory& traj, const Vector& final_losses) {
  ordered_json s;
  s["problem"] = cfg.problem == ProblemKind::Toy2D ? "toy2d" : "dpo-sim";
  s["combinator"] = std::string(to_string(cfg.train.combinator));
  s["converged_at"] = opt_int(traj.converged_at);
  s["steps"] = traj.records.empty() ? 0 : traj.records.back().step;
  s["final_params"] = traj.final_params;
  s["final_losses"] = final_losses;
  return s;
}

int run_dpo_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  DpoRunResult result;
  try {
    result = run_dpo_sim(cfg);
  } catch (const dpo::EmptyObjectiveError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  fs::create_directories(cfg.output_dir);
  fs::create_directories(cfg.output_dir / "datasets");
  io::write_file(cfg.output_dir / "trajectory.csv", io::trajectory_to_csv(result.trajectory));
  write_json(cfg.output_dir / "summary.json", summary_json(cfg, result.trajectory, result.final_losses));

  ordered_json losses;
  losses["combinator"] = std::string(to_string(cfg.train.combinator));
  losses["initial_losses"] = result.initial_losses;
  losses["final_losses"] = result.final_losses;
  losses["max_final_loss"] = *std::max_element(result.final_losses.begin(), result.final_losses.end());
  write_json(cfg.output_dir / "final_losses.json", losses);
  for (const auto& ds : result.datasets) {
    io::write_file(cfg.output_dir / "datasets" / ("objective_" + std::to_string(ds.objective) + ".json"),
                   io::dataset_to_json(ds));
  }
  write_json(cfg.output_dir / "timing.json", ordered_json{{"wall_time", seconds_since(start)}});

  out << to_string(cfg.train.combinator) << ": final losses";
  for (double l : result.final_losses) out << ' ' << io::format_double(l);
  out << "\n";
  return kExitOk;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");

  RunConfig cfg;
  const std::string problem = doc.contains("problem") ? get_string(doc, "problem") : "toy2d";
  if (problem == "toy2d") {
    cfg.problem = ProblemKind::Toy2D;
    cfg.init = kToyInit;
  } else if (problem == "dpo-sim") {
    cfg.problem = ProblemKind::DpoSim;
    cfg.train.lr = 0.05;
    cfg.train.groupdro_eta = 0.1;
    cfg.train.max_steps = 200;
  } else {
    throw ConfigError("config: unknown problem '" + problem + "' (expected toy2d or dpo-sim)");
  }

  const auto& extra = cfg.problem == ProblemKind::Toy2D ? kToyKeys : kDpoKeys;
  for (const auto& [key, _] : doc.items()) {
    if (!kCommonKeys.contains(key) && !extra.contains(key)) {
      throw ConfigError("config: unknown key '" + key + "' for problem " + problem);
    }
  }

  auto& t = cfg.train;
  if (doc.contains("combinator")) {
    const auto name = get_string(doc, "combinator");
    const auto kind = parse_combinator(name);
    if (!kind) {
      throw ConfigError("config: unknown combinator '" + name + "'; valid names: " +
                        combinator_names());
    }
    t.combinator = *kind;
  }
  if (doc.contains("max_steps")) t.max_steps = static_cast<int>(get_integer(doc, "max_steps", 1));
  if (doc.contains("lr")) t.lr = get_number(doc, "lr");
  if (doc.contains("groupdro_eta")) t.groupdro_eta = get_number(doc, "groupdro_eta");
  if (doc.contains("convergence_tol")) t.convergence_tol = get_number(doc, "convergence_tol");
  if (doc.contains("record_every")) t.record_every = static_cast<int>(get_integer(doc, "record_every", 1));
  if (doc.contains("seed")) t.seed = static_cast<std::uint64_t>(get_integer(doc, "seed", 0));
  if (doc.contains("warmup_ratio")) t.warmup_ratio = get_number(doc, "warmup_ratio");
  if (doc.contains("lr_schedule")) {
    const auto s = get_string(doc, "lr_schedule");
    if (s == "constant") {
      t.lr_schedule = LrSchedule::Constant;
    } else if (s == "cosine") {
      t.lr_schedule = LrSchedule::Cosine;
    } else {
      throw ConfigError("config: lr_schedule must be 'constant' or 'cosine'");
    }
  }
  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    if (!s.is_object()) throw ConfigError("config: 'solver' must be an object");
    for (const auto& [key, _] : s.items()) {
      if (key != "max_iterations" && key != "convergence_threshold") {
        throw ConfigError("config: unknown key 'solver." + key + "'");
      }
    }
    if (s.contains("max_iterations")) {
      t.solver.max_iterations = static_cast<int>(get_integer(s, "max_iterations", 1));
    }
    if (s.contains("convergence_threshold")) {
      t.solver.convergence_threshold = get_number(s, "convergence_threshold");
    }
  }
  if (doc.contains("output_dir")) cfg.output_dir = get_string(doc, "output_dir");

  if (cfg.problem == ProblemKind::Toy2D) {
    if (doc.contains("init")) {
      const auto& v = doc["init"];
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError("config: 'init' must be an array of two numbers");
      }
      cfg.init = {v[0].get<double>(), v[1].get<double>()};
    }
  } else {
    auto& d = cfg.dpo;
    d.spec.seed = t.seed;
    if (doc.contains("num_prompts")) d.spec.num_prompts = get_integer(doc, "num_prompts", 1);
    if (doc.contains("num_responses")) d.spec.num_responses = get_integer(doc, "num_responses", 2);
    if (doc.contains("num_objectives")) d.spec.num_objectives = get_integer(doc, "num_objectives", 1);
    if (doc.contains("rho")) d.spec.rho = get_number(doc, "rho");
    if (doc.contains("beta")) d.beta = get_number(doc, "beta");
    if (doc.contains("batch_size")) d.batch_size = get_integer(doc, "batch_size", 1);
    if (doc.contains("datasets")) {
      const auto& v = doc["datasets"];
      if (!v.is_array()) throw ConfigError("config: 'datasets' must be an array of paths");
      for (const auto& p : v) {
        if (!p.is_string()) throw ConfigError("config: 'datasets' entries must be strings");
        d.dataset_files.emplace_back(p.get<std::string>());
      }
      if (!d.dataset_files.empty()) d.spec.num_objectives = d.dataset_files.size();
    }
    if (!(d.beta > 0.0)) throw ConfigError("config: 'beta' must be > 0");
    try {
      d.spec.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  try {
    t.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

TrainConfig toy_train_config(CombinatorKind kind, int max_steps) {
  TrainConfig t;
  t.combinator = kind;
  t.max_steps = max_steps;
  t.lr = 5e-3;
  t.groupdro_eta = 0.01;
  t.convergence_tol = 0.01;
  return t;
}

std::vector<ToyRun> run_toy_suite(int max_steps) {
  const ToyProblem2D problem;
  std::vector<std::future<Trajectory>> futures;
  for (auto kind : kAllCombinators) {
    futures.push_back(std::async(std::launch::async, [&problem, kind, max_steps] {
      return train(problem, kToyInit, toy_train_config(kind, max_steps));
    }));
  }
  std::vector<ToyRun> runs;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    runs.push_back(ToyRun{kAllCombinators[i], futures[i].get()});
  }
  return runs;
}

DpoRunResult run_dpo_sim(const RunConfig& config) {
  const auto& d = config.dpo;
  const auto& spec = d.spec;
  DpoRunResult result;
  if (d.dataset_files.empty()) {
    result.datasets = dpo::generate_preferences(spec);
  } else {
    for (const auto& path : d.dataset_files) {
      std::string text;
      try {
        text = io::read_file(path);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      try {
        auto ds = io::dataset_from_json(text);
        ds.validate(spec.num_prompts, spec.num_responses);
        if (ds.pairs.empty()) throw dpo::EmptyObjectiveError(ds.objective);
        result.datasets.push_back(std::move(ds));
      } catch (const io::FormatError& e) {
        throw ConfigError(path.string() + ": " + e.what());
      } catch (const ContractViolation& e) {
        throw ConfigError(path.string() + ": " + e.what());
      }
    }
  }

  const auto reference = dpo::TabularPolicy::random(spec.num_prompts, spec.num_responses,
                                                    derive_seed(config.train.seed, 2));
  const std::size_t per_epoch = [&] {
    std::size_t largest = 0;
    for (const auto& ds : result.datasets) largest = std::max(largest, ds.pairs.size());
    return (largest + d.batch_size - 1) / d.batch_size;
  }();
  // One extra step covers the evaluation after the final update.
  const std::size_t epochs =
      (static_cast<std::size_t>(config.train.max_steps) + 1 + per_epoch - 1) / per_epoch;
  auto schedule = dpo::minibatch_schedule(result.datasets, d.batch_size,
                                          derive_seed(config.train.seed, 3), epochs);
  const dpo::DpoProblem problem(reference, std::move(schedule), d.beta);

  const Vector init(reference.logits().begin(), reference.logits().end());
  result.trajectory = train(problem, init, config.train);

  const auto trained = reference.with_logits(result.trajectory.final_params);
  for (const auto& ds : result.datasets) {
    result.initial_losses.push_back(dpo::dpo_loss(reference, reference, ds.pairs, d.beta));
    result.final_losses.push_back(dpo::dpo_loss(trained, reference, ds.pairs, d.beta));
  }
  return result;
}

int cmd_run(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string text;
    try {
      text = io::read_file(config_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    const auto cfg = parse_run_config(text);
    if (cfg.problem == ProblemKind::DpoSim) return run_dpo_command(cfg, out, err);

    const auto start = std::chrono::steady_clock::now();
    const ToyProblem2D problem;
    const auto traj = train(problem, cfg.init, cfg.train);
    fs::create_directories(cfg.output_dir);
    io::write_file(cfg.output_dir / "trajectory.csv", io::trajectory_to_csv(traj));
    write_json(cfg.output_dir / "summary.json", summary_json(cfg, traj, final_toy_losses(traj)));
    write_json(cfg.output_dir / "timing.json", ordered_json{{"wall_time", seconds_since(start)}});

    out << to_string(cfg.train.combinator) << ": ";
    if (traj.converged_at) {
      out << "converged in " << *traj.converged_at << " steps\n";
    } else {
      out << "did not converge in " << cfg.train.max_steps << " steps\n";
    }
    return kExitOk;
  });
}

int cmd_reproduce_fig3(const fs::path& output_dir, int max_steps, std::ostream& out,
                       std::ostream& err) {
  if (max_steps < 1) {
    err << "error: --max-steps must be >= 1\n";
    return kExitConfig;
  }
  try {
    fs::create_directories(output_dir);
    const auto runs = run_toy_suite(max_steps);

    std::vector<io::SvgSeries> series;
    ordered_json steps;
    std::string table = "combinator        steps\n";
    for (const auto& run : runs) {
      const std::string name(to_string(run.kind));
      io::write_file(output_dir / (name + ".csv"), io::trajectory_to_csv(run.trajectory));

      io::SvgSeries s{name, {}};
      for (const auto& r : run.trajectory.records) s.points.emplace_back(r.params[0], r.params[1]);
      series.push_back(std::move(s));

      steps[name] = opt_int(run.trajectory.converged_at);
      std::string count = run.trajectory.converged_at ? std::to_string(*run.trajectory.converged_at)
                                                      : "none (max " + std::to_string(max_steps) + ")";
      table += name + std::string(18 - name.size(), ' ') + count + "\n";
    }
    io::write_file(output_dir / "fig3.svg",
                   io::trajectory_svg(series, {kToyInit[0], kToyInit[1]},
                                      {kToyOptimum[0], kToyOptimum[1]}));
    ordered_json summary;
    summary["max_steps"] = max_steps;
    summary["convergence_tol"] = 0.01;
    summary["converged_at"] = steps;
    write_json(output_dir / "summary.json", summary);
    io::write_file(output_dir / "summary.txt", table);
    out << table;
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_solve(const std::optional<fs::path>& file, const std::optional<std::string>& inline_vectors,
              const SolverConfig& solver, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (file.has_value() == inline_vectors.has_value()) {
      throw ConfigError("solve: pass exactly one of --file or --vec");
    }
    std::string text;
    if (file) {
      try {
        text = io::read_file(*file);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    } else {
      text = *inline_vectors;
    }
    const auto vectors = parse_vectors(text);
    try {
      solver.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(e.what());
    }
    const auto sol = min_norm_point(vectors, solver);
    ordered_json doc;
    doc["weights"] = sol.weights.weights;
    doc["point"] = sol.point;
    doc["norm"] = sol.norm;
    doc["iterations"] = sol.iterations;
    doc["converged"] = sol.converged;
    doc["kkt_residual"] = kkt_residual(vectors, sol);
    out << doc.dump(2) << "\n";
    return kExitOk;
  });
}

int cmd_dpo_sim(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string text;
    try {
      text = io::read_file(config_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    const auto cfg = parse_run_config(text);
    if (cfg.problem != ProblemKind::DpoSim) {
      throw ConfigError("dpo-sim: config must set \"problem\": \"dpo-sim\"");
    }
    return run_dpo_command(cfg, out, err);
  });
}

}  // namespace moo::cli
