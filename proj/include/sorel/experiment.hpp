#pragma once

// Experiment runner: builds the problem from a config, selects grid values,
// runs every (method, seed) pair under the pass budget, and persists one
// trace per run plus a JSON manifest.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "sorel/baselines.hpp"
#include "sorel/config.hpp"
#include "sorel/dataset.hpp"
#include "sorel/solver.hpp"

namespace sorel {

using json = nlohmann::json;

inline constexpr const char* kManifestName = "manifest.json";

/// SOREL_OUTPUT_DIR and SOREL_THREADS take precedence over the file.
inline void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("SOREL_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  if (const char* th = std::getenv("SOREL_THREADS"); th && *th) {
    const std::string s(th);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v == 0)
      throw config_error("SOREL_THREADS must be a positive integer, got '" + s + "'");
    cfg.threads = v;
  }
}

struct Problem {
  ObjectiveModel model;
  SpectralWeights sigma;
};

inline Problem build_problem(const ExperimentConfig& cfg) {
  Dataset data = cfg.dataset.path ? load_csv(*cfg.dataset.path)
                                  : make_synthetic(cfg.dataset.synthetic);
  if (cfg.dataset.standardize) data = standardize(data).data;
  const double mu = cfg.mu ? *cfg.mu : 1.0 / static_cast<double>(data.n());
  const auto n = static_cast<std::size_t>(data.n());
  ObjectiveModel model(std::move(data), cfg.dataset.loss, mu);
  return {std::move(model), make_spectrum(cfg.spectrum.family, n, cfg.spectrum.param)};
}

inline std::string spectrum_tag(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << to_string(cfg.spectrum.family) << '-' << cfg.spectrum.param;
  return os.str();
}

inline std::string trace_file_name(const std::string& dataset, const std::string& spectrum,
                                   const std::string& method, std::uint64_t seed) {
  return dataset + "__" + spectrum + "__" + method + "__seed" + std::to_string(seed) + ".csv";
}

/// Builds the SOREL schedule described by a method parameter set.
inline ScheduleParams make_schedule(const ParamReader& p, const ObjectiveModel& model) {
  const std::string mode = p.text("schedule", "practical");
  if (mode == "practical") {
    return ScheduleParams::practical(static_cast<std::size_t>(model.n()), p.real("c"),
                                     p.real("alpha"), p.real("tau_scale", 20.0));
  }
  if (mode == "theoretical") {
    const std::string rule = p.text("epoch_rule", "outer_rate");
    if (rule != "outer_rate" && rule != "subproblem")
      throw config_error("epoch_rule must be outer_rate or subproblem");
    return ScheduleParams::theoretical(model.mu(), model.smoothness(),
                                       p.real("g", model.lipschitz()), p.real("c_t", 2.0),
                                       rule == "outer_rate" ? EpochRule::outer_rate
                                                            : EpochRule::subproblem);
  }
  if (mode == "constant") {
    return ScheduleParams::constant(p.real("theta"), p.real("eta"), p.real("tau"),
                                    p.real("alpha"), p.count("m"), p.count("t"));
  }
  throw config_error("unknown schedule '" + mode + "'");
}

/// One optimizer run from w_0 = 0.
inline RunResult execute_method(const std::string& type, const ParamMap& params,
                                const Problem& problem, std::uint64_t seed, double pass_budget) {
  ParamReader p(params, "method " + type);
  RunResult result;
  if (type == "sorel") {
    ScheduleParams schedule = make_schedule(p, problem.model);
    SorelOptions opts;
    opts.exact_inner = p.flag("exact_inner", false);
    opts.batch_size = p.count("batch_size", 1);
    opts.max_passes = pass_budget;
    p.reject_unused();
    SorelSolver solver(problem.model, problem.sigma, std::move(schedule), seed, opts);
    while (solver.step()) {
    }
    result = {solver.trace(), solver.w()};
  } else {
    BaselineConfig c;
    c.seed = seed;
    c.pass_budget = pass_budget;
    c.step_size = p.real("alpha");
    if (type == "sgd") {
      c.method = BaselineMethod::sgd;
      c.batch_size = p.count("batch_size", 64);
    } else if (type == "lsvrg") {
      c.method = BaselineMethod::lsvrg;
      c.epoch_length = p.count("epoch_length", 0);
    } else if (type == "prospect") {
      c.method = BaselineMethod::prospect;
    } else {
      throw config_error("unknown method type '" + type + "'");
    }
    p.reject_unused();
    result = type == "sgd"     ? run_sgd(problem.model, problem.sigma, c)
             : type == "lsvrg" ? run_lsvrg(problem.model, problem.sigma, c)
                               : run_prospect(problem.model, problem.sigma, c);
  }
  result.trace.metadata().seed = seed;
  return result;
}

/// Mean objective over the rows logged during the last `window` passes.
inline double tail_objective(const TrainingTrace& trace, double window = 10.0) {
  require(!trace.empty(), "tail_objective: empty trace");
  const double cutoff = trace.back().passes - window;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : trace.rows())
    if (r.passes > cutoff || &r == &trace.back()) {
      sum += r.objective;
      ++count;
    }
  return sum / static_cast<double>(count);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception escaping fn stops new work and is rethrown after the join.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(guard);
          if (!first) first = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

struct GridChoice {
  ParamMap selected;
  json candidates = json::array();
};

/// Picks the grid point minimizing the seed-averaged tail objective over
/// seeds 1..S. Diverged candidates score +inf.
inline GridChoice select_grid(const MethodSpec& method, const Problem& problem,
                              const ExperimentConfig& cfg) {
  const auto grid = method.expand_grid();
  GridChoice choice;
  if (grid.size() == 1) {
    choice.selected = grid.front();
    return choice;
  }
  const std::size_t S = cfg.grid_seeds;
  std::vector<double> scores(grid.size() * S, std::numeric_limits<double>::infinity());
  std::vector<std::string> errors(grid.size() * S);
  parallel_for(grid.size() * S, cfg.threads, [&](std::size_t job) {
    const std::size_t g = job / S;
    const std::uint64_t seed = job % S + 1;
    try {
      const RunResult r = execute_method(method.type, grid[g], problem, seed, cfg.pass_budget);
      scores[job] = tail_objective(r.trace);
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      errors[job] = e.what();
    }
  });
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_g = grid.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double mean = 0.0;
    for (std::size_t s = 0; s < S; ++s) mean += scores[g * S + s] / static_cast<double>(S);
    json entry{{"params", grid[g]}};
    if (std::isfinite(mean)) {
      entry["score"] = mean;
    } else {
      entry["score"] = nullptr;
      for (std::size_t s = 0; s < S; ++s)
        if (!errors[g * S + s].empty()) {
          entry["error"] = errors[g * S + s];
          break;
        }
    }
    choice.candidates.push_back(std::move(entry));
    if (mean < best) {
      best = mean;
      best_g = g;
    }
  }
  if (best_g == grid.size())
    throw std::runtime_error("grid search for '" + method.label + "': every candidate failed");
  choice.selected = grid[best_g];
  return choice;
}

struct ReferenceRecord {
  Vector w;
  double objective = 0.0;
  double objective_at_w0 = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool cache_hit = false;
  std::filesystem::path file;
};

/// Key identifying a reference solution: dataset, spectrum, mu and tolerance.
inline std::string reference_key(const ExperimentConfig& cfg) {
  ExperimentConfig sub;
  for (const auto& s : {"dataset", "spectrum"})
    if (auto it = cfg.raw.find(s); it != cfg.raw.end()) sub.raw[s] = it->second;
  auto& ex = sub.raw["experiment"];
  if (auto it = cfg.raw.find("experiment"); it != cfg.raw.end()) {
    for (const auto& k : {"mu", "reference_tol"})
      if (auto kv = it->second.find(k); kv != it->second.end()) ex[k] = kv->second;
  }
  if (cfg.dataset.path) ex["resolved_path"] = cfg.dataset.path->string();
  return config_hash(sub);
}

/// Computes the reference solution, or loads it from the output directory
/// when an identical one was stored before.
inline ReferenceRecord obtain_reference(const ExperimentConfig& cfg, const Problem& problem,
                                        bool force) {
  ReferenceRecord rec;
  rec.file = cfg.output_dir / ("reference__" + cfg.dataset.name + "__" + spectrum_tag(cfg) +
                               "__" + reference_key(cfg) + ".json");
  rec.objective_at_w0 = problem.model.primal_objective(problem.sigma, Vector::Zero(problem.model.d()));
  if (!force && std::filesystem::exists(rec.file)) {
    std::ifstream in(rec.file);
    const json j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("w") &&
        j["w"].size() == static_cast<std::size_t>(problem.model.d())) {
      const auto w = j["w"].get<std::vector<double>>();
      rec.w = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
      rec.objective = j["objective"].get<double>();
      rec.iterations = j["iterations"].get<std::size_t>();
      rec.residual = j["residual"].get<double>();
      rec.cache_hit = true;
      return rec;
    }
  }
  const ReferenceResult r = reference_solution_detailed(problem.model, problem.sigma, cfg.reference_tol);
  rec.w = r.w;
  rec.objective = r.objective;
  rec.iterations = r.iterations;
  rec.residual = r.residual;
  std::filesystem::create_directories(cfg.output_dir);
  json j{{"w", std::vector<double>(r.w.data(), r.w.data() + r.w.size())},
         {"objective", r.objective},
         {"objective_at_w0", rec.objective_at_w0},
         {"iterations", r.iterations},
         {"residual", r.residual},
         {"dataset", cfg.dataset.name},
         {"spectrum", spectrum_tag(cfg)},
         {"mu", problem.model.mu()}};
  std::ofstream(rec.file) << j.dump(2) << '\n';
  return rec;
}

struct ExperimentSummary {
  json manifest;
  std::filesystem::path manifest_path;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t cache_hits = 0;
  std::vector<std::filesystem::path> traces;
};

inline std::string run_hash(const std::string& cfg_hash, const std::string& label,
                            std::uint64_t seed) {
  return detail::hex64(detail::fnv1a(cfg_hash + "|" + label + "|" + std::to_string(seed)));
}

inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, bool force = false) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const std::string chash = config_hash(cfg);
  const std::string spec_tag = spectrum_tag(cfg);

  ExperimentSummary summary;
  summary.manifest_path = cfg.output_dir / kManifestName;

  json previous;
  if (!force && fs::exists(summary.manifest_path)) {
    std::ifstream in(summary.manifest_path);
    previous = json::parse(in, nullptr, false);
    if (previous.is_discarded()) previous = json();
  }
  auto previous_run = [&](const std::string& rh) -> const json* {
    if (!previous.is_object() || !previous.contains("runs")) return nullptr;
    for (const auto& r : previous["runs"])
      if (r.value("run_hash", "") == rh && r.value("status", "") == "ok") return &r;
    return nullptr;
  };

  struct Job {
    const MethodSpec* method;
    std::uint64_t seed;
    std::string hash;
    fs::path trace;
    json record;
    bool cached = false;
  };
  std::vector<Job> jobs;
  for (const auto& m : cfg.methods)
    for (auto seed : cfg.seeds) {
      Job j{&m, seed, run_hash(chash, m.label, seed),
            cfg.output_dir / trace_file_name(cfg.dataset.name, spec_tag, m.label, seed),
            json::object()};
      if (const json* prev = previous_run(j.hash); prev && fs::exists(j.trace)) {
        j.record = *prev;
        j.record["cache_hit"] = true;
        j.cached = true;
      }
      jobs.push_back(std::move(j));
    }

  json manifest{{"config_hash", chash},
                {"name", cfg.name},
                {"version", kVersion},
                {"dataset", cfg.dataset.name},
                {"spectrum", spec_tag},
                {"pass_budget", cfg.pass_budget},
                {"grid_seeds", cfg.grid_seeds},
                {"grid", json::object()}};

  const bool all_cached = std::all_of(jobs.begin(), jobs.end(), [](const Job& j) { return j.cached; });
  std::optional<Problem> problem;
  std::optional<ReferenceRecord> ref;
  std::string setup_error;
  if (!all_cached) {
    try {
      problem.emplace(build_problem(cfg));
      ref = obtain_reference(cfg, *problem, force);
      manifest["reference"] = {{"objective", ref->objective},
                               {"objective_at_w0", ref->objective_at_w0},
                               {"iterations", ref->iterations},
                               {"residual", ref->residual},
                               {"cache_hit", ref->cache_hit},
                               {"file", ref->file.filename().string()}};
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      setup_error = e.what();
      manifest["reference"] = {{"error", setup_error}};
    }
  } else if (previous.contains("reference")) {
    manifest["reference"] = previous["reference"];
  }

  // Grid selection, once per method that still has runs to do.
  std::map<std::string, ParamMap> chosen;
  std::map<std::string, std::string> grid_errors;
  for (const auto& m : cfg.methods) {
    const bool needed = std::any_of(jobs.begin(), jobs.end(), [&](const Job& j) {
      return j.method == &m && !j.cached;
    });
    if (!needed) {
      if (previous.contains("grid") && previous["grid"].contains(m.label))
        manifest["grid"][m.label] = previous["grid"][m.label];
      continue;
    }
    if (!setup_error.empty()) continue;
    try {
      GridChoice g = select_grid(m, *problem, cfg);
      chosen[m.label] = g.selected;
      if (m.is_grid())
        manifest["grid"][m.label] = {{"selected", g.selected}, {"candidates", g.candidates}};
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      grid_errors[m.label] = e.what();
    }
  }

  std::mutex io;
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t idx) {
    Job& job = jobs[idx];
    if (job.cached) return;
    json rec{{"method", job.method->label},
             {"type", job.method->type},
             {"seed", job.seed},
             {"run_hash", job.hash},
             {"config_hash", chash},
             {"cache_hit", false},
             {"trace", job.trace.filename().string()}};
    try {
      if (!setup_error.empty()) throw std::runtime_error(setup_error);
      if (auto it = grid_errors.find(job.method->label); it != grid_errors.end())
        throw std::runtime_error(it->second);
      const ParamMap& params = chosen.at(job.method->label);
      rec["params"] = params;
      Problem local = *problem;  // each worker owns its copy
      RunResult r = execute_method(job.method->type, params, local, job.seed, cfg.pass_budget);
      r.trace.metadata().config_hash = chash;
      r.trace.attach_reference(ref->objective_at_w0, ref->objective);
      r.trace.write_csv(job.trace);
      rec["status"] = "ok";
      rec["final_passes"] = r.trace.back().passes;
      rec["final_objective"] = r.trace.back().objective;
      rec["final_subopt"] = r.trace.back().subopt;
      rec["rows"] = r.trace.size();
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      rec["status"] = "failed";
      rec["error"] = e.what();
    }
    std::lock_guard<std::mutex> lock(io);
    job.record = std::move(rec);
  });

  json runs = json::array();
  for (auto& job : jobs) {
    if (job.record.value("status", "") == "ok") {
      ++summary.ok;
      summary.traces.push_back(job.trace);
    } else {
      ++summary.failed;
    }
    if (job.cached) ++summary.cache_hits;
    runs.push_back(job.record);
  }
  manifest["runs"] = std::move(runs);
  manifest["summary"] = {{"ok", summary.ok}, {"failed", summary.failed},
                         {"cache_hits", summary.cache_hits}};
  std::ofstream(summary.manifest_path) << manifest.dump(2) << '\n';
  summary.manifest = std::move(manifest);
  return summary;
}

}  // namespace sorel
