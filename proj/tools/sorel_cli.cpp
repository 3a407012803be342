// Command-line front end. Exit codes: 0 success, 1 config error, 2 runtime failure.

#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "sorel/sorel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeFailure = 2;

sorel::ExperimentConfig load(const std::string& path, bool require_files) {
  auto cfg = sorel::load_config(path);
  sorel::apply_env_overrides(cfg);
  if (require_files)
    for (const auto& f : cfg.missing_files())
      throw sorel::config_error("referenced file does not exist: " + f.string());
  return cfg;
}

int cmd_run(const std::string& path, bool force) {
  const auto cfg = load(path, false);
  const auto summary = sorel::run_experiment(cfg, force);
  std::cout << "runs: " << summary.ok << " ok, " << summary.failed << " failed, "
            << summary.cache_hits << " cache hits\n"
            << "manifest: " << summary.manifest_path.string() << '\n';
  for (const auto& r : summary.manifest["runs"])
    if (r.value("status", "") != "ok")
      std::cerr << "failed: " << r.value("method", "?") << " seed " << r.value("seed", 0) << ": "
                << r.value("error", "") << '\n';
  return summary.failed == 0 ? kOk : kRuntimeFailure;
}

int cmd_plot(const std::string& dir, const std::string& x, double floor, const std::string& out) {
  sorel::PlotOptions opt;
  try {
    opt.x = sorel::x_axis_from_string(x);
  } catch (const std::invalid_argument& e) {
    throw sorel::config_error(e.what());
  }
  opt.floor = floor;
  opt.out_dir = out;
  const auto traces = sorel::discover_traces(dir);
  if (traces.empty()) {
    std::cerr << "error: no trace files in " << dir << '\n';
    return kRuntimeFailure;
  }
  const auto outputs = sorel::emit_plots(traces, opt);
  std::cout << "table: " << outputs.table.string() << '\n';
  for (const auto& c : outputs.charts) std::cout << "chart: " << c.string() << '\n';
  return kOk;
}

int cmd_reference(const std::string& path, bool force) {
  const auto cfg = load(path, true);
  const auto problem = sorel::build_problem(cfg);
  const auto ref = sorel::obtain_reference(cfg, problem, force);
  std::cout << std::setprecision(17) << "objective: " << ref.objective << '\n'
            << "objective_at_w0: " << ref.objective_at_w0 << '\n'
            << "iterations: " << ref.iterations << (ref.cache_hit ? " (cached)" : "") << '\n'
            << "residual: " << ref.residual << '\n'
            << "file: " << ref.file.string() << '\n';
  return kOk;
}

int cmd_validate(const std::string& path, std::size_t horizon) {
  const auto cfg = load(path, true);
  const auto problem = sorel::build_problem(cfg);
  bool any = false, all_hold = true;
  for (const auto& m : cfg.methods) {
    if (m.type != "sorel") continue;
    for (const auto& params : m.expand_grid()) {
      any = true;
      sorel::ParamReader p(params, "method " + m.label);
      const auto schedule = sorel::make_schedule(p, problem.model);
      const double G = p.real("g", problem.model.lipschitz());
      const auto report = sorel::validate_condition1(schedule, G, problem.model.mu(), horizon);
      std::cout << "[" << m.label << "]";
      for (const auto& [k, v] : params) std::cout << ' ' << k << '=' << v;
      std::cout << "  (G=" << G << ", mu=" << problem.model.mu() << ", horizon=" << horizon
                << ")\n"
                << report.summary();
      all_hold = all_hold && report.all_hold();
    }
  }
  if (!any) throw sorel::config_error("no sorel method in the config");
  return all_hold ? kOk : kRuntimeFailure;
}

int cmd_oscillation(double alpha, double w0, std::size_t T, std::size_t K) {
  const auto seq = sorel::oscillation_demo(alpha, w0, T, K);
  std::cout << std::setprecision(12);
  for (std::size_t k = 0; k < seq.size(); ++k) std::cout << "w_" << k << " = " << seq[k] << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral risk minimization with SOREL and baselines"};
  app.set_version_flag("--version", sorel::kVersion);
  app.require_subcommand(1);

  std::string config, trace_dir, x_axis = "passes", out_dir;
  bool force = false;
  double floor = 1e-12, alpha = 1.0, w0 = 0.5;
  std::size_t horizon = 100000, T = 500, K = 10;

  auto* run = app.add_subcommand("run", "run every (method, seed) in a config");
  run->add_option("config", config, "config file")->required();
  run->add_flag("--force", force, "ignore cached results");

  auto* plot = app.add_subcommand("plot", "tidy table and SVG charts from trace files");
  plot->add_option("trace-dir", trace_dir, "directory with trace CSV files")->required();
  plot->add_option("--x", x_axis, "x axis: passes or seconds");
  plot->add_option("--floor", floor, "clamp value for the log-scale y axis");
  plot->add_option("--out", out_dir, "output directory (default: trace-dir)");

  auto* reference = app.add_subcommand("reference", "compute the reference solution");
  reference->add_option("config", config, "config file")->required();
  reference->add_flag("--force", force, "recompute even if stored");

  auto* validate = app.add_subcommand("validate-schedule",
                                      "check the parameter inequalities for sorel schedules");
  validate->add_option("config", config, "config file")->required();
  validate->add_option("--horizon", horizon, "last outer index checked")->required();

  auto* demo = app.add_subcommand("demo-oscillation", "undamped alternation on the two-loss toy");
  demo->add_option("--alpha", alpha, "inner step size");
  demo->add_option("--w0", w0, "starting point");
  demo->add_option("--T", T, "inner steps per outer iteration");
  demo->add_option("--K", K, "outer iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, force);
    if (*plot) return cmd_plot(trace_dir, x_axis, floor, out_dir);
    if (*reference) return cmd_reference(config, force);
    if (*validate) return cmd_validate(config, horizon);
    if (*demo) return cmd_oscillation(alpha, w0, T, K);
  } catch (const sorel::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kConfigError;
}
