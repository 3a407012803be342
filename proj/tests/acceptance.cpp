// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any
// criterion fails, including by exceeding its runtime limit.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "oracles.hpp"
#include "sorel/sorel.hpp"

using namespace sorel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool run_criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
  Stopwatch clock;
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double t = clock.seconds();
  const bool in_time = t < limit_s;
  const bool ok = out.pass && in_time;
  std::cout << (ok ? "PASS" : "FAIL") << ' ' << id << ' ' << name << ": " << out.detail << " ["
            << fmt(t) << " s, limit " << fmt(limit_s) << " s" << (in_time ? "" : ", TOO SLOW")
            << "]" << std::endl;
  return ok;
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

ObjectiveModel standardized_least_squares(Index n, Index d, double noise, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  spec.noise = noise;
  spec.seed = seed;
  return ObjectiveModel(standardize(make_synthetic(spec)).data, LossKind::least_squares,
                        1.0 / static_cast<double>(n));
}

Outcome weights() {
  const std::vector<Index> ns{1, 2, 3, 5, 10, 100, 1000};
  std::vector<SpectralWeights> all;
  for (Index n : ns) {
    for (double a : {0.25, 0.5, 0.9}) all.push_back(cvar_weights(n, a));
    for (double r : {1.0, 2.0, 10.0}) all.push_back(esrm_weights(n, r));
    for (double r : {1.0, 2.0, 2.5, 5.0}) all.push_back(extremile_weights(n, r));
  }
  double worst_sum = 0.0;
  bool shape = true;
  for (const auto& s : all) {
    const Vector& w = s.weights();
    worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
    for (Index i = 0; i < w.size(); ++i) {
      if (w[i] < 0.0) shape = false;
      if (i > 0 && w[i] < w[i - 1]) shape = false;
    }
  }
  double esrm_gap = 0.0;
  bool extremile_exact = true;
  for (Index n : ns) {
    const Vector u = Vector::Constant(n, 1.0 / static_cast<double>(n));
    esrm_gap = std::max(esrm_gap, max_abs(esrm_weights(n, 1e-9).weights() - u));
    const Vector e = extremile_weights(n, 1.0).weights();
    for (Index i = 0; i < n; ++i) extremile_exact &= e[i] == e[0];
    extremile_exact &= e[0] == u[0];
  }
  Outcome o;
  o.pass = shape && worst_sum <= 1e-12 && esrm_gap <= 1e-6 && extremile_exact;
  o.detail = std::to_string(all.size()) + " vectors, sorted/nonnegative=" +
             (shape ? "yes" : "no") + ", max |sum-1|=" + fmt(worst_sum) +
             ", ESRM(1e-9) vs uniform=" + fmt(esrm_gap) +
             ", extremile r=1 exactly uniform=" + (extremile_exact ? "yes" : "no");
  return o;
}

Outcome projection() {
  std::mt19937_64 gen(2024);
  double oracle_err = 0.0, vi = -std::numeric_limits<double>::infinity();
  for (Index n = 2; n <= 5; ++n)
    for (int t = 0; t < 200; ++t) {
      const Vector sigma = oracle::random_simplex_sorted(gen, n);
      const Vector p = oracle::random_normal(gen, n, 2.0);
      const Vector x = project(p, SpectralWeights(sigma));
      oracle_err = std::max(oracle_err, max_abs(x - oracle::project(p, sigma)));
      const auto V = oracle::vertices(sigma);
      for (Index j = 0; j < V.cols(); ++j) vi = std::max(vi, (p - x).dot(V.col(j) - x));
    }
  double idem = 0.0, expansion = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000; ++t) {
    const Index n = 2 + t % 30;
    const SpectralWeights s(oracle::random_simplex_sorted(gen, n));
    const Vector a = oracle::random_normal(gen, n), b = oracle::random_normal(gen, n);
    const Vector pa = project(a, s), pb = project(b, s);
    idem = std::max(idem, max_abs(project(pa, s) - pa));
    expansion = std::max(expansion, (pa - pb).norm() - (a - b).norm());
  }
  Outcome o;
  o.pass = oracle_err <= 1e-8 && vi <= 1e-8 && idem <= 1e-8 && expansion <= 1e-12;
  o.detail = "800 points vs min-norm-point oracle max err=" + fmt(oracle_err) +
             ", max VI violation=" + fmt(vi) + ", idempotence err=" + fmt(idem) +
             ", max expansion=" + fmt(expansion);
  return o;
}

Outcome dual_equivalence() {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> U(0.05, 5.0);
  double err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 4;
    const Vector sigma = oracle::random_simplex_sorted(gen, n);
    const SpectralWeights s(sigma);
    const Vector lambda = project(oracle::random_normal(gen, n), s);
    const Vector v = oracle::random_normal(gen, n);
    const double eta = U(gen);
    err = std::max(err, max_abs(dual_update(lambda, v, eta, s) -
                                oracle::proximal_argmin(lambda, v, eta, sigma)));
  }
  return {err <= 1e-7, "100 instances, max |update - Frank-Wolfe argmin|=" + fmt(err)};
}

Outcome gradients() {
  std::mt19937_64 gen(4);
  double worst_ls = 0.0, worst_lg = 0.0;
  for (auto kind : {LossKind::least_squares, LossKind::logistic}) {
    Dataset data;
    data.features = Matrix(50, 6);
    data.targets = Vector(50);
    std::normal_distribution<double> N(0.0, 1.0);
    for (Index i = 0; i < 50; ++i) {
      for (Index j = 0; j < 6; ++j) data.features(i, j) = N(gen);
      data.targets[i] = kind == LossKind::logistic ? (N(gen) > 0 ? 1.0 : -1.0) : 2.0 * N(gen);
    }
    ObjectiveModel m(data, kind, 0.0);
    double& worst = kind == LossKind::least_squares ? worst_ls : worst_lg;
    for (int t = 0; t < 500; ++t) {
      const Index i = t % 50;
      const Vector w = oracle::random_normal(gen, 6);
      const Vector g = m.grad_at(i, w);
      const Vector fd = oracle::fd_gradient([&](const Vector& u) { return m.loss_at(i, u); }, w);
      worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
    }
  }
  std::uniform_real_distribution<double> U(0.01, 10.0);
  double prox = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double mu = U(gen) / 10.0, alpha = U(gen), tau = U(gen);
    Dataset tiny;
    tiny.features = Matrix::Ones(1, 5);
    tiny.targets = Vector::Ones(1);
    ObjectiveModel m(tiny, LossKind::least_squares, mu);
    const Vector x = oracle::random_normal(gen, 5, 3.0), anchor = oracle::random_normal(gen, 5, 3.0);
    const Vector u = m.prox_step(x, anchor, alpha, tau);
    prox = std::max(prox, (mu * u + (u - anchor) / tau + (u - x) / alpha).norm());
  }
  Outcome o;
  o.pass = worst_ls <= 1e-5 && worst_lg <= 1e-5 && prox <= 1e-8;
  o.detail = "FD rel err least squares=" + fmt(worst_ls) + ", logistic=" + fmt(worst_lg) +
             " (500 pairs each), prox residual=" + fmt(prox) + " (200 instances)";
  return o;
}

Outcome erm_reduction() {
  const ObjectiveModel m = standardized_least_squares(200, 10, 0.5, 0);
  const auto sigma = SpectralWeights::uniform(200);
  const double f_ridge = m.primal_objective(sigma, ridge_closed_form(m));
  std::vector<std::pair<std::string, double>> gaps;

  gaps.emplace_back("sorel-practical",
                    m.primal_objective(sigma, run_sorel(m, sigma, ScheduleParams::practical(200, 1.0, 0.01),
                                                        300, 1).w) - f_ridge);
  SorelOptions exact;
  exact.exact_inner = true;
  const auto theo = ScheduleParams::theoretical(m.mu(), m.smoothness(), m.lipschitz());
  gaps.emplace_back("sorel-theoretical",
                    m.primal_objective(sigma, run_sorel(m, sigma, theo, 2000, 1, exact).w) - f_ridge);

  BaselineConfig c;
  c.batch_size = 200;
  c.step_size = 1.0 / m.smoothness();
  c.pass_budget = 3000;
  gaps.emplace_back("sgd-full-batch", m.primal_objective(sigma, run_sgd(m, sigma, c).w) - f_ridge);
  c.method = BaselineMethod::lsvrg;
  c.step_size = 0.01;
  c.pass_budget = 300;
  gaps.emplace_back("lsvrg", m.primal_objective(sigma, run_lsvrg(m, sigma, c).w) - f_ridge);
  c.method = BaselineMethod::prospect;
  gaps.emplace_back("prospect", m.primal_objective(sigma, run_prospect(m, sigma, c).w) - f_ridge);

  Outcome o;
  for (const auto& [name, gap] : gaps) {
    o.pass &= std::abs(gap) <= 1e-5;
    o.detail += (o.detail.empty() ? "" : ", ") + name + "=" + fmt(gap);
  }
  o.detail = "objective gap to ridge: " + o.detail;
  return o;
}

Outcome rate_trend() {
  // G is the loss Lipschitz constant on a ball of radius 0.1 around w*; the
  // start point sits on that ball and the run checks it never leaves it.
  const double radius = 0.1;
  const std::vector<std::size_t> checkpoints{25, 50, 100, 200};
  std::vector<double> err(checkpoints.size(), 0.0);
  double farthest = 0.0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    SyntheticSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    const ObjectiveModel m(standardize(make_synthetic(spec)).data, LossKind::least_squares,
                           1.0 / 200.0);
    const auto sigma = extremile_weights(200, 2.5);
    const Vector wstar = reference_solution(m, sigma, 1e-10);
    CounterRng rng(static_cast<std::uint64_t>(seed), 77);
    std::normal_distribution<double> N(0.0, 1.0);
    Vector u(m.d());
    for (Index j = 0; j < m.d(); ++j) u[j] = N(rng);
    SorelOptions opts;
    opts.exact_inner = true;
    opts.initial_w = wstar + radius * u.normalized();
    const double G = m.lipschitz_on_ball(wstar, radius);
    SorelSolver solver(m, sigma, ScheduleParams::theoretical(m.mu(), m.smoothness(), G),
                       static_cast<std::uint64_t>(seed), opts);
    std::size_t next = 0;
    while (next < checkpoints.size()) {
      solver.step();
      farthest = std::max(farthest, (solver.w() - wstar).norm());
      if (solver.outer_index() == checkpoints[next])
        err[next++] += (solver.w() - wstar).squaredNorm() / seeds;
    }
  }
  Outcome o;
  o.detail = "mean ||w_K - w*||^2 at K=25,50,100,200: ";
  for (std::size_t i = 0; i < err.size(); ++i) o.detail += (i ? ", " : "") + fmt(err[i]);
  o.detail += "; ratios ";
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double ratio = err[i + 1] / err[i];
    o.pass &= ratio <= 0.5;
    o.detail += (i ? ", " : "") + fmt(ratio);
  }
  o.pass &= farthest <= radius;
  o.detail += "; max ||w_k - w*||=" + fmt(farthest) + " (G valid within " + fmt(radius) + ")";
  return o;
}

Outcome stabilization() {
  const auto seq = oscillation_demo(1.0, 0.5, 500);
  double alt = 0.0;
  for (std::size_t k = 1; k < seq.size(); ++k)
    alt = std::max(alt, std::abs(seq[k] - (k % 2 == 1 ? -1.0 : 1.0)));

  ObjectiveModel toy(oscillation_toy_dataset(), LossKind::least_squares, 0.1);
  const auto sigma = cvar_weights(2, 0.5);
  const double G = toy.lipschitz_on_ball(Vector::Zero(1), 1.5);
  const auto sched = ScheduleParams::theoretical(0.1, toy.smoothness(), G);
  const Vector w0 = Vector::Constant(1, 0.5);
  const double f0 = toy.primal_objective(sigma, w0);
  const double fstar = toy.primal_objective(sigma, Vector::Zero(1));
  SorelOptions opts;
  opts.initial_w = w0;
  const Vector w_stoch = run_sorel(toy, sigma, sched, 200, 3, opts).w;
  opts.exact_inner = true;
  const Vector w_exact = run_sorel(toy, sigma, sched, 200, 3, opts).w;
  const double sub_stoch = suboptimality(toy.primal_objective(sigma, w_stoch), f0, fstar);
  const double sub_exact = suboptimality(toy.primal_objective(sigma, w_exact), f0, fstar);
  Outcome o;
  o.pass = alt <= 1e-6 && sub_stoch <= 1e-6 && sub_exact <= 1e-6;
  o.detail = "alternation max dev=" + fmt(alt) + ", sorel subopt after 200 iters: stochastic " +
             fmt(sub_stoch) + " (|w|=" + fmt(std::abs(w_stoch[0])) + "), exact " + fmt(sub_exact) +
             " (|w|=" + fmt(std::abs(w_exact[0])) + ")";
  return o;
}

Outcome condition1() {
  bool analysis = true;
  for (double mu : {1e-3, 0.05, 1.0})
    for (double G : {0.5, 10.0})
      analysis &= validate_condition1(ScheduleParams::theoretical(mu, 4.0, G), G, mu, 100000).all_hold();

  auto theta_broken = ScheduleParams::theoretical(0.5, 1.0, 1.0);
  theta_broken.theta = [](std::size_t) { return 1.0; };
  const auto r1 = validate_condition1(theta_broken, 1.0, 0.5, 50);
  auto eta_broken = ScheduleParams::theoretical(0.5, 1.0, 1.0);
  eta_broken.eta = [](std::size_t) { return 0.01; };
  const auto r2 = validate_condition1(eta_broken, 1.0, 0.5, 50);

  const bool c_ok = !r1.checks[2].holds && r1.checks[2].first_violation == 0u;
  const bool a_ok = !r2.checks[0].holds && r2.checks[0].first_violation == 0u;
  Outcome o;
  o.pass = analysis && c_ok && a_ok;
  o.detail = std::string("analysis schedule holds to k=1e5: ") + (analysis ? "yes" : "no") +
             "; constant theta fails (c) at k=0: " + (c_ok ? "yes" : "no") +
             "; constant eta fails (a) at k=0: " + (a_ok ? "yes" : "no");
  return o;
}

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    path = fs::temp_directory_path() / ("sorel_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

double tail_subopt(const TrainingTrace& t, double window = 10.0) {
  const double cutoff = t.back().passes - window;
  double sum = 0.0;
  int count = 0;
  for (const auto& r : t.rows())
    if (r.passes > cutoff || &r == &t.back()) {
      sum += r.subopt;
      ++count;
    }
  return sum / count;
}

Outcome baseline_bias() {
  ScratchDir dir;
  std::ostringstream cfg;
  cfg << "[experiment]\nname = bias\noutput_dir = " << (dir.path / "out").string()
      << "\nseeds = 1, 2, 3\ngrid_seeds = 3\npass_budget = 200\nreference_tol = 1e-12\nthreads = 4\n"
      << "[dataset]\nn = 200\nd = 5\nnoise = 3\nseed = 0\n"
      << "[spectrum]\nfamily = cvar\nparam = 0.5\n"
      << "[method:sorel]\nschedule = practical\nc = 0.1, 0.4, 1\nalpha = 3e-4, 1e-3, 3e-3\n"
      << "[method:sgd]\nbatch_size = 16\n"
      << "alpha = 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3\n";
  const auto summary = run_experiment(parse_config(cfg.str()));
  if (summary.failed > 0) return {false, "harness reported failed runs"};

  double sorel_final = 0.0, sgd_plateau = 0.0, sgd_min_plateau = 1e300;
  for (const auto& run : summary.manifest["runs"]) {
    const auto trace = TrainingTrace::read_csv(dir.path / "out" / run["trace"].get<std::string>());
    if (run["method"] == "sorel") sorel_final += trace.back().subopt / 3.0;
    else {
      const double p = tail_subopt(trace);
      sgd_plateau += p / 3.0;
      sgd_min_plateau = std::min(sgd_min_plateau, p);
    }
  }
  const auto& grid = summary.manifest["grid"];
  Outcome o;
  o.pass = sorel_final <= 1e-8 && sgd_plateau > 1e-3;
  o.detail = "sorel " + grid["sorel"]["selected"].dump() + " mean final subopt=" + fmt(sorel_final) +
             "; sgd m=16 " + grid["sgd"]["selected"].dump() +
             " mean last-10-pass subopt=" + fmt(sgd_plateau) + " (lowest seed " +
             fmt(sgd_min_plateau) + ")";
  return o;
}

Outcome harness() {
  ScratchDir dir;
  std::ostringstream cfg;
  cfg << "[experiment]\nname = contracts\noutput_dir = " << (dir.path / "out").string()
      << "\nseeds = 1, 2\npass_budget = 12\n"
      << "[dataset]\nn = 50\nd = 4\nseed = 5\n"
      << "[spectrum]\nfamily = esrm\nparam = 2\n"
      << "[method:sorel]\nschedule = practical\nc = 1\nalpha = 0.01\n"
      << "[method:prospect]\nalpha = 0.01\n";
  const auto config = parse_config(cfg.str());
  const auto first = run_experiment(config);

  bool schema = first.failed == 0 && first.traces.size() == 4;
  bool accounting = true;
  for (const auto& p : first.traces) {
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    schema &= header == "k,passes,seconds,objective,subopt";
    const auto t = TrainingTrace::read_csv(p);
    schema &= t.is_monotone() && t.has_reference();
    if (p.filename().string().find("__sorel__") != std::string::npos) {
      // practical mode: T_k = n, so each outer step costs 2 + T_k/n = 3 passes
      const double expected = 2.0 + 50.0 / 50.0;
      for (std::size_t i = 1; i < t.size(); ++i)
        accounting &= std::abs(t.rows()[i].passes - t.rows()[i - 1].passes - expected) < 1e-12;
    }
  }
  std::vector<std::string> before;
  for (const auto& p : first.traces) {
    std::ifstream in(p);
    before.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const auto second = run_experiment(config);
  bool idempotent = second.cache_hits == 4 && second.failed == 0;
  for (std::size_t i = 0; i < first.traces.size(); ++i) {
    std::ifstream in(first.traces[i]);
    idempotent &= std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()) ==
                  before[i];
  }
  Outcome o;
  o.pass = schema && accounting && idempotent;
  o.detail = std::string("schema ") + (schema ? "ok" : "BAD") + ", passes per outer step = 2 + T/n " +
             (accounting ? "ok" : "BAD") + ", rerun cache hits " +
             std::to_string(second.cache_hits) + "/4 with unchanged traces " +
             (idempotent ? "ok" : "BAD");
  return o;
}

}  // namespace

int main() {
  warning_handler() = nullptr;
  bool all = true;
  all &= run_criterion(1, "weight generators", 1.0, weights);
  all &= run_criterion(2, "permutahedron projection", 30.0, projection);
  all &= run_criterion(3, "dual update equivalence", 30.0, dual_equivalence);
  all &= run_criterion(4, "gradient correctness", 10.0, gradients);
  all &= run_criterion(5, "ERM reduction", 60.0, erm_reduction);
  all &= run_criterion(6, "rate trend", 300.0, rate_trend);
  all &= run_criterion(7, "stabilization counterexample", 30.0, stabilization);
  all &= run_criterion(8, "condition 1 validator", 5.0, condition1);
  all &= run_criterion(9, "baseline bias", 300.0, baseline_bias);
  all &= run_criterion(10, "harness contracts", 60.0, harness);
  return all ? 0 : 1;
}
