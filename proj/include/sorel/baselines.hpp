#pragma once

// Comparison optimizers, the high-accuracy reference solver, and the
// two-sample counterexample where the undamped alternation oscillates.

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "sorel/common.hpp"
#include "sorel/objective.hpp"
#include "sorel/permutahedron.hpp"
#include "sorel/rng.hpp"
#include "sorel/schedule.hpp"
#include "sorel/solver.hpp"
#include "sorel/spectra.hpp"
#include "sorel/trace.hpp"

namespace sorel {

enum class BaselineMethod { sgd, lsvrg, prospect, reference };

inline std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::sgd: return "sgd";
    case BaselineMethod::lsvrg: return "lsvrg";
    case BaselineMethod::prospect: return "prospect";
    case BaselineMethod::reference: return "reference";
  }
  return "reference";
}

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::sgd;
  double step_size = 1e-2;
  std::size_t batch_size = 64;    // sgd
  std::size_t epoch_length = 0;   // lsvrg; 0 means n
  std::uint64_t seed = 0;
  double pass_budget = 100.0;
  std::optional<Vector> initial_w;
  double divergence_norm = 1e8;

  void validate(Index n) const {
    require(step_size > 0.0, "baseline step size must be positive");
    require(pass_budget > 0.0, "baseline pass budget must be positive");
    if (method == BaselineMethod::sgd) {
      require(batch_size >= 1, "sgd batch size must be at least 1");
      require(batch_size <= static_cast<std::size_t>(n), "sgd batch size exceeds n");
    }
  }
};

namespace detail {

/// Appends a trace row each time the pass counter crosses an integer.
class PassLogger {
 public:
  PassLogger(const ObjectiveModel& model, const SpectralWeights& sigma, TrainingTrace& trace)
      : model_(model), sigma_(sigma), trace_(trace) {}

  void start(const Vector& w) { log(0, 0.0, w); }

  void maybe_log(std::uint64_t k, const EvalCounter& counter, const Vector& w) {
    if (counter.passes() + 1e-12 >= next_) {
      log(k, counter.passes(), w);
      while (next_ <= counter.passes() + 1e-12) next_ += 1.0;
    }
  }

  void finish(std::uint64_t k, const EvalCounter& counter, const Vector& w) {
    if (trace_.empty() || trace_.back().passes < counter.passes()) log(k, counter.passes(), w);
  }

 private:
  void log(std::uint64_t k, double passes, const Vector& w) {
    trace_.add({k, passes, clock_.seconds(), model_.primal_objective(sigma_, w)});
  }

  const ObjectiveModel& model_;
  const SpectralWeights& sigma_;
  TrainingTrace& trace_;
  Stopwatch clock_;
  double next_ = 1.0;
};

inline Vector start_point(const ObjectiveModel& model, const std::optional<Vector>& w0) {
  Vector w = w0 ? *w0 : Vector::Zero(model.d());
  if (w.size() != model.d()) throw std::invalid_argument("initial point has wrong dimension");
  return w;
}

}  // namespace detail

/// Minibatch subgradient descent. The batch losses are sorted and weighted by
/// the same spectrum family regenerated at the batch size, which is biased
/// whenever the batch is smaller than n.
inline RunResult run_sgd(const ObjectiveModel& model, const SpectralWeights& sigma,
                         const BaselineConfig& config) {
  config.validate(model.n());
  const Index n = model.n();
  const auto m = static_cast<Index>(config.batch_size);
  const SpectralWeights batch_sigma =
      m == n ? sigma : make_spectrum(sigma.family(), static_cast<std::size_t>(m), sigma.parameter());

  RunResult result;
  result.trace.metadata().seed = config.seed;
  Vector w = detail::start_point(model, config.initial_w);
  EvalCounter counter(n);
  detail::PassLogger logger(model, sigma, result.trace);
  logger.start(w);

  CounterRng rng(config.seed, 0);
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  Vector batch_losses(m);
  std::uint64_t step = 0;
  while (counter.passes() < config.pass_budget) {
    // Partial Fisher-Yates: the first m slots become a sample without replacement.
    for (Index j = 0; j < m; ++j) {
      const auto pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - j)));
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
    }
    for (Index j = 0; j < m; ++j) batch_losses[j] = model.loss_at(pool[static_cast<std::size_t>(j)], w);
    const auto order = sort_permutation(batch_losses);
    Vector grad = model.regularizer_grad(w);
    for (Index j = 0; j < m; ++j)
      model.add_grad_at(pool[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])], w,
                        batch_sigma[j], grad);
    w -= config.step_size * grad;
    check_iterate(w, config.divergence_norm);
    counter.add(static_cast<std::uint64_t>(m));
    logger.maybe_log(++step, counter, w);
  }
  logger.finish(step, counter, w);
  result.w = std::move(w);
  return result;
}

/// Loopless-epoch SVRG on the spectral risk with the dual weights taken from
/// the linear maximization oracle at every checkpoint (no smoothing). Between
/// checkpoints the weights are frozen.
inline RunResult run_lsvrg(const ObjectiveModel& model, const SpectralWeights& sigma,
                           const BaselineConfig& config) {
  config.validate(model.n());
  const Index n = model.n();
  const std::size_t epoch = config.epoch_length == 0 ? static_cast<std::size_t>(n)
                                                     : config.epoch_length;
  RunResult result;
  result.trace.metadata().seed = config.seed;
  Vector w = detail::start_point(model, config.initial_w);
  EvalCounter counter(n);
  detail::PassLogger logger(model, sigma, result.trace);
  logger.start(w);

  CounterRng rng(config.seed, 0);
  Vector w_ref = w, lambda_ref, g_ref;
  std::uint64_t step = 0;
  while (counter.passes() < config.pass_budget) {
    if (step % epoch == 0) {
      w_ref = w;
      lambda_ref = lmo(model.full_loss_vector(w_ref, &counter), sigma);
      g_ref = model.weighted_full_grad(lambda_ref, w_ref, &counter);
    }
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    Vector d = variance_reduced_direction(model, lambda_ref, i, w, w_ref, g_ref);
    d += model.regularizer_grad(w);
    w -= config.step_size * d;
    check_iterate(w, config.divergence_norm);
    counter.add(1);
    logger.maybe_log(++step, counter, w);
  }
  logger.finish(step, counter, w);
  result.w = std::move(w);
  return result;
}

/// Per-sample loss table kept sorted under single-entry updates, so the LMO
/// weight of any sample is available in O(1) and an update costs O(n).
/// Ranks break ties by sample index, matching lmo().
class LossTable {
 public:
  LossTable(const Vector& losses, const SpectralWeights& sigma)
      : values_(losses), sigma_(sigma), order_(sort_permutation(losses)),
        rank_(static_cast<std::size_t>(losses.size())) {
    if (static_cast<std::size_t>(losses.size()) != sigma.size())
      throw std::invalid_argument("LossTable: losses and spectrum differ in length");
    for (std::size_t r = 0; r < order_.size(); ++r)
      rank_[static_cast<std::size_t>(order_[r])] = r;
  }

  void update(Index j, double value) {
    if (!std::isfinite(value)) throw divergence_error("loss table received a non-finite loss");
    values_[j] = value;
    std::size_t r = rank_[static_cast<std::size_t>(j)];
    auto before = [&](Index a, Index b) {
      return values_[a] < values_[b] || (values_[a] == values_[b] && a < b);
    };
    while (r > 0 && before(j, order_[r - 1])) {
      order_[r] = order_[r - 1];
      rank_[static_cast<std::size_t>(order_[r])] = r;
      --r;
    }
    while (r + 1 < order_.size() && before(order_[r + 1], j)) {
      order_[r] = order_[r + 1];
      rank_[static_cast<std::size_t>(order_[r])] = r;
      ++r;
    }
    order_[r] = j;
    rank_[static_cast<std::size_t>(j)] = r;
  }

  double weight(Index i) const {
    return sigma_[static_cast<Index>(rank_[static_cast<std::size_t>(i)])];
  }

  Vector weights() const {
    Vector out(values_.size());
    for (Index i = 0; i < out.size(); ++i) out[i] = weight(i);
    return out;
  }

  const Vector& values() const { return values_; }

 private:
  Vector values_;
  const SpectralWeights& sigma_;
  std::vector<Index> order_;
  std::vector<std::size_t> rank_;
};

/// Prospect without the smoothing term. Reimplementation choice: SAGA-style
/// gradient table with the weight each gradient was stored under, so the
/// correction sum_i rho_i g_i keeps the direction unbiased for the current
/// weights; one uniformly drawn loss-table entry is refreshed per step.
inline RunResult run_prospect(const ObjectiveModel& model, const SpectralWeights& sigma,
                              const BaselineConfig& config) {
  config.validate(model.n());
  const Index n = model.n();
  const Index d = model.d();
  RunResult result;
  result.trace.metadata().seed = config.seed;
  Vector w = detail::start_point(model, config.initial_w);
  EvalCounter counter(n);
  detail::PassLogger logger(model, sigma, result.trace);
  logger.start(w);

  LossTable table(model.full_loss_vector(w, &counter), sigma);
  Matrix grad_table(d, n);
  Vector stored_weight = table.weights();
  Vector g_avg = Vector::Zero(d);
  for (Index i = 0; i < n; ++i) {
    grad_table.col(i) = model.grad_at(i, w);
    g_avg += stored_weight[i] * grad_table.col(i);
  }
  counter.add(static_cast<std::uint64_t>(n));

  CounterRng rng(config.seed, 0);
  const double nd = static_cast<double>(n);
  std::uint64_t step = 0;
  while (counter.passes() < config.pass_budget) {
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    const Vector grad_i = model.grad_at(i, w);
    const double lam_i = table.weight(i);
    Vector dir = nd * lam_i * grad_i - nd * stored_weight[i] * grad_table.col(i) + g_avg;
    dir += model.regularizer_grad(w);
    g_avg += lam_i * grad_i - stored_weight[i] * grad_table.col(i);
    grad_table.col(i) = grad_i;
    stored_weight[i] = lam_i;
    w -= config.step_size * dir;
    check_iterate(w, config.divergence_norm);

    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    table.update(j, model.loss_at(j, w));
    counter.add(2);
    logger.maybe_log(++step, counter, w);
  }
  logger.finish(step, counter, w);
  result.w = std::move(w);
  return result;
}

struct ReferenceOptions {
  std::size_t warm_start_iters = 300;
  std::size_t max_iters = 200000;
  /// Constant primal proximal parameter of the polishing stage; 0 picks
  /// 1/||J||, with J the Jacobian of the loss map at the warm start.
  double tau = 0.0;
  double eta = 0.0;
};

struct ReferenceResult {
  Vector w;
  double objective = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Spectral norm of the loss-map Jacobian at w (rows: grad l_i(w)).
inline double loss_jacobian_norm(const ObjectiveModel& model, const Vector& w) {
  const Vector margins = model.data().features * w;
  Vector scale(model.n());
  for (Index i = 0; i < model.n(); ++i) scale[i] = model.dloss_dmargin(i, margins[i]);
  const Matrix jac = scale.asDiagonal() * model.data().features;
  Eigen::JacobiSVD<Matrix> svd(jac);
  return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
}

/// High-accuracy minimizer of R_sigma(w) + g(w).
///
/// Stage 1: full-batch subgradient descent with decreasing steps.
/// Stage 2: the primal-dual iteration with exact primal solves, constant
/// (theta = 1, eta, tau), run until both ||w_{k+1} - w_k|| / tau and
/// ||lambda_{k+1} - lambda_k|| / eta fall below tol. The primal change alone is
/// not enough: w can stall for a step while lambda is still moving.
inline ReferenceResult reference_solution_detailed(const ObjectiveModel& model,
                                                   const SpectralWeights& sigma, double tol,
                                                   const ReferenceOptions& options = {}) {
  require(tol > 0.0, "reference_solution: tol must be positive");
  if (sigma.size() != static_cast<std::size_t>(model.n()))
    throw std::invalid_argument("reference_solution: spectrum length differs from n");

  Vector w = Vector::Zero(model.d());
  Vector best = w;
  double best_obj = model.primal_objective(sigma, w);
  const double L = model.smoothness();
  for (std::size_t t = 0; t < options.warm_start_iters; ++t) {
    const Vector lambda = lmo(model.full_loss_vector(w), sigma);
    const Vector g = model.weighted_full_grad(lambda, w) + model.regularizer_grad(w);
    w -= g / (L + model.mu() * static_cast<double>(t + 1));
    const double obj = model.primal_objective(sigma, w);
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  }

  double tau = options.tau;
  double eta = options.eta;
  if (tau <= 0.0 || eta <= 0.0) {
    const double jac = std::max(loss_jacobian_norm(model, best), 1e-12);
    if (tau <= 0.0) tau = 1.0 / jac;
    if (eta <= 0.0) eta = 1.0 / (2.0 * tau * jac * jac);
  }

  SorelOptions sopts;
  sopts.exact_inner = true;
  sopts.initial_w = best;
  SorelSolver solver(model, sigma, ScheduleParams::constant(1.0, eta, tau, 1.0, 1, 1), 0, sopts);
  double residual = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < options.max_iters) {
    const Vector lambda_before = solver.lambda();
    solver.step();
    ++it;
    residual = std::max((solver.w() - solver.w_prev()).norm() / tau,
                        (solver.lambda() - lambda_before).norm() / eta);
    if (residual < tol) break;
  }
  if (!(residual < tol)) {
    std::ostringstream os;
    os << "reference_solution: residual " << residual << " above tol " << tol << " after "
       << it << " iterations";
    throw convergence_error(os.str());
  }
  ReferenceResult out;
  out.w = solver.w();
  out.objective = model.primal_objective(sigma, out.w);
  out.iterations = it;
  out.residual = residual;
  return out;
}

inline Vector reference_solution(const ObjectiveModel& model, const SpectralWeights& sigma,
                                 double tol, const ReferenceOptions& options = {}) {
  return reference_solution_detailed(model, sigma, tol, options).w;
}

/// Undamped alternation on l1 = (w-1)^2/2, l2 = (w+1)^2/2 with sigma = [0, 1]:
/// all weight goes to the currently larger loss (to l1 on a tie), then T
/// gradient steps minimize the selected quadratic. Returns w_0, w_1, ..., w_K.
inline std::vector<double> oscillation_demo(double alpha, double w0, std::size_t T,
                                            std::size_t K = 10) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("oscillation_demo: alpha must lie in (0, 2)");
  std::vector<double> seq{w0};
  double w = w0;
  for (std::size_t k = 0; k < K; ++k) {
    const double l1 = 0.5 * (w - 1.0) * (w - 1.0);
    const double l2 = 0.5 * (w + 1.0) * (w + 1.0);
    const double lam1 = l1 >= l2 ? 1.0 : 0.0;
    const double lam2 = 1.0 - lam1;
    for (std::size_t t = 0; t < T; ++t) {
      const double g = lam1 * (w - 1.0) + lam2 * (w + 1.0);
      w -= alpha * g;
    }
    seq.push_back(w);
  }
  return seq;
}

/// The two-sample dataset behind oscillation_demo: x = 1, y = +/-1.
inline Dataset oscillation_toy_dataset() {
  Dataset data;
  data.features = Matrix::Ones(2, 1);
  data.targets = Vector(2);
  data.targets << 1.0, -1.0;
  return data;
}

}  // namespace sorel
