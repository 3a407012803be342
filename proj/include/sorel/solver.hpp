#pragma once

// Stochastic primal-dual method for spectral risk minimization with a
// stabilized dual step.
//
// Each outer iteration k:
//   v_k       = (1 + theta_k) l(w_k) - theta_k l(w_{k-1})          (dual momentum)
//   lambda    = argmin_{Pi_sigma} -v_k.lambda + ||lambda - lambda_k||^2 / (2 eta_k)
//             = project(lambda_k + eta_k v_k)
//   w_{k+1}  ~= argmin_w lambda.l(w) + g(w) + ||w - w_k||^2 / (2 tau_k)
// where the primal subproblem is solved by a prox-SVRG inner loop whose
// direction n lambda_i (grad l_i(w) - grad l_i(w_ref)) + g_ref is unbiased
// for the fixed-lambda gradient.

#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>

#include "sorel/common.hpp"
#include "sorel/objective.hpp"
#include "sorel/permutahedron.hpp"
#include "sorel/rng.hpp"
#include "sorel/schedule.hpp"
#include "sorel/spectra.hpp"
#include "sorel/trace.hpp"

namespace sorel {

struct SorelOptions {
  /// Solve each primal subproblem exactly instead of running the inner loop.
  bool exact_inner = false;
  /// Starting point; zero when unset.
  std::optional<Vector> initial_w;
  /// Stop after this many passes even if K is not reached.
  double max_passes = std::numeric_limits<double>::infinity();
  /// Samples per inner step. Values above one are a heuristic; the analysis
  /// covers single-sample steps only.
  std::size_t batch_size = 1;
  double divergence_norm = 1e8;
  double membership_tol = 1e-8;
};

inline Vector momentum_scores(const Vector& l_curr, const Vector& l_prev, double theta) {
  if (l_curr.size() != l_prev.size())
    throw std::invalid_argument("momentum_scores: loss vectors differ in length");
  return (1.0 + theta) * l_curr - theta * l_prev;
}

/// Proximal dual ascent step, equivalent to projecting lambda + eta v.
inline Vector dual_update(const Vector& lambda, const Vector& v, double eta,
                          const SpectralWeights& sigma) {
  require(eta > 0.0, "dual_update: eta must be positive");
  if (lambda.size() != v.size())
    throw std::invalid_argument("dual_update: lambda and scores differ in length");
  return project(lambda + eta * v, sigma);
}

/// n lambda_i (grad l_i(w) - grad l_i(w_ref)) + g_ref
inline Vector variance_reduced_direction(const ObjectiveModel& model, const Vector& lambda,
                                         Index i, const Vector& w, const Vector& w_ref,
                                         const Vector& g_ref) {
  const double scale = static_cast<double>(model.n()) * lambda[i];
  Vector d = g_ref;
  if (scale != 0.0) {
    model.add_grad_at(i, w, scale, d);
    model.add_grad_at(i, w_ref, -scale, d);
  }
  return d;
}

inline void check_iterate(const Vector& w, double limit) {
  if (!w.allFinite())
    throw divergence_error("iterate became non-finite; the step size is likely too large");
  if (w.norm() > limit) {
    std::ostringstream os;
    os << "iterate norm " << w.norm() << " exceeded " << limit
       << "; the step size is likely too large";
    throw divergence_error(os.str());
  }
}

/// Exact minimizer of lambda.l(w) + g(w) + ||w - anchor||^2 / (2 tau).
/// Least squares is a linear solve; logistic uses damped Newton.
inline Vector exact_subproblem_solve(const ObjectiveModel& model, const Vector& lambda,
                                     const Vector& anchor, double tau,
                                     EvalCounter* counter = nullptr) {
  require(tau > 0.0, "exact_subproblem_solve: tau must be positive");
  if (model.loss_kind() == LossKind::least_squares) {
    count(counter, static_cast<std::uint64_t>(model.n()));
    return weighted_ridge_solve(model.data(), lambda, model.mu(), anchor, tau);
  }

  const double inv_tau = std::isfinite(tau) ? 1.0 / tau : 0.0;
  const Matrix& x = model.data().features;
  auto objective = [&](const Vector& w) {
    return model.lagrangian(lambda, w) + 0.5 * inv_tau * (w - anchor).squaredNorm();
  };
  Vector w = anchor;
  for (int iter = 0; iter < 100; ++iter) {
    const Vector margins = x * w;
    Vector c1(model.n()), c2(model.n());
    for (Index i = 0; i < model.n(); ++i) {
      c1[i] = lambda[i] * model.dloss_dmargin(i, margins[i]);
      c2[i] = lambda[i] * model.d2loss_dmargin(i, margins[i]);
    }
    count(counter, static_cast<std::uint64_t>(model.n()));
    Vector grad = x.transpose() * c1 + model.mu() * w + inv_tau * (w - anchor);
    if (grad.norm() <= 1e-13 * (1.0 + w.norm())) break;
    Matrix h = x.transpose() * c2.asDiagonal() * x;
    h.diagonal().array() += model.mu() + inv_tau + 1e-14;
    const Vector step = h.ldlt().solve(grad);
    const double f0 = objective(w);
    double t = 1.0;
    Vector trial = w - step;
    while (objective(trial) > f0 - 0.25 * t * grad.dot(step) && t > 1e-12) {
      t *= 0.5;
      trial = w - t * step;
    }
    w = trial;
  }
  return w;
}

struct InnerResult {
  Vector w;
  std::uint64_t samples = 0;
};

/// Variance-reduced inner loop for the k-th primal subproblem with anchor w_k.
/// Returns the average of the last m_k iterates when the schedule averages
/// epochs, otherwise the last iterate.
inline InnerResult inner_solve(const ObjectiveModel& model, const Vector& lambda,
                               const Vector& w_k, const ScheduleParams& schedule,
                               std::size_t k, CounterRng& rng,
                               const SorelOptions& options = {}) {
  if (lambda.size() != model.n())
    throw std::invalid_argument("inner_solve: lambda length differs from n");
  if (std::abs(lambda.sum() - 1.0) > options.membership_tol ||
      lambda.minCoeff() < -options.membership_tol)
    throw std::invalid_argument("inner_solve: lambda is not a point of the permutahedron");

  EvalCounter counter(model.n());
  const double tau = schedule.tau(k);
  if (options.exact_inner) {
    Vector w = exact_subproblem_solve(model, lambda, w_k, tau, &counter);
    check_iterate(w, options.divergence_norm);
    return {std::move(w), counter.samples()};
  }

  // With minibatches, m and T keep counting samples, so an epoch covers the
  // same number of evaluations.
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t m = std::max<std::size_t>(1, (schedule.m(k) + batch - 1) / batch);
  const std::size_t T = std::max<std::size_t>(1, (schedule.T(k) + batch - 1) / batch);
  const double alpha = schedule.alpha;
  require(alpha > 0.0, "inner_solve: step size must be positive");
  const auto n = static_cast<std::uint64_t>(model.n());

  Vector w = w_k;
  Vector w_ref = w_k;
  Vector g_ref = model.weighted_full_grad(lambda, w_ref, &counter);
  Vector epoch_sum = Vector::Zero(model.d());
  Vector tail_sum = Vector::Zero(model.d());
  const std::size_t tail_start = T > m ? T - m : 0;  // iterates t+1 > tail_start

  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0 && t % m == 0) {
      w_ref = schedule.average_epochs ? Vector(epoch_sum / static_cast<double>(m)) : w;
      g_ref = model.weighted_full_grad(lambda, w_ref, &counter);
      epoch_sum.setZero();
    }
    Vector d;
    if (batch == 1) {
      const auto i = static_cast<Index>(rng.below(n));
      d = variance_reduced_direction(model, lambda, i, w, w_ref, g_ref);
    } else {
      d = g_ref;
      const double scale = static_cast<double>(n) / static_cast<double>(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto i = static_cast<Index>(rng.below(n));
        model.add_grad_at(i, w, scale * lambda[i], d);
        model.add_grad_at(i, w_ref, -scale * lambda[i], d);
      }
    }
    counter.add(batch);
    w = schedule.proximal ? model.prox_step(w - alpha * d, w_k, alpha, tau)
                          : model.gradient_step(w, d, w_k, alpha, tau);
    check_iterate(w, options.divergence_norm);
    epoch_sum += w;
    if (t + 1 > tail_start) tail_sum += w;
  }

  if (schedule.average_epochs) {
    const auto count_tail = static_cast<double>(std::min(m, T));
    return {tail_sum / count_tail, counter.samples()};
  }
  return {w, counter.samples()};
}

/// Full optimizer state; a run can be advanced one outer iteration at a time.
class SorelSolver {
 public:
  SorelSolver(const ObjectiveModel& model, SpectralWeights sigma, ScheduleParams schedule,
              std::uint64_t seed, SorelOptions options = {})
      : model_(model),
        sigma_(std::move(sigma)),
        schedule_(std::move(schedule)),
        options_(std::move(options)),
        seed_(seed),
        counter_(model.n()) {
    if (sigma_.size() != static_cast<std::size_t>(model_.n()))
      throw std::invalid_argument("spectrum length differs from the number of samples");
    w_curr_ = options_.initial_w ? *options_.initial_w : Vector::Zero(model_.d());
    if (w_curr_.size() != model_.d())
      throw std::invalid_argument("initial point has wrong dimension");
    w_prev_ = w_curr_;
    loss_curr_ = model_.full_loss_vector(w_curr_);
    loss_prev_ = loss_curr_;
    if (!loss_curr_.allFinite()) throw divergence_error("initial losses are non-finite");
    lambda_ = lmo(loss_curr_, sigma_);
    trace_.metadata().seed = seed;
    trace_.add({0, 0.0, clock_.seconds(), objective_from(loss_curr_, w_curr_)});
  }

  /// One outer iteration. Returns false once the pass budget is exhausted.
  bool step() {
    if (counter_.passes() >= options_.max_passes) return false;
    const std::size_t k = k_;
    counter_.add(static_cast<std::uint64_t>(model_.n()));  // l(w_k), computed last step

    const Vector v = momentum_scores(loss_curr_, loss_prev_, schedule_.theta(k));
    lambda_ = dual_update(lambda_, v, schedule_.eta(k), sigma_);
    if (!contains(lambda_, sigma_, options_.membership_tol))
      throw std::logic_error("dual iterate left the permutahedron");

    CounterRng rng(seed_, k);
    InnerResult inner = inner_solve(model_, lambda_, w_curr_, schedule_, k, rng, options_);
    counter_.add(inner.samples);

    w_prev_ = std::move(w_curr_);
    w_curr_ = std::move(inner.w);
    loss_prev_ = std::move(loss_curr_);
    loss_curr_ = model_.full_loss_vector(w_curr_);
    if (!loss_curr_.allFinite()) throw divergence_error("losses became non-finite");
    ++k_;
    trace_.add({k_, counter_.passes(), clock_.seconds(), objective_from(loss_curr_, w_curr_)});
    return true;
  }

  RunResult run(std::size_t K) {
    require(K >= 1, "run_sorel: K must be at least 1");
    for (std::size_t i = 0; i < K; ++i)
      if (!step()) break;
    return {trace_, w_curr_};
  }

  const Vector& w() const { return w_curr_; }
  const Vector& w_prev() const { return w_prev_; }
  const Vector& lambda() const { return lambda_; }
  std::size_t outer_index() const { return k_; }
  const EvalCounter& counter() const { return counter_; }
  const TrainingTrace& trace() const { return trace_; }
  const SpectralWeights& sigma() const { return sigma_; }

 private:
  double objective_from(const Vector& losses, const Vector& w) const {
    return spectral_risk(losses, sigma_) + model_.regularizer(w);
  }

  const ObjectiveModel& model_;
  SpectralWeights sigma_;
  ScheduleParams schedule_;
  SorelOptions options_;
  std::uint64_t seed_;
  EvalCounter counter_;
  Stopwatch clock_;
  TrainingTrace trace_;
  Vector w_curr_, w_prev_, lambda_, loss_curr_, loss_prev_;
  std::size_t k_ = 0;
};

/// Runs K outer iterations from w_0 (zero unless options say otherwise).
inline RunResult run_sorel(const ObjectiveModel& model, const SpectralWeights& sigma,
                           const ScheduleParams& schedule, std::size_t K, std::uint64_t seed,
                           const SorelOptions& options = {}) {
  SorelSolver solver(model, sigma, schedule, seed, options);
  return solver.run(K);
}

}  // namespace sorel
