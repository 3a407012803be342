#pragma once

// Composite objective: per-sample losses of a linear model, a ridge
// regularizer (mu/2)||w||^2, and the anchored proximal step used by the
// primal inner loop.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "sorel/common.hpp"
#include "sorel/spectra.hpp"

namespace sorel {

struct Dataset {
  Matrix features;  // n x d
  Vector targets;   // n

  Index n() const { return features.rows(); }
  Index d() const { return features.cols(); }

  void validate() const {
    require(features.rows() >= 1 && features.cols() >= 1, "dataset must be non-empty");
    require(features.rows() == targets.size(),
            "dataset feature rows and targets differ in length");
    require(features.allFinite() && targets.allFinite(),
            "dataset contains non-finite entries");
  }
};

enum class LossKind { least_squares, logistic };

inline std::string to_string(LossKind k) {
  return k == LossKind::least_squares ? "least_squares" : "logistic";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "least_squares" || s == "squared") return LossKind::least_squares;
  if (s == "logistic") return LossKind::logistic;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

/// Counts per-sample loss/gradient evaluations. passes = samples / n.
class EvalCounter {
 public:
  explicit EvalCounter(Index n = 1) : n_(n) {}
  void add(std::uint64_t samples) { samples_ += samples; }
  std::uint64_t samples() const { return samples_; }
  double passes() const { return static_cast<double>(samples_) / static_cast<double>(n_); }

 private:
  Index n_;
  std::uint64_t samples_ = 0;
};

inline void count(EvalCounter* c, std::uint64_t samples) {
  if (c != nullptr) c->add(samples);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

class ObjectiveModel {
 public:
  /// `w_radius` bounds the region on which the least-squares Lipschitz
  /// constant G is estimated.
  ObjectiveModel(Dataset data, LossKind kind, double reg_mu, double w_radius = 100.0)
      : data_(std::move(data)), kind_(kind), mu_(reg_mu), w_radius_(w_radius) {
    data_.validate();
    require(reg_mu >= 0.0 && std::isfinite(reg_mu), "regularization mu must be nonnegative");
    require(w_radius > 0.0, "w_radius must be positive");
    if (kind_ == LossKind::logistic) {
      for (Index i = 0; i < data_.n(); ++i)
        require(data_.targets[i] == 1.0 || data_.targets[i] == -1.0,
                "logistic targets must be -1 or +1");
    }
    double max_sq = 0.0, max_g = 0.0;
    for (Index i = 0; i < data_.n(); ++i) {
      const double sq = data_.features.row(i).squaredNorm();
      const double nrm = std::sqrt(sq);
      max_sq = std::max(max_sq, sq);
      if (kind_ == LossKind::least_squares)
        max_g = std::max(max_g, nrm * (std::abs(data_.targets[i]) + nrm * w_radius_));
      else
        max_g = std::max(max_g, nrm);
    }
    smoothness_ = kind_ == LossKind::least_squares ? max_sq : 0.25 * max_sq;
    lipschitz_ = max_g;
    if (smoothness_ <= 0.0) smoothness_ = 1.0;
    if (lipschitz_ <= 0.0) lipschitz_ = 1.0;
  }

  const Dataset& data() const { return data_; }
  Index n() const { return data_.n(); }
  Index d() const { return data_.d(); }
  LossKind loss_kind() const { return kind_; }
  double mu() const { return mu_; }
  double w_radius() const { return w_radius_; }
  /// L: max per-sample smoothness constant.
  double smoothness() const { return smoothness_; }
  /// G: per-sample Lipschitz estimate on the ball of radius w_radius.
  double lipschitz() const { return lipschitz_; }

  /// Per-sample Lipschitz bound over the ball {w : |w - center| <= radius}.
  /// Tighter than lipschitz() when a good center is known.
  double lipschitz_on_ball(const Vector& center, double radius) const {
    require(center.size() == d(), "lipschitz_on_ball: center dimension mismatch");
    require(radius >= 0.0, "lipschitz_on_ball: radius must be nonnegative");
    double g = 0.0;
    for (Index i = 0; i < n(); ++i) {
      const double nrm = data_.features.row(i).norm();
      if (kind_ == LossKind::least_squares) {
        const double r = data_.features.row(i).dot(center) - data_.targets[i];
        g = std::max(g, nrm * (std::abs(r) + nrm * radius));
      } else {
        g = std::max(g, nrm);
      }
    }
    return g > 0.0 ? g : 1.0;
  }

  double loss_at(Index i, const Vector& w) const {
    check_index(i);
    const double margin = data_.features.row(i).dot(w);
    return loss_from_margin(i, margin);
  }

  Vector grad_at(Index i, const Vector& w) const {
    Vector g = Vector::Zero(d());
    add_grad_at(i, w, 1.0, g);
    return g;
  }

  /// out += scale * grad l_i(w)
  void add_grad_at(Index i, const Vector& w, double scale, Vector& out) const {
    check_index(i);
    const double margin = data_.features.row(i).dot(w);
    out.noalias() += (scale * dloss_dmargin(i, margin)) * data_.features.row(i).transpose();
  }

  /// Derivative of the loss with respect to the margin x_i . w.
  double dloss_dmargin(Index i, double margin) const {
    const double y = data_.targets[i];
    if (kind_ == LossKind::least_squares) return margin - y;
    return -y * sigmoid(-y * margin);
  }

  /// Second derivative with respect to the margin.
  double d2loss_dmargin(Index i, double margin) const {
    if (kind_ == LossKind::least_squares) return 1.0;
    const double s = sigmoid(data_.targets[i] * margin);
    return s * (1.0 - s);
  }

  Vector full_loss_vector(const Vector& w, EvalCounter* counter = nullptr) const {
    check_dim(w);
    const Vector margins = data_.features * w;
    Vector out(n());
    for (Index i = 0; i < n(); ++i) out[i] = loss_from_margin(i, margins[i]);
    count(counter, static_cast<std::uint64_t>(n()));
    return out;
  }

  /// sum_i lambda_i grad l_i(w)
  Vector weighted_full_grad(const Vector& lambda, const Vector& w,
                            EvalCounter* counter = nullptr) const {
    if (lambda.size() != n())
      throw std::invalid_argument("weighted_full_grad: lambda length differs from n");
    check_dim(w);
    const Vector margins = data_.features * w;
    Vector coeff(n());
    for (Index i = 0; i < n(); ++i) coeff[i] = lambda[i] * dloss_dmargin(i, margins[i]);
    count(counter, static_cast<std::uint64_t>(n()));
    return data_.features.transpose() * coeff;
  }

  double regularizer(const Vector& w) const { return 0.5 * mu_ * w.squaredNorm(); }
  Vector regularizer_grad(const Vector& w) const { return mu_ * w; }

  /// argmin_u g(u) + ||u - anchor||^2 / (2 tau) + ||u - x||^2 / (2 alpha)
  Vector prox_step(const Vector& x, const Vector& anchor, double alpha, double tau) const {
    require(alpha > 0.0 && tau > 0.0, "prox_step: alpha and tau must be positive");
    const double r = alpha / tau;
    return (x + r * anchor) / (1.0 + alpha * mu_ + r);
  }

  /// Gradient-step variant for differentiable g:
  /// u = x - alpha (d + (x - anchor) / tau + grad g(x)).
  Vector gradient_step(const Vector& x, const Vector& direction, const Vector& anchor,
                       double alpha, double tau) const {
    require(alpha > 0.0 && tau > 0.0, "gradient_step: alpha and tau must be positive");
    return x - alpha * (direction + (x - anchor) / tau + mu_ * x);
  }

  /// R_sigma(w) + g(w)
  double primal_objective(const SpectralWeights& sigma, const Vector& w) const {
    return spectral_risk(full_loss_vector(w), sigma) + regularizer(w);
  }

  /// sum_i lambda_i l_i(w) + g(w)
  double lagrangian(const Vector& lambda, const Vector& w) const {
    return lambda.dot(full_loss_vector(w)) + regularizer(w);
  }

 private:
  double loss_from_margin(Index i, double margin) const {
    const double y = data_.targets[i];
    if (kind_ == LossKind::least_squares) {
      const double r = y - margin;
      return 0.5 * r * r;
    }
    return softplus(-y * margin);
  }

  void check_index(Index i) const {
    if (i < 0 || i >= n()) throw std::out_of_range("sample index out of range");
  }

  void check_dim(const Vector& w) const {
    if (w.size() != d()) throw std::invalid_argument("parameter vector has wrong dimension");
  }

  Dataset data_;
  LossKind kind_;
  double mu_;
  double w_radius_;
  double smoothness_ = 1.0;
  double lipschitz_ = 1.0;
};

/// Closed-form minimizer of sum_i c_i (y_i - x_i.w)^2 / 2 + (ridge/2)||w||^2
/// + ||w - anchor||^2 / (2 tau) for nonnegative weights c. Pass tau = inf
/// to drop the anchor.
inline Vector weighted_ridge_solve(const Dataset& data, const Vector& c, double ridge,
                                   const Vector& anchor, double tau) {
  const double inv_tau = std::isfinite(tau) ? 1.0 / tau : 0.0;
  Matrix h = data.features.transpose() * c.asDiagonal() * data.features;
  h.diagonal().array() += ridge + inv_tau;
  Vector rhs = data.features.transpose() * c.cwiseProduct(data.targets);
  if (inv_tau > 0.0) rhs += inv_tau * anchor;
  Eigen::LDLT<Matrix> ldlt(h);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("weighted_ridge_solve: factorization failed");
  return ldlt.solve(rhs);
}

/// Ridge regression closed form: the minimizer of the uniform-spectrum
/// objective mean_i l_i(w) + (mu/2)||w||^2 for least squares.
inline Vector ridge_closed_form(const ObjectiveModel& model) {
  require(model.loss_kind() == LossKind::least_squares,
          "ridge_closed_form requires the least-squares loss");
  const Index n = model.n();
  return weighted_ridge_solve(model.data(), Vector::Constant(n, 1.0 / static_cast<double>(n)),
                              model.mu(), Vector::Zero(model.d()),
                              std::numeric_limits<double>::infinity());
}

}  // namespace sorel
