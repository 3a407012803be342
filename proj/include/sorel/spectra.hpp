#pragma once

// Spectral weight vectors and the spectral risk they define.
//
// A spectrum sigma is a nondecreasing, nonnegative vector summing to one. The
// spectral risk of a loss vector is the dot product of sigma with the losses
// sorted ascending, so the largest weight always lands on the largest loss.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sorel/common.hpp"

namespace sorel {

enum class SpectrumFamily { cvar, esrm, extremile, custom };

inline std::string to_string(SpectrumFamily f) {
  switch (f) {
    case SpectrumFamily::cvar: return "cvar";
    case SpectrumFamily::esrm: return "esrm";
    case SpectrumFamily::extremile: return "extremile";
    case SpectrumFamily::custom: return "custom";
  }
  return "custom";
}

inline SpectrumFamily spectrum_family_from_string(const std::string& s) {
  if (s == "cvar") return SpectrumFamily::cvar;
  if (s == "esrm") return SpectrumFamily::esrm;
  if (s == "extremile") return SpectrumFamily::extremile;
  if (s == "custom") return SpectrumFamily::custom;
  throw std::invalid_argument("unknown spectrum family '" + s + "'");
}

inline constexpr double kWeightTolerance = 1e-12;

/// Validated spectrum. Immutable after construction.
class SpectralWeights {
 public:
  SpectralWeights(Vector weights, SpectrumFamily family = SpectrumFamily::custom,
                  double parameter = 0.0)
      : weights_(std::move(weights)), family_(family), parameter_(parameter) {
    require(weights_.size() >= 1, "spectrum must have at least one weight");
    require_finite(weights_, "spectrum");
    for (Index i = 0; i < weights_.size(); ++i) {
      if (weights_[i] < -kWeightTolerance)
        throw std::invalid_argument("spectrum weights must be nonnegative");
      if (i > 0 && weights_[i] < weights_[i - 1] - kWeightTolerance)
        throw std::invalid_argument("spectrum weights must be nondecreasing");
    }
    const double total = weights_.sum();
    require(total > 0.0, "spectrum weights must not all be zero");
    if (std::abs(total - 1.0) > kWeightTolerance) {
      std::ostringstream os;
      os << "spectrum (" << to_string(family_) << ") sums to " << total
         << "; renormalizing";
      warn(os.str());
      weights_ /= total;
    }
  }

  static SpectralWeights uniform(std::size_t n) {
    require(n >= 1, "uniform spectrum needs n >= 1");
    return SpectralWeights(Vector::Constant(static_cast<Index>(n), 1.0 / n),
                           SpectrumFamily::extremile, 1.0);
  }

  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const Vector& weights() const { return weights_; }
  double operator[](Index i) const { return weights_[i]; }
  SpectrumFamily family() const { return family_; }
  double parameter() const { return parameter_; }

  /// All weights equal: the permutahedron collapses to one point.
  bool is_uniform() const {
    return weights_.maxCoeff() - weights_.minCoeff() <= kWeightTolerance * 1e-3;
  }

  std::string tag() const {
    std::ostringstream os;
    os << to_string(family_);
    if (family_ != SpectrumFamily::custom) os << '-' << parameter_;
    return os.str();
  }

 private:
  Vector weights_;
  SpectrumFamily family_;
  double parameter_;
};

/// alpha-CVaR: the average of the top n*alpha losses, with a fractional
/// boundary weight when n*alpha is not an integer.
inline SpectralWeights cvar_weights(std::size_t n, double alpha) {
  require(n >= 1, "cvar_weights: n must be positive");
  require(alpha > 0.0 && alpha < 1.0, "cvar_weights: alpha must lie in (0, 1)");
  const double mass = static_cast<double>(n) * alpha;
  const double rounded = std::round(mass);
  const bool integral = std::abs(mass - rounded) <= 1e-9 * std::max(1.0, mass);

  Vector w = Vector::Zero(static_cast<Index>(n));
  if (integral) {
    const auto top = static_cast<Index>(rounded);
    for (Index i = static_cast<Index>(n) - top; i < static_cast<Index>(n); ++i)
      w[i] = 1.0 / rounded;
  } else {
    const auto top = static_cast<Index>(std::floor(mass));
    const Index boundary = static_cast<Index>(n) - top - 1;
    for (Index i = boundary + 1; i < static_cast<Index>(n); ++i) w[i] = 1.0 / mass;
    w[boundary] = 1.0 - static_cast<double>(top) / mass;
  }
  return SpectralWeights(std::move(w), SpectrumFamily::cvar, alpha);
}

/// rho-ESRM, evaluated as exp(rho(i/n - 1)) (1 - e^{-rho/n}) / (1 - e^{-rho})
/// so no intermediate exceeds one.
inline SpectralWeights esrm_weights(std::size_t n, double rho) {
  require(n >= 1, "esrm_weights: n must be positive");
  require(rho > 0.0, "esrm_weights: rho must be positive");
  if (rho > 700.0 * static_cast<double>(n))
    throw std::range_error("esrm_weights: rho exceeds 700 n");
  const double nd = static_cast<double>(n);
  const double scale = std::expm1(-rho / nd) / std::expm1(-rho);
  Vector w(static_cast<Index>(n));
  for (Index i = 0; i < w.size(); ++i)
    w[i] = std::exp(rho * (static_cast<double>(i + 1) / nd - 1.0)) * scale;
  return SpectralWeights(std::move(w), SpectrumFamily::esrm, rho);
}

/// r-extremile: (i/n)^r - ((i-1)/n)^r. r = 1 is returned as the exact uniform
/// spectrum.
inline SpectralWeights extremile_weights(std::size_t n, double r) {
  require(n >= 1, "extremile_weights: n must be positive");
  require(r >= 1.0, "extremile_weights: r must be at least 1");
  const double nd = static_cast<double>(n);
  Vector w(static_cast<Index>(n));
  if (r == 1.0) {
    w.setConstant(1.0 / nd);
  } else {
    double prev = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
      const double cur = std::pow(static_cast<double>(i + 1) / nd, r);
      w[i] = cur - prev;
      prev = cur;
    }
  }
  return SpectralWeights(std::move(w), SpectrumFamily::extremile, r);
}

/// Builds a spectrum of length n from a named family.
inline SpectralWeights make_spectrum(SpectrumFamily family, std::size_t n,
                                     double parameter) {
  switch (family) {
    case SpectrumFamily::cvar: return cvar_weights(n, parameter);
    case SpectrumFamily::esrm: return esrm_weights(n, parameter);
    case SpectrumFamily::extremile: return extremile_weights(n, parameter);
    case SpectrumFamily::custom: break;
  }
  throw std::invalid_argument("custom spectra cannot be regenerated at a new size");
}

/// Indices that sort `losses` ascending; ties keep their original order.
/// Indices are zero-based.
inline std::vector<Index> sort_permutation(const Vector& losses) {
  require_finite(losses, "losses");
  std::vector<Index> perm(static_cast<std::size_t>(losses.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](Index a, Index b) { return losses[a] < losses[b]; });
  return perm;
}

inline double spectral_risk(const Vector& losses, const SpectralWeights& sigma) {
  if (static_cast<std::size_t>(losses.size()) != sigma.size())
    throw std::invalid_argument("spectral_risk: loss vector and spectrum differ in length");
  const auto perm = sort_permutation(losses);
  double acc = 0.0;
  for (std::size_t j = 0; j < perm.size(); ++j)
    acc += sigma[static_cast<Index>(j)] * losses[perm[j]];
  return acc;
}

}  // namespace sorel
