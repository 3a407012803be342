#pragma once

// Per-outer-iteration parameters for the primal-dual method and a checker for
// the five parameter inequalities the convergence analysis relies on.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "sorel/common.hpp"

namespace sorel {

enum class ScheduleMode { theoretical, practical, custom };

inline std::string to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::theoretical: return "theoretical";
    case ScheduleMode::practical: return "practical";
    case ScheduleMode::custom: return "custom";
  }
  return "custom";
}

inline ScheduleMode schedule_mode_from_string(const std::string& s) {
  if (s == "theoretical") return ScheduleMode::theoretical;
  if (s == "practical") return ScheduleMode::practical;
  if (s == "custom") return ScheduleMode::custom;
  throw std::invalid_argument("unknown schedule mode '" + s + "'");
}

/// Which epoch-length rule the theoretical schedule uses.
enum class EpochRule {
  outer_rate,    // m_k = 384 L / ((k + 5) mu) + 2
  subproblem,    // m_k = 96 L / (mu + 1/tau_k) + 2
};

struct ScheduleParams {
  using RealSeq = std::function<double(std::size_t)>;
  using CountSeq = std::function<std::size_t(std::size_t)>;

  ScheduleMode mode = ScheduleMode::custom;
  double alpha = 0.0;  // inner step size
  double mu = 0.0;
  double lipschitz = 0.0;  // G, used only by the analysis multiplier

  RealSeq theta, eta, tau, gamma, delta;
  CountSeq m;  // reference refresh period
  CountSeq T;  // inner steps

  /// Inner loop returns the average of the last epoch (else the last iterate)
  /// and refreshes the reference point to that average.
  bool average_epochs = true;
  /// Use the proximal step; otherwise a plain gradient step on the smooth g.
  bool proximal = true;

  /// Proof-only coupling multiplier: alpha_{k+1} = G eta_k. alpha_0 reuses eta_0.
  double analysis_alpha(std::size_t k) const {
    return lipschitz * eta(k == 0 ? 0 : k - 1);
  }

  static ScheduleParams theoretical(double mu, double L, double G, double c_T = 2.0,
                                    EpochRule rule = EpochRule::outer_rate) {
    require(mu > 0.0, "theoretical schedule needs mu > 0");
    require(L > 0.0 && G > 0.0, "theoretical schedule needs L, G > 0");
    require(c_T > 0.0, "c_T must be positive");
    ScheduleParams s;
    s.mode = ScheduleMode::theoretical;
    s.alpha = 1.0 / (12.0 * L);
    s.mu = mu;
    s.lipschitz = G;
    s.gamma = [](std::size_t k) { return static_cast<double>(k + 1); };
    s.eta = [=](std::size_t k) { return mu * static_cast<double>(k + 1) / (8.0 * G * G); };
    s.theta = [](std::size_t k) {
      return static_cast<double>(k) / static_cast<double>(k + 1);
    };
    s.tau = [=](std::size_t k) { return 4.0 / (mu * static_cast<double>(k + 1)); };
    s.delta = [=](std::size_t k) {
      const double kp1 = static_cast<double>(k + 1);
      return std::min(mu / (8.0 * (static_cast<double>(k) + 5.0)), mu * std::pow(kp1, -6.0));
    };
    const auto tau = s.tau;
    s.m = [=](std::size_t k) -> std::size_t {
      double v = rule == EpochRule::outer_rate
                     ? 384.0 * L / ((static_cast<double>(k) + 5.0) * mu) + 2.0
                     : 96.0 * L / (mu + 1.0 / tau(k)) + 2.0;
      return static_cast<std::size_t>(std::ceil(v));
    };
    const auto m = s.m;
    const auto delta = s.delta;
    s.T = [=](std::size_t k) -> std::size_t {
      const double mk = static_cast<double>(m(k));
      const double steps = std::ceil(mk * std::log(1.0 / delta(k)) * c_T);
      return std::max(m(k), static_cast<std::size_t>(std::max(steps, 0.0)));
    };
    s.average_epochs = true;
    s.proximal = true;
    return s;
  }

  /// The schedule used in experiments: T_k = m_k = n, theta_k = k/(k+1),
  /// tau_k = tau_scale n / (k+1), eta_k = C (k+1) / n, last-iterate outputs,
  /// plain gradient steps.
  static ScheduleParams practical(std::size_t n, double C, double alpha,
                                  double tau_scale = 20.0) {
    require(n >= 1, "practical schedule needs n >= 1");
    require(C > 0.0 && alpha > 0.0 && tau_scale > 0.0,
            "practical schedule needs C, alpha, tau_scale > 0");
    ScheduleParams s;
    s.mode = ScheduleMode::practical;
    s.alpha = alpha;
    const double nd = static_cast<double>(n);
    s.gamma = [](std::size_t k) { return static_cast<double>(k + 1); };
    s.theta = [](std::size_t k) {
      return static_cast<double>(k) / static_cast<double>(k + 1);
    };
    s.tau = [=](std::size_t k) { return tau_scale * nd / static_cast<double>(k + 1); };
    s.eta = [=](std::size_t k) { return C * static_cast<double>(k + 1) / nd; };
    s.delta = [](std::size_t) { return 0.0; };
    s.m = [=](std::size_t) { return n; };
    s.T = [=](std::size_t) { return n; };
    s.average_epochs = false;
    s.proximal = false;
    return s;
  }

  /// Fixed parameters every outer iteration.
  static ScheduleParams constant(double theta, double eta, double tau, double alpha,
                                 std::size_t m, std::size_t T) {
    ScheduleParams s;
    s.mode = ScheduleMode::custom;
    s.alpha = alpha;
    s.gamma = [](std::size_t) { return 1.0; };
    s.theta = [=](std::size_t) { return theta; };
    s.eta = [=](std::size_t) { return eta; };
    s.tau = [=](std::size_t) { return tau; };
    s.delta = [](std::size_t) { return 0.0; };
    s.m = [=](std::size_t) { return m; };
    s.T = [=](std::size_t) { return T; };
    s.average_epochs = false;
    s.proximal = true;
    return s;
  }
};

struct InequalityCheck {
  std::string name;
  bool holds = true;
  std::optional<std::size_t> first_violation;
};

struct Condition1Report {
  std::array<InequalityCheck, 5> checks{{{"a: gamma_{k+1}/eta_{k+1} <= gamma_k/eta_k"},
                                         {"b: gamma_{k+1}/tau_{k+1} <= gamma_k(1/tau_k + mu - sqrt(2(mu + 1/tau_k) delta_k))"},
                                         {"c: gamma_k = gamma_{k+1} theta_{k+1}"},
                                         {"d: G alpha_{k+1} <= 1/tau_k"},
                                         {"e: theta_k G / alpha_k <= 1/eta_k"}}};
  std::size_t horizon = 0;

  bool all_hold() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const InequalityCheck& c) { return c.holds; });
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
      os << (c.holds ? "PASS " : "FAIL ") << c.name;
      if (c.first_violation) os << "  (first violation at k=" << *c.first_violation << ")";
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {
// lhs <= rhs up to roundoff relative to the magnitudes involved.
inline bool leq(double lhs, double rhs, double scale) {
  return lhs <= rhs + 1e-12 * std::max({std::abs(lhs), std::abs(rhs), scale});
}
}  // namespace detail

/// Evaluates the five parameter inequalities for k = 0..horizon, with the
/// analysis multiplier alpha_{k+1} = G eta_k.
inline Condition1Report validate_condition1(const ScheduleParams& s, double G, double mu,
                                            std::size_t horizon) {
  require(horizon >= 1, "validate_condition1: horizon must be at least 1");
  Condition1Report report;
  report.horizon = horizon;
  auto fail = [&](std::size_t which, std::size_t k) {
    auto& c = report.checks[which];
    if (c.holds) {
      c.holds = false;
      c.first_violation = k;
    }
  };
  auto alpha_analysis = [&](std::size_t k) {
    return G * s.eta(k == 0 ? 0 : k - 1);
  };

  for (std::size_t k = 0; k <= horizon; ++k) {
    const double g0 = s.gamma(k), g1 = s.gamma(k + 1);
    const double e0 = s.eta(k), e1 = s.eta(k + 1);
    const double t0 = s.tau(k), t1 = s.tau(k + 1);
    const double th0 = s.theta(k), th1 = s.theta(k + 1);
    const double dk = s.delta(k);

    if (!detail::leq(g1 / e1, g0 / e0, 0.0)) fail(0, k);

    const double radicand = std::max(0.0, 2.0 * (mu + 1.0 / t0) * dk);
    const double rhs_b = g0 * (1.0 / t0 + mu - std::sqrt(radicand));
    if (!detail::leq(g1 / t1, rhs_b, g0 * (1.0 / t0 + mu))) fail(1, k);

    if (std::abs(g0 - g1 * th1) > 1e-12 * std::max(std::abs(g0), std::abs(g1 * th1)))
      fail(2, k);

    if (!detail::leq(G * alpha_analysis(k + 1), 1.0 / t0, 0.0)) fail(3, k);

    // theta_0 = 0 makes (e) vacuous at k = 0.
    if (th0 != 0.0 && !detail::leq(th0 * G / alpha_analysis(k), 1.0 / e0, 0.0)) fail(4, k);
  }
  return report;
}

}  // namespace sorel
