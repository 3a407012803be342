#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sorel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when iterates leave the region where the run is meaningful
/// (non-finite values or a blown-up primal norm).
class divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative solver hits its iteration cap before its tolerance.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sink for non-fatal diagnostics. Defaults to stderr; tests swap it out.
using WarningHandler = std::function<void(std::string_view)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "sorel warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(std::string_view msg) {
  if (auto& h = warning_handler()) h(msg);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Vector& v, const char* name) {
  if (!v.allFinite())
    throw std::domain_error(std::string(name) + " contains non-finite entries");
}

}  // namespace sorel
