#pragma once

#include <random>

#include "sorel/objective.hpp"

namespace fixtures {

/// Small Gaussian design; targets are +/-1 for the logistic loss.
inline sorel::Dataset random_dataset(std::mt19937_64& gen, sorel::Index n, sorel::Index d,
                                     sorel::LossKind kind) {
  std::normal_distribution<double> N(0.0, 1.0);
  sorel::Dataset data;
  data.features.resize(n, d);
  data.targets.resize(n);
  for (sorel::Index i = 0; i < n; ++i) {
    for (sorel::Index j = 0; j < d; ++j) data.features(i, j) = N(gen);
    const double t = N(gen);
    data.targets[i] = kind == sorel::LossKind::logistic ? (t >= 0.0 ? 1.0 : -1.0) : 2.0 * t;
  }
  return data;
}

inline sorel::Dataset rows(std::initializer_list<std::initializer_list<double>> xs,
                           std::initializer_list<double> ys) {
  sorel::Dataset data;
  const auto n = static_cast<sorel::Index>(ys.size());
  const auto d = static_cast<sorel::Index>(xs.begin()->size());
  data.features.resize(n, d);
  data.targets.resize(n);
  sorel::Index i = 0;
  for (const auto& r : xs) {
    sorel::Index j = 0;
    for (double v : r) data.features(i, j++) = v;
    ++i;
  }
  i = 0;
  for (double y : ys) data.targets[i++] = y;
  return data;
}

}  // namespace fixtures
