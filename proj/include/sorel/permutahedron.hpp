#pragma once

// Linear maximization, Euclidean projection and membership for the
// permutahedron: the convex hull of all permutations of a spectrum.

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "sorel/common.hpp"
#include "sorel/spectra.hpp"

namespace sorel {

enum class Monotone { nondecreasing, nonincreasing };

/// Vertex of the permutahedron maximizing <lambda, scores>: the i-th smallest
/// score receives the i-th smallest weight. Ties go to the lower index first.
inline Vector lmo(const Vector& scores, const SpectralWeights& sigma) {
  if (static_cast<std::size_t>(scores.size()) != sigma.size())
    throw std::invalid_argument("lmo: scores and spectrum differ in length");
  const auto perm = sort_permutation(scores);
  Vector out(scores.size());
  for (std::size_t j = 0; j < perm.size(); ++j)
    out[perm[j]] = sigma[static_cast<Index>(j)];
  return out;
}

/// Euclidean projection onto the monotone cone by pool adjacent violators.
/// One left-to-right pass; each block stores its sum and length.
inline Vector isotonic_regression(const Vector& y,
                                  Monotone direction = Monotone::nondecreasing) {
  require_finite(y, "isotonic_regression input");
  const Index m = y.size();
  const double sign = direction == Monotone::nondecreasing ? 1.0 : -1.0;

  std::vector<double> block_sum;
  std::vector<Index> block_len;
  block_sum.reserve(static_cast<std::size_t>(m));
  block_len.reserve(static_cast<std::size_t>(m));

  for (Index i = 0; i < m; ++i) {
    block_sum.push_back(sign * y[i]);
    block_len.push_back(1);
    // Merge while the previous block mean exceeds the last one.
    while (block_sum.size() > 1) {
      const std::size_t b = block_sum.size() - 1;
      if (block_sum[b - 1] * static_cast<double>(block_len[b]) <=
          block_sum[b] * static_cast<double>(block_len[b - 1]))
        break;
      block_sum[b - 1] += block_sum[b];
      block_len[b - 1] += block_len[b];
      block_sum.pop_back();
      block_len.pop_back();
    }
  }

  Vector out(m);
  Index pos = 0;
  for (std::size_t b = 0; b < block_sum.size(); ++b) {
    const double mean = sign * block_sum[b] / static_cast<double>(block_len[b]);
    for (Index j = 0; j < block_len[b]; ++j) out[pos++] = mean;
  }
  return out;
}

/// Euclidean projection of `point` onto the permutahedron of `sigma`.
///
/// Sort the point descending, run isotonic regression (nonincreasing) on the
/// difference with the descending spectrum, subtract the monotone correction
/// and undo the sort. O(n log n).
inline Vector project(const Vector& point, const SpectralWeights& sigma) {
  if (static_cast<std::size_t>(point.size()) != sigma.size())
    throw std::invalid_argument("project: point and spectrum differ in length");
  require_finite(point, "project input");
  const Index n = point.size();
  if (sigma.is_uniform()) return Vector::Constant(n, sigma.weights().mean());

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return point[a] > point[b]; });

  Vector sorted(n), diff(n);
  for (Index j = 0; j < n; ++j) {
    sorted[j] = point[order[static_cast<std::size_t>(j)]];
    diff[j] = sorted[j] - sigma[n - 1 - j];
  }
  const Vector correction = isotonic_regression(diff, Monotone::nonincreasing);

  Vector out(n);
  for (Index j = 0; j < n; ++j)
    out[order[static_cast<std::size_t>(j)]] = sorted[j] - correction[j];
  return out;
}

/// Membership by majorization: equal totals, and every top-k partial sum of
/// `point` bounded by the corresponding partial sum of `sigma`.
inline bool contains(const Vector& point, const SpectralWeights& sigma, double tol) {
  require(tol >= 0.0, "contains: tolerance must be nonnegative");
  if (static_cast<std::size_t>(point.size()) != sigma.size()) return false;
  if (!point.allFinite()) return false;
  if (std::abs(point.sum() - sigma.weights().sum()) > tol) return false;

  std::vector<double> desc(point.data(), point.data() + point.size());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  const Index n = point.size();
  double top_point = 0.0, top_sigma = 0.0;
  for (Index k = 0; k < n; ++k) {
    top_point += desc[static_cast<std::size_t>(k)];
    top_sigma += sigma[n - 1 - k];
    if (top_point > top_sigma + tol) return false;
  }
  return true;
}

}  // namespace sorel
