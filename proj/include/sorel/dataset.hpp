#pragma once

// Dataset ingestion: numeric CSV with a header (last column is the target),
// column standardization, and a seeded synthetic regression generator.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sorel/common.hpp"
#include "sorel/objective.hpp"
#include "sorel/rng.hpp"

namespace sorel {

class dataset_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

/// Parses a rectangular numeric CSV with a header row. Rows are numbered from
/// 1 starting at the first data row.
inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw dataset_error("cannot open dataset file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty())
    throw dataset_error(path.string() + ": no data rows");
  std::vector<std::string> header;
  for (auto cell : detail::split_commas(line)) header.emplace_back(cell);
  const std::size_t cols = header.size();
  if (cols < 2)
    throw dataset_error(path.string() + ": need at least 2 columns (features and target)");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    ++rows;
    const auto cells = detail::split_commas(line);
    if (cells.size() != cols) {
      std::ostringstream os;
      os << path.string() << ": row " << rows << " (line " << lineno << ") has " << cells.size()
         << " columns, expected " << cols;
      throw dataset_error(os.str());
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v)) {
        std::ostringstream os;
        os << path.string() << ": non-numeric value '" << cells[c] << "' at row " << rows
           << " (line " << lineno << "), column " << (c + 1) << " '" << header[c] << "'";
        throw dataset_error(os.str());
      }
      values.push_back(v);
    }
  }
  if (rows == 0) throw dataset_error(path.string() + ": no data rows");

  Dataset data;
  const auto n = static_cast<Index>(rows);
  const auto d = static_cast<Index>(cols - 1);
  data.features.resize(n, d);
  data.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j)
      data.features(i, j) = values[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
    data.targets[i] = values[static_cast<std::size_t>(i) * cols + cols - 1];
  }
  return data;
}

struct Standardization {
  Dataset data;
  Vector means;
  Vector scales;  // population standard deviations; 1 for constant columns
};

/// Zero mean, unit population variance per feature column. Constant columns
/// are centered only. Targets are untouched.
inline Standardization standardize(const Dataset& input) {
  require(input.n() >= 2, "standardize: need at least 2 rows");
  Standardization out;
  out.data = input;
  const Index d = input.d();
  const double n = static_cast<double>(input.n());
  out.means = input.features.colwise().mean().transpose();
  out.scales = Vector::Ones(d);
  for (Index j = 0; j < d; ++j) {
    auto col = out.data.features.col(j);
    col.array() -= out.means[j];
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 1e-12 * std::max(1.0, std::abs(out.means[j]))) {
      col /= sd;
      out.scales[j] = sd;
    } else {
      col.setZero();
      warn("standardize: column " + std::to_string(j + 1) + " is constant; centered only");
    }
  }
  return out;
}

struct SyntheticSpec {
  Index n = 200;
  Index d = 10;
  double noise = 0.5;
  std::uint64_t seed = 0;
  /// Feature standard deviation before any standardization.
  double feature_scale = 1.0;
};

/// Gaussian features, a planted weight vector with N(0, 1) entries, and
/// Gaussian noise on the targets. Fully determined by the seed.
inline Dataset make_synthetic(const SyntheticSpec& spec) {
  require(spec.n >= 1 && spec.d >= 1, "synthetic dataset needs n, d >= 1");
  require(spec.noise >= 0.0 && spec.feature_scale > 0.0, "synthetic noise/scale invalid");
  CounterRng rng(spec.seed, 0xda7a);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.features.resize(spec.n, spec.d);
  data.targets.resize(spec.n);
  Vector planted(spec.d);
  for (Index j = 0; j < spec.d; ++j) planted[j] = normal(rng);
  for (Index i = 0; i < spec.n; ++i)
    for (Index j = 0; j < spec.d; ++j) data.features(i, j) = spec.feature_scale * normal(rng);
  for (Index i = 0; i < spec.n; ++i)
    data.targets[i] = data.features.row(i).dot(planted) + spec.noise * normal(rng);
  return data;
}

}  // namespace sorel
