#pragma once

// Training traces: one row per logged iterate, written as a fixed-schema CSV.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sorel/common.hpp"

namespace sorel {

inline constexpr const char* kVersion = "sorel 0.1.0";
inline constexpr const char* kTraceHeader = "k,passes,seconds,objective,subopt";

/// (f(w) - f(w*)) / (f(w0) - f(w*)); negative when w beats the reference.
inline double suboptimality(double objective_value, double objective_at_w0,
                            double objective_at_ref) {
  const double den = objective_at_w0 - objective_at_ref;
  if (!(std::abs(den) >= 1e-15))
    throw std::domain_error("suboptimality: degenerate denominator f(w0) - f(w*)");
  return (objective_value - objective_at_ref) / den;
}

struct TraceRow {
  std::uint64_t k = 0;
  double passes = 0.0;
  double seconds = 0.0;
  double objective = 0.0;
  double subopt = std::numeric_limits<double>::quiet_NaN();  // NaN = pending
};

struct TraceMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
};

class TrainingTrace {
 public:
  void add(TraceRow row) {
    if (!rows_.empty()) {
      if (row.passes < rows_.back().passes || row.seconds < rows_.back().seconds)
        throw std::logic_error("trace rows must be nondecreasing in passes and seconds");
    }
    rows_.push_back(row);
  }

  const std::vector<TraceRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }
  const TraceRow& back() const { return rows_.back(); }

  TraceMetadata& metadata() { return meta_; }
  const TraceMetadata& metadata() const { return meta_; }

  bool has_reference() const { return has_reference_; }

  /// Fills the subopt column from the objective at w0 and at the reference.
  void attach_reference(double objective_at_w0, double objective_at_ref) {
    for (auto& r : rows_) r.subopt = suboptimality(r.objective, objective_at_w0, objective_at_ref);
    has_reference_ = true;
  }

  bool is_monotone() const {
    for (std::size_t i = 1; i < rows_.size(); ++i)
      if (rows_[i].passes < rows_[i - 1].passes || rows_[i].seconds < rows_[i - 1].seconds)
        return false;
    return true;
  }

  void write_csv(std::ostream& os) const {
    os << kTraceHeader << '\n';
    os.precision(17);
    for (const auto& r : rows_) {
      os << r.k << ',' << r.passes << ',' << r.seconds << ',' << r.objective << ',';
      if (!std::isnan(r.subopt)) os << r.subopt;
      os << '\n';
    }
  }

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file " + path.string());
    write_csv(out);
  }

  /// Parses a trace file; throws if the header differs from the schema.
  static TrainingTrace read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader)
      throw std::runtime_error("trace file " + path.string() + " has an unexpected header");
    TrainingTrace t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() == 4 && line.back() == ',') cells.emplace_back();
      if (cells.size() != 5)
        throw std::runtime_error("trace file " + path.string() + " line " +
                                 std::to_string(lineno) + ": expected 5 columns");
      TraceRow r;
      try {
        r.k = std::stoull(cells[0]);
        r.passes = std::stod(cells[1]);
        r.seconds = std::stod(cells[2]);
        r.objective = std::stod(cells[3]);
        if (!cells[4].empty()) r.subopt = std::stod(cells[4]);
      } catch (const std::exception&) {
        throw std::runtime_error("trace file " + path.string() + " line " +
                                 std::to_string(lineno) + ": malformed number");
      }
      t.rows_.push_back(r);
      if (!std::isnan(r.subopt)) t.has_reference_ = true;
    }
    return t;
  }

 private:
  std::vector<TraceRow> rows_;
  TraceMetadata meta_;
  bool has_reference_ = false;
};

/// Monotonic wall clock started at construction.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Result of any optimizer run: the trace plus the final iterate.
struct RunResult {
  TrainingTrace trace;
  Vector w;
};

}  // namespace sorel
