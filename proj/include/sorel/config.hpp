#pragma once

// Experiment configuration: a small sectioned key = value format.
//
//   [experiment]   name, output_dir, seeds, grid_seeds, pass_budget, threads,
//                  mu, reference_tol
//   [dataset]      name, path | (n, d, noise, seed, feature_scale), standardize, loss
//   [spectrum]     family, param
//   [method:LABEL] type (defaults to LABEL) and method parameters
//
// A comma-separated value inside a method section is a grid axis.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sorel/common.hpp"
#include "sorel/dataset.hpp"
#include "sorel/objective.hpp"
#include "sorel/spectra.hpp"

namespace sorel {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ParamMap = std::map<std::string, std::string>;

struct MethodSpec {
  std::string label;
  std::string type;  // sorel | sgd | lsvrg | prospect
  std::map<std::string, std::vector<std::string>> params;

  bool is_grid() const {
    for (const auto& [k, v] : params)
      if (v.size() > 1) return true;
    return false;
  }

  /// Cartesian product of all list-valued parameters, in key order.
  std::vector<ParamMap> expand_grid() const {
    std::vector<ParamMap> out{ParamMap{}};
    for (const auto& [key, values] : params) {
      std::vector<ParamMap> next;
      for (const auto& partial : out)
        for (const auto& v : values) {
          ParamMap p = partial;
          p[key] = v;
          next.push_back(std::move(p));
        }
      out = std::move(next);
    }
    return out;
  }
};

struct DatasetSpec {
  std::string name;
  std::optional<std::filesystem::path> path;
  SyntheticSpec synthetic;
  bool standardize = true;
  LossKind loss = LossKind::least_squares;
};

struct SpectrumSpec {
  SpectrumFamily family = SpectrumFamily::extremile;
  double param = 2.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path output_dir = "sorel_out";
  std::vector<std::uint64_t> seeds{1};
  std::size_t grid_seeds = 1;  // S: seeds averaged when selecting grid values
  double pass_budget = 100.0;
  std::size_t threads = 1;
  std::optional<double> mu;  // default 1/n
  double reference_tol = 1e-10;
  DatasetSpec dataset;
  SpectrumSpec spectrum;
  std::vector<MethodSpec> methods;

  /// Raw sections as parsed; the canonical hash is computed from these.
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::filesystem::path source_dir = ".";

  std::vector<std::filesystem::path> missing_files() const {
    std::vector<std::filesystem::path> out;
    if (dataset.path && !std::filesystem::exists(*dataset.path)) out.push_back(*dataset.path);
    return out;
  }
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto cell : split_commas(value))
    if (!cell.empty()) out.emplace_back(cell);
  return out;
}

inline std::string normalize_scalar(const std::string& s) {
  double v = 0.0;
  if (parse_double(s, v)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  return lower(s);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline double to_double(const std::string& section, const std::string& key,
                        const std::string& value) {
  double v = 0.0;
  if (!parse_double(value, v))
    throw config_error("[" + section + "] " + key + ": expected a number, got '" + value + "'");
  return v;
}

inline std::uint64_t to_uint(const std::string& section, const std::string& key,
                             const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw config_error("[" + section + "] " + key + ": expected a nonnegative integer, got '" +
                       value + "'");
  return v;
}

inline bool to_bool(const std::string& section, const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error("[" + section + "] " + key + ": expected a boolean, got '" + value + "'");
}

}  // namespace detail

/// Keys that do not change what is computed are left out of the hash.
inline bool hash_relevant(const std::string& section, const std::string& key) {
  return !(section == "experiment" && (key == "output_dir" || key == "threads"));
}

/// FNV-1a over the sorted, normalized (section, key, value) triples.
inline std::string config_hash(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& [section, kv] : cfg.raw)
    for (const auto& [key, value] : kv) {
      if (!hash_relevant(section, key)) continue;
      os << section << '.' << key << '=';
      bool first = true;
      for (const auto& item : detail::split_list(value)) {
        if (!first) os << ',';
        first = false;
        os << detail::normalize_scalar(item);
      }
      os << '\n';
    }
  return detail::hex64(detail::fnv1a(os.str()));
}

inline const std::set<std::string>& known_method_types() {
  static const std::set<std::string> types{"sorel", "sgd", "lsvrg", "prospect"};
  return types;
}

inline ExperimentConfig parse_config(const std::string& text,
                                     const std::filesystem::path& source_dir = ".") {
  ExperimentConfig cfg;
  cfg.source_dir = source_dir;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
    const std::string t(detail::trim(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw config_error("line " + std::to_string(lineno) + ": unterminated section header");
      section = std::string(detail::trim(std::string_view(t).substr(1, t.size() - 2)));
      if (section.empty())
        throw config_error("line " + std::to_string(lineno) + ": empty section name");
      if (cfg.raw.count(section))
        throw config_error("line " + std::to_string(lineno) + ": duplicate section [" + section +
                           "]");
      cfg.raw[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw config_error("line " + std::to_string(lineno) + ": key outside of any section");
    const std::string key = detail::lower(std::string(detail::trim(std::string_view(t).substr(0, eq))));
    const std::string value(detail::trim(std::string_view(t).substr(eq + 1)));
    if (key.empty()) throw config_error("line " + std::to_string(lineno) + ": empty key");
    auto& kv = cfg.raw[section];
    if (kv.count(key))
      throw config_error("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }

  auto section_of = [&](const std::string& name) -> const std::map<std::string, std::string>* {
    auto it = cfg.raw.find(name);
    return it == cfg.raw.end() ? nullptr : &it->second;
  };

  if (const auto* ex = section_of("experiment")) {
    for (const auto& [key, value] : *ex) {
      if (key == "name") cfg.name = value;
      else if (key == "output_dir") cfg.output_dir = value;
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : detail::split_list(value))
          cfg.seeds.push_back(detail::to_uint("experiment", key, s));
        if (cfg.seeds.empty()) throw config_error("[experiment] seeds: empty list");
      } else if (key == "grid_seeds") {
        cfg.grid_seeds = detail::to_uint("experiment", key, value);
        if (cfg.grid_seeds == 0) throw config_error("[experiment] grid_seeds must be >= 1");
      } else if (key == "pass_budget") {
        cfg.pass_budget = detail::to_double("experiment", key, value);
        if (!(cfg.pass_budget > 0.0)) throw config_error("[experiment] pass_budget must be > 0");
      } else if (key == "threads") {
        cfg.threads = detail::to_uint("experiment", key, value);
        if (cfg.threads == 0) throw config_error("[experiment] threads must be >= 1");
      } else if (key == "mu") {
        if (detail::lower(value) != "auto") {
          cfg.mu = detail::to_double("experiment", key, value);
          if (*cfg.mu < 0.0) throw config_error("[experiment] mu must be nonnegative");
        }
      } else if (key == "reference_tol") {
        cfg.reference_tol = detail::to_double("experiment", key, value);
        if (!(cfg.reference_tol > 0.0)) throw config_error("[experiment] reference_tol must be > 0");
      } else {
        throw config_error("[experiment] unknown key '" + key + "'");
      }
    }
  }

  const auto* ds = section_of("dataset");
  if (!ds) throw config_error("missing [dataset] section");
  for (const auto& [key, value] : *ds) {
    auto& s = cfg.dataset.synthetic;
    if (key == "name") cfg.dataset.name = value;
    else if (key == "path") {
      std::filesystem::path p(value);
      cfg.dataset.path = p.is_absolute() ? p : source_dir / p;
    } else if (key == "n") s.n = static_cast<Index>(detail::to_uint("dataset", key, value));
    else if (key == "d") s.d = static_cast<Index>(detail::to_uint("dataset", key, value));
    else if (key == "noise") s.noise = detail::to_double("dataset", key, value);
    else if (key == "seed") s.seed = detail::to_uint("dataset", key, value);
    else if (key == "feature_scale") s.feature_scale = detail::to_double("dataset", key, value);
    else if (key == "standardize") cfg.dataset.standardize = detail::to_bool("dataset", key, value);
    else if (key == "loss") {
      try {
        cfg.dataset.loss = loss_kind_from_string(detail::lower(value));
      } catch (const std::invalid_argument& e) {
        throw config_error(std::string("[dataset] ") + e.what());
      }
    } else {
      throw config_error("[dataset] unknown key '" + key + "'");
    }
  }
  if (cfg.dataset.name.empty())
    cfg.dataset.name = cfg.dataset.path ? cfg.dataset.path->stem().string() : "synthetic";
  if (!cfg.dataset.path) {
    if (cfg.dataset.synthetic.n < 1 || cfg.dataset.synthetic.d < 1)
      throw config_error("[dataset] synthetic n and d must be >= 1");
    if (cfg.dataset.synthetic.noise < 0.0 || !(cfg.dataset.synthetic.feature_scale > 0.0))
      throw config_error("[dataset] noise must be >= 0 and feature_scale > 0");
  }

  const auto* sp = section_of("spectrum");
  if (!sp) throw config_error("missing [spectrum] section");
  bool have_family = false;
  for (const auto& [key, value] : *sp) {
    if (key == "family") {
      try {
        cfg.spectrum.family = spectrum_family_from_string(detail::lower(value));
      } catch (const std::invalid_argument& e) {
        throw config_error(std::string("[spectrum] ") + e.what());
      }
      if (cfg.spectrum.family == SpectrumFamily::custom)
        throw config_error("[spectrum] custom spectra cannot be configured from a file");
      have_family = true;
    } else if (key == "param") {
      cfg.spectrum.param = detail::to_double("spectrum", key, value);
    } else {
      throw config_error("[spectrum] unknown key '" + key + "'");
    }
  }
  if (!have_family) throw config_error("[spectrum] family is required");

  for (const auto& [name, kv] : cfg.raw) {
    if (name.rfind("method:", 0) != 0) {
      if (name != "experiment" && name != "dataset" && name != "spectrum")
        throw config_error("unknown section [" + name + "]");
      continue;
    }
    MethodSpec m;
    m.label = std::string(detail::trim(std::string_view(name).substr(7)));
    if (m.label.empty()) throw config_error("[" + name + "] empty method label");
    if (m.label.find("__") != std::string::npos || m.label.find('/') != std::string::npos)
      throw config_error("[" + name + "] label may not contain '__' or '/'");
    m.type = m.label;
    for (const auto& [key, value] : kv) {
      if (key == "type") {
        m.type = detail::lower(value);
        continue;
      }
      auto items = detail::split_list(value);
      if (items.empty()) throw config_error("[" + name + "] " + key + ": empty value");
      m.params[key] = std::move(items);
    }
    if (!known_method_types().count(m.type))
      throw config_error("[" + name + "] unknown method type '" + m.type + "'");
    cfg.methods.push_back(std::move(m));
  }
  if (cfg.methods.empty()) throw config_error("no [method:NAME] sections");
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.has_parent_path() ? path.parent_path() : ".");
}

/// Typed lookup into a resolved parameter set.
class ParamReader {
 public:
  ParamReader(const ParamMap& p, std::string where) : p_(p), where_(std::move(where)) {}

  bool has(const std::string& key) const { return p_.count(key) > 0; }

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    auto it = p_.find(key);
    if (it == p_.end()) {
      if (fallback) return *fallback;
      throw config_error(where_ + ": missing parameter '" + key + "'");
    }
    used_.insert(key);
    return detail::to_double(where_, key, it->second);
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) const {
    auto it = p_.find(key);
    if (it == p_.end()) {
      if (fallback) return *fallback;
      throw config_error(where_ + ": missing parameter '" + key + "'");
    }
    used_.insert(key);
    return static_cast<std::size_t>(detail::to_uint(where_, key, it->second));
  }

  bool flag(const std::string& key, bool fallback) const {
    auto it = p_.find(key);
    if (it == p_.end()) return fallback;
    used_.insert(key);
    return detail::to_bool(where_, key, it->second);
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = p_.find(key);
    if (it == p_.end()) return fallback;
    used_.insert(key);
    return detail::lower(it->second);
  }

  /// Throws on any key that was never read.
  void reject_unused() const {
    for (const auto& [k, v] : p_)
      if (!used_.count(k)) throw config_error(where_ + ": unknown parameter '" + k + "'");
  }

 private:
  const ParamMap& p_;
  std::string where_;
  mutable std::set<std::string> used_;
};

}  // namespace sorel
