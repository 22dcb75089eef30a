#pragma once

// Run configuration: flat key=value files merged with command-line flags.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kphase/errors.hpp"
#include "kphase/estimation.hpp"
#include "kphase/io.hpp"
#include "kphase/montecarlo.hpp"
#include "kphase/receiver.hpp"

namespace kphase {

/// Which detector(s) an `estimate` run reports.
enum class DetectorSelection { Both, Pnr, OnOff };

/// Which estimators a `sweep` run executes.
enum class MethodSelection { All, BayesOnOff, BayesPnr, FanoInversion };

struct RunConfig {
  std::string command;

  DetectorPlaneAmplitudes amps{std::sqrt(2.0), std::sqrt(2.0)};
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> tau;

  double phi = 0.3;
  double gamma = 0.0;
  std::uint64_t sample_size = 10000;
  std::uint64_t seed = 1;
  std::uint64_t replications = 50;
  DetectorSelection detector = DetectorSelection::Both;
  MethodSelection method = MethodSelection::All;
  std::vector<std::uint64_t> sample_sizes = default_sample_sizes();

  std::size_t grid_size = PhaseGrid::kDefaultSize;
  double lo = 0.0;
  double hi = 0.5 * M_PI;
  std::size_t fisher_points = 200;

  std::string counts_path;
  std::string out;

  PhaseGrid phase_grid() const { return PhaseGrid(lo, hi, grid_size); }

  SimConfig sim() const {
    SimConfig s;
    s.amps = amps;
    s.phi_star = phi;
    s.gamma = gamma;
    s.sample_size = sample_size;
    s.seed = seed;
    s.replications = replications;
    s.detector_kind = detector == DetectorSelection::OnOff ? DetectorKind::OnOff : DetectorKind::Pnr;
    return s;
  }
};

/// Recognised configuration keys, in the order they are written back out.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "a", "b", "alpha", "beta", "tau", "phi", "gamma", "M", "seed", "replications", "detector",
      "method", "M_list", "G", "lo", "hi", "grid", "counts", "out"};
  return keys;
}

using ConfigEntries = std::map<std::string, std::string>;

/// Parses `key=value` lines; '#' starts a comment line. Duplicate keys: last wins.
inline ConfigEntries parse_config_text(std::istream& in) {
  ConfigEntries entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key(detail::trim(text.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    entries[key] = std::string(detail::trim(text.substr(eq + 1)));
  }
  return entries;
}

/// Extracts `key=value` pairs from the leading "# " comment block of an output file.
inline ConfigEntries parse_replay_block(std::istream& in) {
  ConfigEntries entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() != '#') break;
    std::string_view body = detail::trim(std::string_view(line).substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    entries[std::string(detail::trim(body.substr(0, eq)))] = std::string(detail::trim(body.substr(eq + 1)));
  }
  return entries;
}

namespace detail {

inline double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || !std::isfinite(out))
    throw ConfigError(key + ": malformed number '" + value + "'");
  return out;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    // Accept integral scientific notation such as 1e4.
    double d = 0.0;
    const auto [p2, e2] = std::from_chars(first, last, d);
    if (e2 == std::errc() && p2 == last && d >= 0.0 && d < 1.8e19 && std::floor(d) == d)
      return static_cast<std::uint64_t>(d);
    throw ConfigError(key + ": malformed integer '" + value + "'");
  }
  return out;
}

}  // namespace detail

/// Merges file entries with flag entries (flags win), validates, and resolves amplitudes.
inline RunConfig parse_config(std::string command, const ConfigEntries& file_entries,
                              const ConfigEntries& flag_entries) {
  ConfigEntries merged = file_entries;
  for (const auto& [k, v] : flag_entries) merged[k] = v;

  const auto& known = config_keys();
  for (const auto& [k, v] : merged) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown key '" + k + "'");
  }

  RunConfig cfg;
  cfg.command = std::move(command);
  auto get = [&merged](const char* key) -> const std::string* {
    const auto it = merged.find(key);
    return it == merged.end() ? nullptr : &it->second;
  };
  auto real = [&](const char* key, auto&& check, const char* constraint) -> std::optional<double> {
    const std::string* v = get(key);
    if (!v) return std::nullopt;
    const double x = detail::parse_real(key, *v);
    if (!check(x)) throw ConfigError(std::string(key) + " must " + constraint);
    return x;
  };
  auto count = [&](const char* key, std::uint64_t min) -> std::optional<std::uint64_t> {
    const std::string* v = get(key);
    if (!v) return std::nullopt;
    const std::uint64_t x = detail::parse_count(key, *v);
    if (x < min) throw ConfigError(std::string(key) + " must be at least " + std::to_string(min));
    return x;
  };
  const auto nonneg = [](double x) { return x >= 0.0; };

  const auto a = real("a", nonneg, "be nonnegative");
  const auto b = real("b", nonneg, "be nonnegative");
  cfg.alpha = real("alpha", nonneg, "be nonnegative");
  cfg.beta = real("beta", nonneg, "be nonnegative");
  cfg.tau = real("tau", [](double x) { return x > 0.0 && x < 1.0; }, "lie in (0,1)");

  const bool physical = cfg.alpha || cfg.beta || cfg.tau;
  if (physical && (a || b)) throw ConfigError("a/b cannot be combined with alpha/beta/tau");
  if (physical) {
    if (!cfg.beta || !cfg.tau) throw ConfigError("beta and tau are required when alpha/beta/tau are used");
    const ReceiverParams params = cfg.alpha ? ReceiverParams(*cfg.alpha, *cfg.beta, *cfg.tau)
                                            : ReceiverParams::kennedy_matched(*cfg.beta, *cfg.tau);
    cfg.alpha = params.alpha();
    cfg.amps = detector_amplitudes(params);
  } else {
    if (a) cfg.amps.a = *a;
    if (b) cfg.amps.b = *b;
  }

  if (auto v = real("phi", [](double) { return true; }, "be finite")) cfg.phi = *v;
  if (auto v = real("gamma", [](double x) { return x >= 0.0 && x <= 2.0 * M_PI; }, "lie in [0, 2pi]"))
    cfg.gamma = *v;
  if (auto v = count("M", 1)) cfg.sample_size = *v;
  if (auto v = count("seed", 0)) cfg.seed = *v;
  if (auto v = count("replications", 1)) cfg.replications = *v;
  if (auto v = count("G", 2)) cfg.grid_size = static_cast<std::size_t>(*v);
  if (auto v = count("grid", 2)) cfg.fisher_points = static_cast<std::size_t>(*v);
  if (auto v = real("lo", [](double) { return true; }, "be finite")) cfg.lo = *v;
  if (auto v = real("hi", [](double) { return true; }, "be finite")) cfg.hi = *v;
  if (!(cfg.hi > cfg.lo)) throw ConfigError("lo must be smaller than hi");

  if (const std::string* v = get("detector")) {
    if (*v == "both") cfg.detector = DetectorSelection::Both;
    else if (*v == "pnr") cfg.detector = DetectorSelection::Pnr;
    else if (*v == "onoff") cfg.detector = DetectorSelection::OnOff;
    else throw ConfigError("detector must be one of both, pnr, onoff");
  }
  if (const std::string* v = get("method")) {
    if (*v == "all") cfg.method = MethodSelection::All;
    else if (auto m = parse_method(*v)) {
      cfg.method = *m == EstimationMethod::BayesOnOff ? MethodSelection::BayesOnOff
                   : *m == EstimationMethod::BayesPnr ? MethodSelection::BayesPnr
                                                      : MethodSelection::FanoInversion;
    } else {
      throw ConfigError("method must be one of all, bayes-onoff, bayes-pnr, fano-inversion");
    }
  }
  if (const std::string* v = get("M_list")) {
    cfg.sample_sizes.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::uint64_t m = detail::parse_count("M_list", std::string(detail::trim(item)));
      if (m < 1) throw ConfigError("M_list entries must be at least 1");
      if (!cfg.sample_sizes.empty() && m <= cfg.sample_sizes.back())
        throw ConfigError("M_list must be strictly increasing");
      cfg.sample_sizes.push_back(m);
    }
    if (cfg.sample_sizes.empty()) throw ConfigError("M_list must not be empty");
  }
  if (const std::string* v = get("counts")) cfg.counts_path = *v;
  if (const std::string* v = get("out")) cfg.out = *v;
  return cfg;
}

inline std::vector<EstimationMethod> selected_methods(MethodSelection sel) {
  switch (sel) {
    case MethodSelection::BayesOnOff: return {EstimationMethod::BayesOnOff};
    case MethodSelection::BayesPnr: return {EstimationMethod::BayesPnr};
    case MethodSelection::FanoInversion: return {EstimationMethod::FanoInversion};
    case MethodSelection::All: break;
  }
  return {EstimationMethod::FanoInversion, EstimationMethod::BayesOnOff, EstimationMethod::BayesPnr};
}

/// Resolved configuration as key=value pairs; feeding them back through
/// parse_config reproduces the same RunConfig.
inline std::vector<std::string> describe(const RunConfig& cfg) {
  std::vector<std::string> lines;
  lines.push_back("kphase " + cfg.command);
  auto add = [&lines](const std::string& k, const std::string& v) { lines.push_back(k + "=" + v); };
  add("a", format_real(cfg.amps.a));
  add("b", format_real(cfg.amps.b));
  add("phi", format_real(cfg.phi));
  add("gamma", format_real(cfg.gamma));
  add("M", std::to_string(cfg.sample_size));
  add("seed", std::to_string(cfg.seed));
  add("replications", std::to_string(cfg.replications));
  add("detector", cfg.detector == DetectorSelection::Both ? "both"
                  : cfg.detector == DetectorSelection::Pnr ? "pnr"
                                                           : "onoff");
  std::string methods = cfg.method == MethodSelection::All ? "all" : "";
  if (methods.empty()) methods = std::string(method_name(selected_methods(cfg.method).front()));
  add("method", methods);
  std::string list;
  for (auto m : cfg.sample_sizes) list += (list.empty() ? "" : ",") + std::to_string(m);
  add("M_list", list);
  add("G", std::to_string(cfg.grid_size));
  add("lo", format_real(cfg.lo));
  add("hi", format_real(cfg.hi));
  add("grid", std::to_string(cfg.fisher_points));
  if (!cfg.counts_path.empty()) add("counts", cfg.counts_path);
  if (!cfg.out.empty()) add("out", cfg.out);
  return lines;
}

}  // namespace kphase
