#pragma once

// Seeded simulation of receiver records, discrimination experiments,
// estimator convergence sweeps and sampler goodness-of-fit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "kphase/errors.hpp"
#include "kphase/estimation.hpp"
#include "kphase/photonstats.hpp"
#include "kphase/receiver.hpp"
#include "kphase/rng.hpp"

namespace kphase {

struct SimConfig {
  DetectorPlaneAmplitudes amps{};
  double phi_star = 0.0;
  double gamma = 0.0;
  std::uint64_t sample_size = 1;
  std::uint64_t seed = 0;
  DetectorKind detector_kind = DetectorKind::Pnr;
  std::uint64_t replications = 50;
};

inline void validate(const SimConfig& cfg) {
  validate(cfg.amps);
  validate_noise_width(cfg.gamma);
  if (cfg.sample_size < 1) throw std::invalid_argument("M must be at least 1");
  if (cfg.replications < 1) throw std::invalid_argument("replications must be at least 1");
  if (!std::isfinite(cfg.phi_star)) throw std::invalid_argument("phi must be finite");
}

/// Poisson draw by sequential search of the CDF. Exact for the means used
/// here (≲ 30); the loop is bounded by underflow of the pmf terms.
inline std::uint64_t sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  const double u = rng.uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t n = 0;
  while (u >= cdf) {
    ++n;
    p *= mean / static_cast<double>(n);
    if (p == 0.0 && cdf > 0.5) break;  // remaining mass below double resolution
    cdf += p;
  }
  return n;
}

namespace detail {

// One shot: given the symbol (true ↔ ν₊), optional uniform phase kick, then a count.
inline std::uint64_t sample_shot(const SimConfig& cfg, bool plus, Rng& rng) {
  double phi = cfg.phi_star;
  if (cfg.gamma > 0.0) phi -= cfg.gamma * (rng.uniform() - 0.5);
  const auto [nu_p, nu_m] = nu_plus_minus(cfg.amps, phi);
  return sample_poisson(plus ? nu_p : nu_m, rng);
}

}  // namespace detail

/// M counts from the receiver output at φ*. The symbol is drawn ½-½ per shot.
inline CountRecord sample_counts(const SimConfig& cfg, std::uint64_t stream = 0) {
  validate(cfg);
  Rng rng(cfg.seed, stream);
  CountRecord record;
  record.counts.resize(cfg.sample_size);
  for (auto& n : record.counts) {
    const bool plus = rng.uniform() < 0.5;
    n = detail::sample_shot(cfg, plus, rng);
  }
  return record;
}

inline OnOffRecord to_onoff(const CountRecord& record) {
  OnOffRecord out;
  out.m_off = static_cast<std::uint64_t>(std::count(record.counts.begin(), record.counts.end(), 0));
  out.m_on = record.size() - out.m_off;
  return out;
}

/// Equiprobable random message bits.
inline std::vector<Bit> random_bits(std::size_t count, std::uint64_t seed) {
  Rng rng(seed, 0xb175ULL);
  std::vector<Bit> bits(count);
  for (auto& b : bits) b = rng.uniform() < 0.5 ? Bit::One : Bit::Zero;
  return bits;
}

struct DiscriminationResult {
  std::uint64_t shots = 0;
  std::uint64_t errors = 0;
  double error_rate = 0.0;
  /// Binomial standard error √(p(1−p)/M).
  double std_error = 0.0;
};

/// Shot-by-shot transmission of `bits` through the receiver and on/off decision.
inline DiscriminationResult run_discrimination(const SimConfig& cfg, std::span<const Bit> bits) {
  validate(cfg);
  if (bits.size() != cfg.sample_size) throw std::invalid_argument("bits length must equal M");
  Rng rng(cfg.seed, 0xd15cULL);
  DiscriminationResult res;
  res.shots = bits.size();
  for (Bit sent : bits) {
    const std::uint64_t n = detail::sample_shot(cfg, sent == Bit::One, rng);
    if (discriminate(n) != sent) ++res.errors;
  }
  const double m = static_cast<double>(res.shots);
  res.error_rate = static_cast<double>(res.errors) / m;
  res.std_error = std::sqrt(res.error_rate * (1.0 - res.error_rate) / m);
  return res;
}

enum class EstimationMethod { BayesOnOff, BayesPnr, FanoInversion };

inline std::string_view method_name(EstimationMethod m) {
  switch (m) {
    case EstimationMethod::BayesOnOff: return "bayes-onoff";
    case EstimationMethod::BayesPnr: return "bayes-pnr";
    case EstimationMethod::FanoInversion: return "fano-inversion";
  }
  return "";
}

inline std::optional<EstimationMethod> parse_method(std::string_view s) {
  if (s == "bayes-onoff") return EstimationMethod::BayesOnOff;
  if (s == "bayes-pnr") return EstimationMethod::BayesPnr;
  if (s == "fano-inversion") return EstimationMethod::FanoInversion;
  return std::nullopt;
}

struct SweepRow {
  std::uint64_t sample_size = 0;
  double mean_estimate = 0.0;
  /// Ensemble mean of φ̄ divided by φ*.
  double mean_ratio = 0.0;
  /// Standard deviation of φ̄ across replications.
  double sd_estimate = 0.0;
  /// Ensemble mean of the per-record variance (posterior or jackknife).
  double mean_variance = 0.0;
  double mean_abs_error = 0.0;
  /// [M F(φ*)]⁻¹ for the detector the method consumes; absent when F = 0.
  std::optional<double> crlb;
};

struct SweepResult {
  EstimationMethod method = EstimationMethod::BayesPnr;
  std::vector<SweepRow> rows;
  /// estimates[i][r]: φ̄ from replication r at sample size rows[i].sample_size.
  std::vector<std::vector<PhaseEstimate>> estimates;
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Record stream used by run_convergence_sweep for (M index, replication).
constexpr std::uint64_t sweep_stream(std::size_t m_index, std::uint64_t replication) {
  return (static_cast<std::uint64_t>(m_index) << 32) | replication;
}

/// Independent records per (M, replication); estimator applied to each.
/// Records depend only on (seed, M index, replication), so different methods
/// run with the same seed see the same data.
inline SweepResult run_convergence_sweep(const SimConfig& cfg, EstimationMethod method,
                                         std::span<const std::uint64_t> sample_sizes,
                                         const PhaseGrid& grid = PhaseGrid()) {
  validate(cfg);
  if (!std::is_sorted(sample_sizes.begin(), sample_sizes.end()) ||
      std::adjacent_find(sample_sizes.begin(), sample_sizes.end()) != sample_sizes.end())
    throw std::invalid_argument("sample sizes must be strictly increasing");

  std::optional<LikelihoodModel> model;
  if (method != EstimationMethod::FanoInversion) model.emplace(cfg.amps, cfg.gamma, grid);

  const DetectorKind kind = method == EstimationMethod::BayesOnOff ? DetectorKind::OnOff : DetectorKind::Pnr;
  const double fisher = fisher_information(kind, cfg.amps, cfg.phi_star, cfg.gamma);

  SweepResult result;
  result.method = method;
  for (std::size_t mi = 0; mi < sample_sizes.size(); ++mi) {
    SimConfig run = cfg;
    run.sample_size = sample_sizes[mi];
    std::vector<PhaseEstimate> ests(cfg.replications);
    detail::parallel_for(cfg.replications, [&](std::size_t r) {
      const CountRecord record = sample_counts(run, sweep_stream(mi, r));
      switch (method) {
        case EstimationMethod::BayesPnr:
          ests[r] = bayes_estimate(posterior(model->log_likelihood(record.occurrences()), grid), record.size());
          break;
        case EstimationMethod::BayesOnOff:
          ests[r] = bayes_estimate(posterior(model->log_likelihood(to_onoff(record)), grid), record.size());
          break;
        case EstimationMethod::FanoInversion:
          try {
            ests[r] = fano_inversion_estimate(record, cfg.amps);
          } catch (const UndefinedFano&) {
            ests[r].mean = 0.5 * M_PI;  // all-vacuum record: no information
            ests[r].variance = std::numeric_limits<double>::infinity();
            ests[r].sample_size = record.size();
          }
          break;
      }
    });

    SweepRow row;
    row.sample_size = run.sample_size;
    const double reps = static_cast<double>(cfg.replications);
    for (const auto& e : ests) {
      row.mean_estimate += e.mean;
      row.mean_variance += e.variance;
      row.mean_abs_error += std::abs(e.mean - cfg.phi_star);
    }
    row.mean_estimate /= reps;
    row.mean_variance /= reps;
    row.mean_abs_error /= reps;
    row.mean_ratio = row.mean_estimate / cfg.phi_star;
    double ss = 0.0;
    for (const auto& e : ests) ss += (e.mean - row.mean_estimate) * (e.mean - row.mean_estimate);
    row.sd_estimate = cfg.replications > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0;
    row.crlb = crlb_variance(fisher, run.sample_size);
    result.rows.push_back(row);
    result.estimates.push_back(std::move(ests));
  }
  return result;
}

/// Default sample-size grid for sweeps.
inline std::vector<std::uint64_t> default_sample_sizes() { return {100, 300, 1000, 3000, 10000, 30000}; }

struct GofResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t bins = 0;
  std::size_t dof = 0;
};

/// Pearson chi-square test of a record against a model pmf. Adjacent photon
/// numbers are pooled left to right until each bin expects at least 5 counts;
/// the final bin is the open upper tail and absorbs any leftover.
inline GofResult goodness_of_fit(const CountRecord& record, const PhotonPmf& pmf) {
  constexpr double kMinExpected = 5.0;
  const std::size_t total = record.size();
  if (total < 50) throw std::invalid_argument("goodness of fit needs at least 50 counts");
  const auto m = record.occurrences();
  const double count = static_cast<double>(total);

  struct Bin {
    double observed;
    double expected;
  };
  std::vector<Bin> bins;
  double open_obs = 0.0;
  double open_exp = 0.0;
  double closed_mass = 0.0;
  double closed_obs = 0.0;
  for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
    open_obs += n < m.size() ? static_cast<double>(m[n]) : 0.0;
    open_exp += count * pmf.probs[n];
    if (open_exp >= kMinExpected) {
      bins.push_back({open_obs, open_exp});
      closed_mass += open_exp;
      closed_obs += open_obs;
      open_obs = open_exp = 0.0;
    }
  }
  // Upper tail: everything not yet assigned to a closed bin.
  const Bin tail{count - closed_obs, std::max(count - closed_mass, 0.0)};
  if (tail.expected >= kMinExpected || bins.empty()) {
    bins.push_back(tail);
  } else {
    bins.back().observed += tail.observed;
    bins.back().expected += tail.expected;
  }
  if (bins.size() < 2) throw InsufficientSupport("fewer than two pooled chi-square bins");

  GofResult res;
  for (const auto& b : bins) res.statistic += (b.observed - b.expected) * (b.observed - b.expected) / b.expected;
  res.bins = bins.size();
  res.dof = bins.size() - 1;
  res.p_value = boost::math::gamma_q(0.5 * static_cast<double>(res.dof), 0.5 * res.statistic);
  return res;
}

}  // namespace kphase
