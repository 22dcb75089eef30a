#pragma once

// Grid-based Bayesian inference of the LO phase from a photon-count record.
//
// The likelihood only depends on φ through cos φ and is symmetric under
// ν₊ ↔ ν₋, so φ is identifiable on [0, π/2] only; that interval is the
// default support of the (uniform) prior.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kphase/detail/log_math.hpp"
#include "kphase/errors.hpp"
#include "kphase/photonstats.hpp"

namespace kphase {

enum class DetectorKind { OnOff, Pnr };

/// Uniform grid over the prior support, endpoints included.
class PhaseGrid {
 public:
  static constexpr std::size_t kDefaultSize = 2001;

  PhaseGrid() : PhaseGrid(0.0, 0.5 * M_PI, kDefaultSize) {}

  PhaseGrid(double lo, double hi, std::size_t size) : lo_(lo), hi_(hi) {
    if (size < 2) throw std::invalid_argument("phase grid needs at least 2 points");
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("phase grid bounds must satisfy lo < hi");
    points_.resize(size);
    const double step = (hi - lo) / static_cast<double>(size - 1);
    for (std::size_t i = 0; i < size; ++i) points_[i] = lo + step * static_cast<double>(i);
    points_.back() = hi;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> points() const { return points_; }

  /// Trapezoid rule Σ over the grid of f_i.
  double integrate(std::span<const double> values) const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < points_.size(); ++i)
      acc += 0.5 * (points_[i + 1] - points_[i]) * (values[i] + values[i + 1]);
    return acc;
  }

 private:
  double lo_;
  double hi_;
  std::vector<double> points_;
};

/// Detection record {n_k}.
struct CountRecord {
  std::vector<std::uint64_t> counts;

  std::size_t size() const { return counts.size(); }

  /// m_n for n = 0..max(n_k).
  std::vector<std::uint64_t> occurrences() const {
    std::vector<std::uint64_t> m;
    for (auto n : counts) {
      if (n >= m.size()) m.resize(n + 1, 0);
      ++m[n];
    }
    return m;
  }
};

/// On/off reduction of a record.
struct OnOffRecord {
  std::uint64_t m_on = 0;
  std::uint64_t m_off = 0;

  std::uint64_t size() const { return m_on + m_off; }
};

/// Posterior over the phase grid. The normalized density is always derived
/// from log_density; there is no way to set it independently.
class PhasePosterior {
 public:
  PhasePosterior(PhaseGrid grid, std::vector<double> log_density)
      : grid_(std::move(grid)), log_density_(std::move(log_density)) {
    if (log_density_.size() != grid_.size())
      throw std::invalid_argument("log-likelihood length does not match grid");
    normalize();
  }

  static PhasePosterior uniform(PhaseGrid grid) {
    const std::size_t n = grid.size();
    return PhasePosterior(std::move(grid), std::vector<double>(n, 0.0));
  }

  const PhaseGrid& grid() const { return grid_; }
  /// Unnormalized log density, shifted so its maximum is 0.
  std::span<const double> log_density() const { return log_density_; }
  std::span<const double> density() const { return density_; }
  /// ln ∫ exp(log_density) dφ over the grid.
  double evidence_log() const { return evidence_log_; }

  /// Adds a pointwise log-likelihood increment and renormalizes.
  void accumulate(std::span<const double> increment) {
    if (increment.size() != log_density_.size())
      throw std::invalid_argument("log-likelihood length does not match grid");
    for (std::size_t i = 0; i < increment.size(); ++i) log_density_[i] += increment[i];
    normalize();
  }

 private:
  void normalize() {
    double hi = detail::kNegInf;
    for (double v : log_density_) {
      if (std::isnan(v)) throw DegenerateEvidence("log-likelihood contains NaN");
      hi = std::max(hi, v);
    }
    if (hi == detail::kNegInf)
      throw DegenerateEvidence("data are impossible at every grid point");
    density_.resize(log_density_.size());
    for (std::size_t i = 0; i < log_density_.size(); ++i) density_[i] = std::exp(log_density_[i] - hi);
    const double z = grid_.integrate(density_);
    for (double& d : density_) d /= z;
    // Rebase so that long streams of updates keep the values near zero,
    // where rounding in the running sum stays at the 1e-16 level.
    for (double& v : log_density_) v -= hi;
    offset_ += hi;
    evidence_log_ = offset_ + std::log(z);
  }

  PhaseGrid grid_;
  std::vector<double> log_density_;
  std::vector<double> density_;
  double offset_ = 0.0;
  double evidence_log_ = 0.0;
};

/// Point estimate with uncertainty. crlb, when present, is [M F_φ]⁻¹.
struct PhaseEstimate {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> crlb;
  std::uint64_t sample_size = 0;
  double skewness = 0.0;
  /// Fano inversion only: cos²φ was clipped into [0, 1].
  bool clamped = false;
};

/// ln p_n(φ_i) tabulated over a grid for n = 0..n_max. Entries above the table
/// are evaluated on demand. Immutable once built, so it can be shared across
/// threads (e.g. Monte Carlo replications).
class LikelihoodModel {
 public:
  LikelihoodModel(DetectorPlaneAmplitudes amps, double gamma, PhaseGrid grid,
                  std::optional<std::size_t> n_max = std::nullopt)
      : amps_(amps), gamma_(gamma), grid_(std::move(grid)) {
    validate(amps_);
    validate_noise_width(gamma_);
    n_max_ = n_max.value_or(cutoff(amps_));
    table_.resize((n_max_ + 1) * grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const auto logs = log_photon_pmf(amps_, grid_[i], gamma_, n_max_);
      for (std::size_t n = 0; n <= n_max_; ++n) table_[n * grid_.size() + i] = logs[n];
    }
  }

  const PhaseGrid& grid() const { return grid_; }
  const DetectorPlaneAmplitudes& amplitudes() const { return amps_; }
  double gamma() const { return gamma_; }

  /// ln p_n over the grid.
  std::vector<double> log_p(std::uint64_t n) const {
    std::vector<double> out(grid_.size());
    if (n <= n_max_) {
      std::copy_n(table_.begin() + static_cast<std::ptrdiff_t>(n * grid_.size()), grid_.size(), out.begin());
    } else {
      for (std::size_t i = 0; i < grid_.size(); ++i)
        out[i] = log_photon_pmf_single(grid_[i], static_cast<std::size_t>(n));
    }
    return out;
  }

  /// ln P_on = ln(1 − p_0) over the grid.
  std::vector<double> log_p_on() const {
    auto out = log_p(0);
    for (double& v : out) v = log1m_exp(v);
    return out;
  }

  /// Σ_n m_n ln p_n(φ_i). Terms with m_n = 0 are skipped so 0·(−∞) never occurs.
  std::vector<double> log_likelihood(std::span<const std::uint64_t> occurrences) const {
    std::vector<double> out(grid_.size(), 0.0);
    for (std::size_t n = 0; n < occurrences.size(); ++n) {
      if (occurrences[n] == 0) continue;
      add_scaled(out, log_p(n), static_cast<double>(occurrences[n]));
    }
    return out;
  }

  std::vector<double> log_likelihood(const OnOffRecord& record) const {
    std::vector<double> out(grid_.size(), 0.0);
    if (record.m_off > 0) add_scaled(out, log_p(0), static_cast<double>(record.m_off));
    if (record.m_on > 0) add_scaled(out, log_p_on(), static_cast<double>(record.m_on));
    return out;
  }

  /// Single-event log-likelihood for the given detector.
  std::vector<double> log_likelihood_event(std::uint64_t event, DetectorKind kind) const {
    if (kind == DetectorKind::Pnr || event == 0) return log_p(event);
    return log_p_on();
  }

  /// ln(1 − e^x) for x ≤ 0.
  static double log1m_exp(double x) {
    if (x == detail::kNegInf) return 0.0;
    if (x >= 0.0) return detail::kNegInf;
    return x > -M_LN2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
  }

 private:
  double log_photon_pmf_single(double phi, std::size_t n) const {
    if (gamma_ == 0.0) return log_pmf_entry(amps_, phi, n);
    return log_photon_pmf(amps_, phi, gamma_, n).back();
  }

  static void add_scaled(std::vector<double>& acc, const std::vector<double>& logs, double weight) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * logs[i];
  }

  DetectorPlaneAmplitudes amps_;
  double gamma_;
  PhaseGrid grid_;
  std::size_t n_max_ = 0;
  std::vector<double> table_;  // [n][grid index]
};

/// Σ_n m_n ln p_n(a, b, φ_i, γ) at every grid point.
inline std::vector<double> log_likelihood_pnr(const CountRecord& record,
                                              const DetectorPlaneAmplitudes& amps, double gamma,
                                              const PhaseGrid& grid) {
  return LikelihoodModel(amps, gamma, grid).log_likelihood(record.occurrences());
}

/// m_off ln P_off(φ_i) + m_on ln(1 − P_off(φ_i)).
inline std::vector<double> log_likelihood_onoff(const OnOffRecord& record,
                                                const DetectorPlaneAmplitudes& amps, double gamma,
                                                const PhaseGrid& grid) {
  return LikelihoodModel(amps, gamma, grid, 0).log_likelihood(record);
}

/// Uniform prior times likelihood, normalized on the grid.
inline PhasePosterior posterior(std::vector<double> loglik, const PhaseGrid& grid) {
  return PhasePosterior(grid, std::move(loglik));
}

/// Posterior mean and central moments by the trapezoid rule.
inline PhaseEstimate bayes_estimate(const PhasePosterior& post, std::uint64_t sample_size = 0) {
  const auto& grid = post.grid();
  const auto density = post.density();
  std::vector<double> work(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) work[i] = grid[i] * density[i];
  const double mean = grid.integrate(work);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = grid[i] - mean;
    work[i] = d * d * density[i];
  }
  const double variance = std::max(grid.integrate(work), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = grid[i] - mean;
    work[i] = d * d * d * density[i];
  }
  const double third = grid.integrate(work);

  PhaseEstimate est;
  est.mean = mean;
  est.variance = variance;
  est.sample_size = sample_size;
  est.skewness = variance > 0.0 ? third / std::pow(variance, 1.5) : 0.0;
  return est;
}

/// Folds one detection event into the posterior.
inline PhasePosterior sequential_update(PhasePosterior post, std::uint64_t event,
                                        const LikelihoodModel& model, DetectorKind kind) {
  post.accumulate(model.log_likelihood_event(event, kind));
  return post;
}

inline PhasePosterior sequential_update(PhasePosterior post, std::uint64_t event,
                                        const DetectorPlaneAmplitudes& amps, double gamma,
                                        DetectorKind kind) {
  const std::size_t n = kind == DetectorKind::Pnr ? static_cast<std::size_t>(event) : 0;
  const LikelihoodModel model(amps, gamma, post.grid(), n);
  post.accumulate(model.log_likelihood_event(event, kind));
  return post;
}

/// Σ_n (∂φ p_n)² / p_n, skipping p_n < 1e-30.
inline double fisher_pnr(const DetectorPlaneAmplitudes& amps, double phi, double gamma = 0.0) {
  const PhotonPmf pmf = photon_pmf_noisy(amps, phi, gamma);
  const auto dp = photon_pmf_dphi(amps, phi, gamma);
  double acc = 0.0;
  for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
    if (pmf.probs[n] < 1e-30) continue;
    acc += dp[n] * dp[n] / pmf.probs[n];
  }
  return acc;
}

/// Fisher information with a flag for regimes where the formula is undefined.
struct FisherValue {
  double value = 0.0;
  /// P_off ∈ {0, 1}: the on/off statistic is deterministic.
  bool degenerate = false;
};

/// (∂φ P_off)² / (P_off P_on).
inline FisherValue fisher_onoff(const DetectorPlaneAmplitudes& amps, double phi, double gamma = 0.0) {
  const CutoffPolicy only_vacuum{std::size_t{0}};
  const double p_off = photon_pmf_noisy(amps, phi, gamma, {}, only_vacuum).probs[0];
  const double p_on = 1.0 - p_off;
  if (!(p_off > 0.0) || !(p_on > 0.0)) return {0.0, true};
  const double d = photon_pmf_dphi(amps, phi, gamma, {}, only_vacuum)[0];
  return {d * d / (p_off * p_on), false};
}

inline double fisher_information(DetectorKind kind, const DetectorPlaneAmplitudes& amps, double phi,
                                 double gamma = 0.0) {
  return kind == DetectorKind::Pnr ? fisher_pnr(amps, phi, gamma) : fisher_onoff(amps, phi, gamma).value;
}

/// [M F]⁻¹; nullopt signals an unbounded variance (F = 0).
inline std::optional<double> crlb_variance(double fisher, std::uint64_t sample_size) {
  if (sample_size < 1) throw std::invalid_argument("sample size must be at least 1");
  if (!(fisher >= 0.0)) throw std::invalid_argument("Fisher information must be nonnegative");
  if (fisher == 0.0) return std::nullopt;
  return 1.0 / (static_cast<double>(sample_size) * fisher);
}

/// Phase from a Fano factor: cos²φ = (𝔉 − 1)(a² + b²) / (4a²b²), clipped to [0, 1].
struct FanoInversion {
  double phi = 0.0;
  bool clamped = false;
};

inline FanoInversion invert_fano(double fano, const DetectorPlaneAmplitudes& amps) {
  const double ab2 = amps.a * amps.a * amps.b * amps.b;
  if (!(ab2 > 0.0)) throw std::invalid_argument("Fano inversion needs a·b > 0");
  double c2 = (fano - 1.0) * amps.mean_photons() / (4.0 * ab2);
  bool clamped = false;
  if (!(c2 >= 0.0)) c2 = 0.0, clamped = true;
  if (c2 > 1.0) c2 = 1.0, clamped = true;
  return {std::acos(std::sqrt(c2)), clamped};
}

namespace detail {

// Phase from first two raw sums of a sample, with the unbiased variance.
inline std::optional<FanoInversion> fano_phase_from_sums(double s1, double s2, double count,
                                                         const DetectorPlaneAmplitudes& amps) {
  const double mean = s1 / count;
  if (!(mean > 0.0)) return std::nullopt;
  const double var = (s2 - count * mean * mean) / (count - 1.0);
  return invert_fano(var / mean, amps);
}

}  // namespace detail

/// Method-of-moments phase estimate from the empirical Fano factor, with a
/// leave-one-out jackknife variance.
inline PhaseEstimate fano_inversion_estimate(const CountRecord& record,
                                             const DetectorPlaneAmplitudes& amps) {
  const std::size_t total = record.size();
  if (total < 2) throw std::invalid_argument("Fano inversion needs at least 2 counts");
  const auto m = record.occurrences();
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    const double x = static_cast<double>(n);
    s1 += static_cast<double>(m[n]) * x;
    s2 += static_cast<double>(m[n]) * x * x;
  }
  const double count = static_cast<double>(total);
  const auto full = detail::fano_phase_from_sums(s1, s2, count, amps);
  if (!full) throw UndefinedFano("sample mean is zero; Fano factor undefined");

  PhaseEstimate est;
  est.mean = full->phi;
  est.clamped = full->clamped;
  est.sample_size = total;

  if (total < 3) {
    est.variance = std::numeric_limits<double>::infinity();
    return est;
  }
  // Leave-one-out replicates are identical for equal counts, so group by n.
  std::vector<std::pair<double, double>> replicates;  // (θ_(i), multiplicity)
  for (std::size_t n = 0; n < m.size(); ++n) {
    if (m[n] == 0) continue;
    const double x = static_cast<double>(n);
    const auto loo = detail::fano_phase_from_sums(s1 - x, s2 - x * x, count - 1.0, amps);
    // All remaining counts zero: no phase information, report the Poissonian end.
    replicates.emplace_back(loo ? loo->phi : 0.5 * M_PI, static_cast<double>(m[n]));
  }
  double theta_bar = 0.0;
  for (const auto& [theta, w] : replicates) theta_bar += w * theta;
  theta_bar /= count;
  double ss = 0.0;
  for (const auto& [theta, w] : replicates) ss += w * (theta - theta_bar) * (theta - theta_bar);
  est.variance = (count - 1.0) / count * ss;
  return est;
}

}  // namespace kphase
