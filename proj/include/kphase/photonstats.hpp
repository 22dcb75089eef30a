#pragma once

// Photon-number statistics at the output port of the displacement receiver.
//
// The received mixture ½(|b><b| + |-b><-b|) displaced by a·e^{iφ} gives a
// count distribution that is an equal-weight mixture of two Poissons with
// means ν± = a² + b² ± 2ab·cos φ. Phase noise is modelled as a uniform
// average of the signal phase over a window of width γ ("bracket" state).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "kphase/detail/log_math.hpp"
#include "kphase/errors.hpp"
#include "kphase/quadrature.hpp"

namespace kphase {

/// Local-oscillator (a) and signal (b) amplitudes at the detector, in √photons.
struct DetectorPlaneAmplitudes {
  double a = 0.0;
  double b = 0.0;

  double mean_photons() const { return a * a + b * b; }
};

inline void validate(const DetectorPlaneAmplitudes& amps) {
  if (!std::isfinite(amps.a) || !std::isfinite(amps.b) || amps.a < 0.0 || amps.b < 0.0)
    throw std::invalid_argument("detector amplitudes must be finite and nonnegative");
}

inline void validate_noise_width(double gamma) {
  if (!(gamma >= 0.0) || !(gamma <= 2.0 * M_PI))
    throw std::invalid_argument("noise width gamma must lie in [0, 2π]");
}

/// Truncated photon-number distribution. Mass above n_max is at most tail_bound.
struct PhotonPmf {
  std::vector<double> probs;
  std::size_t n_max = 0;
  double tail_bound = 0.0;

  double operator[](std::size_t n) const { return n < probs.size() ? probs[n] : 0.0; }
  std::size_t size() const { return probs.size(); }
};

/// Selects n_max. Default: ceil(ν_max + 12√(ν_max+1) + 25) with ν_max = (a+b)².
struct CutoffPolicy {
  std::optional<std::size_t> fixed_n_max;
};

/// Bracket-average quadrature. panels == 0 picks one 64-point panel per π/2 of width.
struct QuadraturePolicy {
  std::size_t points_per_panel = 64;
  std::size_t panels = 0;
};

/// (ν₊, ν₋)
inline std::pair<double, double> nu_plus_minus(const DetectorPlaneAmplitudes& amps, double phi) {
  const double base = amps.a * amps.a + amps.b * amps.b;
  const double cross = 2.0 * amps.a * amps.b * std::cos(phi);
  // Rounding can push ν₋ a hair below zero when a == b and φ == 0.
  return {std::max(base + cross, 0.0), std::max(base - cross, 0.0)};
}

/// Largest mean either Poisson component can reach at any phase.
inline double max_component_mean(const DetectorPlaneAmplitudes& amps) {
  return (amps.a + amps.b) * (amps.a + amps.b);
}

inline std::size_t cutoff(const DetectorPlaneAmplitudes& amps, const CutoffPolicy& policy = {}) {
  if (policy.fixed_n_max) return *policy.fixed_n_max;
  const double nu_max = max_component_mean(amps);
  if (nu_max == 0.0) return 0;  // vacuum: no tail at all
  return static_cast<std::size_t>(std::ceil(nu_max + 12.0 * std::sqrt(nu_max + 1.0) + 25.0));
}

/// Chernoff bound on P(N > n_max) for N ~ Poisson(mean).
inline double poisson_tail_bound(double mean, std::size_t n_max) {
  if (mean <= 0.0) return 0.0;
  const double k = static_cast<double>(n_max) + 1.0;
  if (k <= mean) return 1.0;
  return std::exp(-mean + k * (1.0 + std::log(mean) - std::log(k)));
}

/// ln p_n(a, b, φ) for the noiseless mixture.
inline double log_pmf_entry(const DetectorPlaneAmplitudes& amps, double phi, std::size_t n) {
  const auto [nu_p, nu_m] = nu_plus_minus(amps, phi);
  return detail::log_add_exp(detail::log_poisson(n, nu_p), detail::log_poisson(n, nu_m)) -
         std::log(2.0);
}

/// ∂φ p_n for the noiseless mixture, using ∂ν P(n;ν) = P(n−1;ν) − P(n;ν).
/// At ν = 0 this reproduces the removable-singularity limits exactly.
inline double dphi_pmf_entry(const DetectorPlaneAmplitudes& amps, double phi, std::size_t n) {
  const auto [nu_p, nu_m] = nu_plus_minus(amps, phi);
  const double dnu = 2.0 * amps.a * amps.b * std::sin(phi);  // ∂φν₋ = +dnu, ∂φν₊ = −dnu
  auto dpois = [n](double nu) {
    const double lower = n == 0 ? 0.0 : std::exp(detail::log_poisson(n - 1, nu));
    return lower - std::exp(detail::log_poisson(n, nu));
  };
  return 0.5 * (dpois(nu_m) - dpois(nu_p)) * dnu;
}

namespace detail {

inline QuadratureRule bracket_rule(double gamma, const QuadraturePolicy& quad) {
  std::size_t panels = quad.panels;
  if (panels == 0) panels = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gamma / (0.5 * M_PI))));
  QuadratureRule rule = composite_gauss_legendre(-0.5 * gamma, 0.5 * gamma, quad.points_per_panel, panels);
  for (double& w : rule.weights) w /= gamma;  // weights now sum to one
  return rule;
}

}  // namespace detail

/// ln p_n(a, b, φ, γ) for n = 0..n_max. γ = 0 is the noiseless formula.
inline std::vector<double> log_photon_pmf(const DetectorPlaneAmplitudes& amps, double phi,
                                          double gamma, std::size_t n_max,
                                          const QuadraturePolicy& quad = {}) {
  std::vector<double> out(n_max + 1);
  if (gamma == 0.0) {
    for (std::size_t n = 0; n <= n_max; ++n) out[n] = log_pmf_entry(amps, phi, n);
    return out;
  }
  const QuadratureRule rule = detail::bracket_rule(gamma, quad);
  const std::size_t nodes = rule.nodes.size();
  std::vector<double> nu_p(nodes), nu_m(nodes);
  for (std::size_t j = 0; j < nodes; ++j)
    std::tie(nu_p[j], nu_m[j]) = nu_plus_minus(amps, phi - rule.nodes[j]);
  std::vector<double> logs(nodes);
  for (std::size_t n = 0; n <= n_max; ++n) {
    for (std::size_t j = 0; j < nodes; ++j)
      logs[j] = detail::log_add_exp(detail::log_poisson(n, nu_p[j]), detail::log_poisson(n, nu_m[j]));
    out[n] = detail::log_sum_exp(logs, rule.weights) - std::log(2.0);
  }
  return out;
}

inline PhotonPmf photon_pmf(const DetectorPlaneAmplitudes& amps, double phi,
                            const CutoffPolicy& policy = {}) {
  validate(amps);
  PhotonPmf pmf;
  pmf.n_max = cutoff(amps, policy);
  pmf.tail_bound = poisson_tail_bound(max_component_mean(amps), pmf.n_max);
  pmf.probs.resize(pmf.n_max + 1);
  for (std::size_t n = 0; n <= pmf.n_max; ++n) pmf.probs[n] = std::exp(log_pmf_entry(amps, phi, n));
  return pmf;
}

/// Bracket-state pmf γ⁻¹∫_{−γ/2}^{γ/2} p_n(a, b, φ−ψ) dψ.
inline PhotonPmf photon_pmf_noisy(const DetectorPlaneAmplitudes& amps, double phi, double gamma,
                                  const QuadraturePolicy& quad = {},
                                  const CutoffPolicy& policy = {}) {
  validate(amps);
  validate_noise_width(gamma);
  if (gamma == 0.0) return photon_pmf(amps, phi, policy);
  PhotonPmf pmf;
  pmf.n_max = cutoff(amps, policy);
  // Every component mean is bounded by (a+b)², so the noiseless bound still holds.
  pmf.tail_bound = poisson_tail_bound(max_component_mean(amps), pmf.n_max);
  const auto logs = log_photon_pmf(amps, phi, gamma, pmf.n_max, quad);
  pmf.probs.resize(logs.size());
  std::transform(logs.begin(), logs.end(), pmf.probs.begin(), [](double l) { return std::exp(l); });
  return pmf;
}

/// ∂φ p_n(a, b, φ, γ) for n = 0..n_max (same cutoff as photon_pmf).
inline std::vector<double> photon_pmf_dphi(const DetectorPlaneAmplitudes& amps, double phi,
                                           double gamma, const QuadraturePolicy& quad = {},
                                           const CutoffPolicy& policy = {}) {
  validate(amps);
  validate_noise_width(gamma);
  const std::size_t n_max = cutoff(amps, policy);
  std::vector<double> out(n_max + 1, 0.0);
  if (gamma == 0.0) {
    for (std::size_t n = 0; n <= n_max; ++n) out[n] = dphi_pmf_entry(amps, phi, n);
    return out;
  }
  const QuadratureRule rule = detail::bracket_rule(gamma, quad);
  for (std::size_t n = 0; n <= n_max; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
      acc += rule.weights[j] * dphi_pmf_entry(amps, phi - rule.nodes[j], n);
    out[n] = acc;
  }
  return out;
}

/// 1 + 4a²b²cos²φ / (a² + b²)
inline double fano_factor_closed_form(const DetectorPlaneAmplitudes& amps, double phi) {
  const double mean = amps.mean_photons();
  if (!(mean > 0.0)) throw UndefinedFano("Fano factor undefined for zero mean photon number");
  const double c = std::cos(phi);
  return 1.0 + 4.0 * amps.a * amps.a * amps.b * amps.b * c * c / mean;
}

/// First two raw moments of a truncated pmf.
inline std::pair<double, double> pmf_moments(const PhotonPmf& pmf) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
    const double x = static_cast<double>(n);
    m1 += x * pmf.probs[n];
    m2 += x * x * pmf.probs[n];
  }
  return {m1, m2};
}

/// Var[N]/<N> of the output light; γ > 0 sums moments of the bracket pmf.
inline double fano_factor(const DetectorPlaneAmplitudes& amps, double phi, double gamma = 0.0) {
  validate(amps);
  if (!(amps.mean_photons() > 0.0))
    throw UndefinedFano("Fano factor undefined for zero mean photon number");
  if (gamma == 0.0) return fano_factor_closed_form(amps, phi);
  const auto [m1, m2] = pmf_moments(photon_pmf_noisy(amps, phi, gamma));
  return (m2 - m1 * m1) / m1;
}

/// Bhattacharyya overlap Σ_n √(p_n q_n); the shorter pmf is zero-padded.
inline double pmf_fidelity(const PhotonPmf& p, const PhotonPmf& q) {
  const std::size_t len = std::min(p.size(), q.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < len; ++n) acc += std::sqrt(p.probs[n] * q.probs[n]);
  return std::min(acc, 1.0);
}

/// Empirical pmf from photon-count occurrences m_n.
inline PhotonPmf empirical_pmf(std::span<const std::uint64_t> occurrences) {
  PhotonPmf pmf;
  std::uint64_t total = 0;
  for (auto m : occurrences) total += m;
  if (total == 0) throw std::invalid_argument("empirical pmf needs at least one count");
  pmf.probs.resize(occurrences.size());
  for (std::size_t n = 0; n < occurrences.size(); ++n)
    pmf.probs[n] = static_cast<double>(occurrences[n]) / static_cast<double>(total);
  pmf.n_max = occurrences.empty() ? 0 : occurrences.size() - 1;
  return pmf;
}

}  // namespace kphase
