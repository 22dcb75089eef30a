#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "kphase/photonstats.hpp"

namespace kphase {

/// Physical receiver settings. Equal priors on the two BPSK symbols.
class ReceiverParams {
 public:
  ReceiverParams(double alpha, double beta, double tau) : alpha_(alpha), beta_(beta), tau_(tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0,1)");
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
      throw std::invalid_argument("alpha and beta must be finite and nonnegative");
  }

  /// Local oscillator chosen so the displacement nulls the |−β⟩ symbol: α = β√(τ/(1−τ)).
  static ReceiverParams kennedy_matched(double beta, double tau) {
    return ReceiverParams(beta * std::sqrt(tau / (1.0 - tau)), beta, tau);
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double tau() const { return tau_; }

  double a() const { return alpha_ * std::sqrt(1.0 - tau_); }
  double b() const { return beta_ * std::sqrt(tau_); }

 private:
  double alpha_;
  double beta_;
  double tau_;
};

/// Logical bit: 1 ↔ |β⟩, 0 ↔ |−β⟩.
enum class Bit : std::uint8_t { Zero = 0, One = 1 };

inline DetectorPlaneAmplitudes detector_amplitudes(const ReceiverParams& params) {
  return {params.a(), params.b()};
}

/// On/off decision: no click → 0, any click → 1. PNR counts are coarse-grained.
constexpr Bit discriminate(std::uint64_t count) { return count == 0 ? Bit::Zero : Bit::One; }

/// Kennedy-receiver error probability with LO phase offset φ, in the τ → 1 limit:
/// [1 − e^{−4β²sin²(φ/2)} + e^{−4β²cos²(φ/2)}] / 2.
inline double error_probability(double beta, double phi) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
  const double energy = 4.0 * beta * beta;
  const double s = std::sin(0.5 * phi);
  const double c = std::cos(0.5 * phi);
  // -expm1 keeps the small-φ regime accurate.
  return 0.5 * (-std::expm1(-energy * s * s) + std::exp(-energy * c * c));
}

/// Minimum error probability for equiprobable |±β⟩: ½(1 − √(1 − e^{−4β²})).
inline double helstrom_bound(double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
  const double overlap = std::exp(-4.0 * beta * beta);
  // 1 − √(1−x) = x / (1 + √(1−x)) avoids cancellation for large β.
  return 0.5 * overlap / (1.0 + std::sqrt(1.0 - overlap));
}

/// Exact finite-amplitude error probability of the on/off decision, from the
/// output photon statistics: ½[P(no click | 1) + P(click | 0)].
inline double error_probability_at_detector(const DetectorPlaneAmplitudes& amps, double phi) {
  const auto [nu_one, nu_zero] = nu_plus_minus(amps, phi);
  return 0.5 * (std::exp(-nu_one) - std::expm1(-nu_zero));
}

}  // namespace kphase
