#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace kphase::detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline constexpr std::size_t kLogFactorialTableSize = 1024;

// Built once during static initialization of the function-local table and
// never mutated afterwards, so concurrent readers are safe.
inline const std::array<double, kLogFactorialTableSize>& log_factorial_table() {
  static const auto table = [] {
    std::array<double, kLogFactorialTableSize> t{};
    t[0] = 0.0;
    for (std::size_t n = 1; n < t.size(); ++n) t[n] = std::lgamma(static_cast<double>(n) + 1.0);
    return t;
  }();
  return table;
}

/// ln(n!)
inline double log_factorial(std::size_t n) {
  if (n < kLogFactorialTableSize) return log_factorial_table()[n];
  // Stirling series; relative error far below double epsilon for n >= 1024.
  const double x = static_cast<double>(n) + 1.0;
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * M_PI) + 1.0 / (12.0 * x) -
         1.0 / (360.0 * x * x * x);
}

/// ln(e^x + e^y) without overflow.
inline double log_add_exp(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double hi = std::max(x, y);
  return hi + std::log1p(std::exp(-std::abs(x - y)));
}

/// ln Σ w_i e^{x_i} for nonnegative weights.
inline double log_sum_exp(std::span<const double> logs, std::span<const double> weights) {
  double hi = kNegInf;
  for (double v : logs) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) acc += weights[i] * std::exp(logs[i] - hi);
  return hi + std::log(acc);
}

/// ln Poisson(n; mean). Zero mean is the point mass at n = 0.
inline double log_poisson(std::size_t n, double mean) {
  if (mean <= 0.0) return n == 0 ? 0.0 : kNegInf;
  return -mean + static_cast<double>(n) * std::log(mean) - log_factorial(n);
}

}  // namespace kphase::detail
