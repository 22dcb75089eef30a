#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace kphase {

/// Nodes and weights of a quadrature rule on a finite interval.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(std::size_t n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

/// Composite Gauss-Legendre rule on [lo, hi] with `panels` equal sub-intervals.
inline QuadratureRule composite_gauss_legendre(double lo, double hi, std::size_t points_per_panel,
                                               std::size_t panels) {
  static const QuadratureRule base64 = gauss_legendre(64);
  const QuadratureRule base = points_per_panel == 64 ? base64 : gauss_legendre(points_per_panel);
  QuadratureRule rule;
  rule.nodes.reserve(points_per_panel * panels);
  rule.weights.reserve(points_per_panel * panels);
  const double width = (hi - lo) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double left = lo + width * static_cast<double>(p);
    const double mid = left + 0.5 * width;
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
      rule.nodes.push_back(mid + 0.5 * width * base.nodes[i]);
      rule.weights.push_back(0.5 * width * base.weights[i]);
    }
  }
  return rule;
}

}  // namespace kphase
