#pragma once

#include <functional>
#include <vector>

namespace skillrate {

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1). Weights sum to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// E[f(X)] for X ~ N(mean, var).
  double expect(double mean, double var, const std::function<double(double)>& f) const;
};

/// n-point Gauss-Hermite rule for the standard normal weight (Golub-Welsch).
QuadratureRule gauss_hermite(std::size_t n);

/// Maximiser of a unimodal f on [lo, hi] by Brent's method to tolerance
/// `tol`. The end points are compared too, so boundary maxima are returned exactly.
double maximize_unimodal(const std::function<double(double)>& f, double lo, double hi,
                         double tol = 1e-6);

}  // namespace skillrate
