#include "skillrate/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>

#include "skillrate/core.hpp"

namespace skillrate {

double QuadratureRule::expect(double mean, double var, const std::function<double(double)>& f) const {
  const double sd = std::sqrt(std::max(var, 0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) total += weights[i] * f(mean + sd * nodes[i]);
  return total;
}

QuadratureRule gauss_hermite(std::size_t n) {
  if (n == 0) throw_usage("gauss_hermite: need at least one node");
  // Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success) throw_numerical("gauss_hermite: eigensolver failed");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    rule.nodes[k] = solver.eigenvalues()(i);
    rule.weights[k] = solver.eigenvectors()(0, i) * solver.eigenvectors()(0, i);
  }
  return rule;
}

double maximize_unimodal(const std::function<double(double)>& f, double lo, double hi, double tol) {
  if (!(hi >= lo)) throw_usage("maximize_unimodal: empty bracket");
  if (!(tol > 0.0)) throw_usage("maximize_unimodal: tolerance must be positive");
  const int bits = std::clamp(static_cast<int>(std::ceil(1.0 - std::log2(tol))), 1,
                             std::numeric_limits<double>::digits / 2);
  double best = lo;
  double fbest = f(lo);
  if (hi > lo) {
    auto [x, neg] = boost::math::tools::brent_find_minima([&](double v) { return -f(v); }, lo, hi, bits);
    if (-neg > fbest) {
      best = x;
      fbest = -neg;
    }
    if (f(hi) > fbest) best = hi;
  }
  return best;
}

}  // namespace skillrate
