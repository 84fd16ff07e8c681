#include "skillrate/likelihood.hpp"

#include <cmath>
#include <numbers>

namespace skillrate {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Upper-tail log Phi for very negative x via the asymptotic Mills expansion.
double log_normal_cdf_tail(double x) {
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

// d/dx log sigmoid(x)
double log_sigmoid_slope(Sigmoid kind, double x) {
  if (kind == Sigmoid::Logistic) return sigmoid(Sigmoid::Logistic, -x);
  if (x < -37.0) {
    const double x2 = x * x;
    return -x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
  }
  return std::exp(-0.5 * x * x - kLogSqrt2Pi - log_normal_cdf(x));
}

// d^2/dx^2 log sigmoid(x)
double log_sigmoid_curvature(Sigmoid kind, double x) {
  if (kind == Sigmoid::Logistic) return -sigmoid(Sigmoid::Logistic, x) * sigmoid(Sigmoid::Logistic, -x);
  const double lambda = log_sigmoid_slope(kind, x);
  return -lambda * (x + lambda);
}

// log sigmoid'(x)
double log_sigmoid_density(Sigmoid kind, double x) {
  if (kind == Sigmoid::Logistic) return log_sigmoid(kind, x) + log_sigmoid(kind, -x);
  return -0.5 * x * x - kLogSqrt2Pi;
}

// sigmoid''(x) / sigmoid'(x)
double density_slope(Sigmoid kind, double x) {
  if (kind == Sigmoid::Logistic) return sigmoid(kind, -x) - sigmoid(kind, x);
  return -x;
}

// log(sigmoid(a) - sigmoid(b)) for a > b.
double log_sigmoid_band(Sigmoid kind, double a, double b) {
  if (!(a > b)) return -std::numeric_limits<double>::infinity();
  if (kind == Sigmoid::Logistic) {
    // sig(a) - sig(b) = sig(a) sig(-b) (1 - e^{b-a})
    return log_sigmoid(kind, a) + log_sigmoid(kind, -b) + std::log1p(-std::exp(b - a));
  }
  if (b > 0.0) {
    const double hi = log_normal_cdf(-b);
    return hi + std::log1p(-std::exp(log_normal_cdf(-a) - hi));
  }
  const double hi = log_normal_cdf(a);
  return hi + std::log1p(-std::exp(log_normal_cdf(b) - hi));
}

}  // namespace

const char* to_string(Sigmoid s) { return s == Sigmoid::Logistic ? "logistic" : "probit"; }

Sigmoid parse_sigmoid(std::string_view name) {
  if (name == "logistic") return Sigmoid::Logistic;
  if (name == "probit" || name == "inverse_probit") return Sigmoid::InverseProbit;
  throw_input("unknown sigmoid '" + std::string(name) + "'");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double log_normal_cdf(double x) {
  if (x < -37.0) return log_normal_cdf_tail(x);
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  return std::log(normal_cdf(x));
}

double sigmoid(Sigmoid kind, double x) {
  if (kind == Sigmoid::InverseProbit) return normal_cdf(x);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(Sigmoid kind, double x) {
  if (kind == Sigmoid::InverseProbit) return log_normal_cdf(x);
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double log_outcome_likelihood(double diff, Outcome y, const ObservationModel& obs) {
  const double hi = (diff + obs.epsilon) / obs.scale;
  const double lo = (diff - obs.epsilon) / obs.scale;
  switch (y) {
    case Outcome::HomeWin: return log_sigmoid(obs.sigmoid, lo);
    case Outcome::AwayWin: return log_sigmoid(obs.sigmoid, -hi);
    case Outcome::Draw: return log_sigmoid_band(obs.sigmoid, hi, lo);
  }
  return kLogFloor;
}

double outcome_likelihood(double diff, Outcome y, const ObservationModel& obs) {
  return std::exp(log_outcome_likelihood(diff, y, obs));
}

PredictiveProbs outcome_probabilities(double diff, const ObservationModel& obs) {
  PredictiveProbs p;
  p.home = outcome_likelihood(diff, Outcome::HomeWin, obs);
  p.away = outcome_likelihood(diff, Outcome::AwayWin, obs);
  // Draw as the complement keeps the triple normalised to rounding.
  p.draw = obs.epsilon > 0.0 ? std::max(0.0, 1.0 - p.home - p.away) : 0.0;
  if (obs.epsilon > 0.0 && p.draw < 1e-3) p.draw = outcome_likelihood(diff, Outcome::Draw, obs);
  const double total = p.sum();
  p.home /= total;
  p.away /= total;
  p.draw /= total;
  return p;
}

Taylor2 log_likelihood_taylor(double diff, Outcome y, const ObservationModel& obs) {
  const double s = obs.scale;
  const double hi = (diff + obs.epsilon) / s;
  const double lo = (diff - obs.epsilon) / s;
  Taylor2 t;
  switch (y) {
    case Outcome::HomeWin:
      t.value = log_sigmoid(obs.sigmoid, lo);
      t.first = log_sigmoid_slope(obs.sigmoid, lo) / s;
      t.second = log_sigmoid_curvature(obs.sigmoid, lo) / (s * s);
      break;
    case Outcome::AwayWin:
      t.value = log_sigmoid(obs.sigmoid, -hi);
      t.first = -log_sigmoid_slope(obs.sigmoid, -hi) / s;
      t.second = log_sigmoid_curvature(obs.sigmoid, -hi) / (s * s);
      break;
    case Outcome::Draw: {
      t.value = log_sigmoid_band(obs.sigmoid, hi, lo);
      const double ra = std::exp(log_sigmoid_density(obs.sigmoid, hi) - t.value);
      const double rb = std::exp(log_sigmoid_density(obs.sigmoid, lo) - t.value);
      t.first = (ra - rb) / s;
      t.second = (ra * density_slope(obs.sigmoid, hi) - rb * density_slope(obs.sigmoid, lo)) / (s * s) -
                 t.first * t.first;
      break;
    }
  }
  return t;
}

double log_likelihood_epsilon_slope(double diff, Outcome y, const ObservationModel& obs) {
  const double s = obs.scale;
  const double hi = (diff + obs.epsilon) / s;
  const double lo = (diff - obs.epsilon) / s;
  switch (y) {
    case Outcome::HomeWin: return -log_sigmoid_slope(obs.sigmoid, lo) / s;
    case Outcome::AwayWin: return -log_sigmoid_slope(obs.sigmoid, -hi) / s;
    case Outcome::Draw: {
      const double band = log_sigmoid_band(obs.sigmoid, hi, lo);
      return (std::exp(log_sigmoid_density(obs.sigmoid, hi) - band) +
              std::exp(log_sigmoid_density(obs.sigmoid, lo) - band)) / s;
    }
  }
  return 0.0;
}

double probit_gaussian_cdf_integral(double mu, double var) {
  if (var < 0.0) throw_usage("probit_gaussian_cdf_integral: negative variance");
  return normal_cdf(mu / std::sqrt(1.0 + var));
}

void require_draw_support(const MatchStream& stream, double epsilon, const char* what) {
  if (epsilon <= 0.0 && stream.has_draws())
    throw_input(std::string(what) +
                ": data contain draws but the draw width is zero; set epsilon > 0");
}

}  // namespace skillrate
