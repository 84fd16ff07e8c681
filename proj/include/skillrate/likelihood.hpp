#pragma once

#include "skillrate/core.hpp"

namespace skillrate {

enum class Sigmoid { Logistic, InverseProbit };

const char* to_string(Sigmoid s);
Sigmoid parse_sigmoid(std::string_view name);

double sigmoid(Sigmoid kind, double x);
/// log sigmoid(x), accurate in both tails.
double log_sigmoid(Sigmoid kind, double x);

double normal_cdf(double x);
double normal_pdf(double x);
double log_normal_cdf(double x);

/// Three-outcome observation model shared by the continuous and discrete
/// models: P(home) = sig((d - eps)/s), P(away) = 1 - sig((d + eps)/s), draw
/// takes the band in between.
struct ObservationModel {
  double epsilon = 0.0;
  double scale = 1.0;
  Sigmoid sigmoid = Sigmoid::Logistic;
};

double outcome_likelihood(double diff, Outcome y, const ObservationModel& obs);
double log_outcome_likelihood(double diff, Outcome y, const ObservationModel& obs);
PredictiveProbs outcome_probabilities(double diff, const ObservationModel& obs);

/// Value, first and second derivative of a log-likelihood in the skill
/// difference d = x_home - x_away.
struct Taylor2 {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

Taylor2 log_likelihood_taylor(double diff, Outcome y, const ObservationModel& obs);

/// d/d(epsilon) of log G(y | diff).
double log_likelihood_epsilon_slope(double diff, Outcome y, const ObservationModel& obs);

/// E[Phi(z)] for z ~ N(mu, var), i.e. Phi(mu / sqrt(1 + var)).
double probit_gaussian_cdf_integral(double mu, double var);

/// Throws Input when the data contain draws the model cannot produce.
void require_draw_support(const MatchStream& stream, double epsilon, const char* what);

}  // namespace skillrate
