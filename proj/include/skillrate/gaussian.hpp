#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "skillrate/core.hpp"
#include "skillrate/likelihood.hpp"

namespace skillrate {

struct GaussianSkill {
  double mean = 0.0;
  double var = 1.0;
};

struct EloParams {
  double k = 0.1;
  double kappa = 0.0;
  double scale = 1.0;
};

struct GaussianParams {
  double sigma0 = 1.0;
  double tau = 0.05;
  double epsilon = 0.0;
  Sigmoid sigmoid = Sigmoid::Logistic;
  /// Glicko variance cap (a standard deviation). Unset for every other method.
  std::optional<double> sigma_max;

  ObservationModel observation() const { return {epsilon, 1.0, sigmoid}; }
  void validate() const;
};

enum class GaussianMethod { EloDavidson, Glicko, ExtendedKalman, TrueSkill2 };

struct EloUpdate {
  double home = 0.0;
  double away = 0.0;
  PredictiveProbs probs;
};

PredictiveProbs elo_davidson_probs(double xh, double xa, const EloParams& p);
EloUpdate elo_davidson_update(double xh, double xa, Outcome y, const EloParams& p);

/// var += tau^2 dt, capped at sigma_max^2 when a cap is given.
GaussianSkill gaussian_propagate(const GaussianSkill& b, double dt, double tau,
                                 std::optional<double> sigma_max = std::nullopt);
GaussianSkill gaussian_propagate(const GaussianSkill& b, double dt, const GaussianParams& p);

/// Posterior of a two-player Gaussian update, before marginalisation.
struct PairPosterior {
  GaussianSkill home;
  GaussianSkill away;
  double cross_cov = 0.0;
  /// log of the predictive normaliser (surrogate or exact, by method).
  double logpred = 0.0;
  /// Set when the curvature had to be dropped to keep the joint precision
  /// positive definite.
  bool first_order = false;
};

/// Extended Kalman update for an arbitrary log-likelihood in d = xh - xa,
/// expanded to second order at the predictive mean difference. `expansion`
/// is log G and its first two d-derivatives at mu_h - mu_a. The surrogate is
/// conjugate, so the returned moments are its exact posterior.
PairPosterior ek_assimilate(const GaussianSkill& bh, const GaussianSkill& ba,
                            const Taylor2& expansion);
PairPosterior ek_assimilate(const GaussianSkill& bh, const GaussianSkill& ba, Outcome y,
                            const ObservationModel& obs);
/// Surrogate outcome integrals for the three outcomes, normalised.
PredictiveProbs ek_predictive(const GaussianSkill& bh, const GaussianSkill& ba,
                              const ObservationModel& obs);

/// Moment-matched update under the probit likelihood: exact marginal means
/// and variances of the non-Gaussian joint filter, and the exact predictive
/// log-probability.
PairPosterior ts2_assimilate(const GaussianSkill& bh, const GaussianSkill& ba, Outcome y,
                             const ObservationModel& obs);
PredictiveProbs ts2_predictive(const GaussianSkill& bh, const GaussianSkill& ba,
                               const ObservationModel& obs);

struct SmoothStep {
  GaussianSkill smooth;
  double lag_one = 0.0;  ///< E[x_k x_{k+1}] under the smoother
};

/// One backward Rauch-Tung-Striebel step from the smoothed belief at the
/// player's next matchtime. `predicted_var_next` is the one-step predicted
/// variance that fed that next match.
SmoothStep kalman_smooth_step(const GaussianSkill& filt, const GaussianSkill& smooth_next,
                              double predicted_var_next);
SmoothStep kalman_smooth_step(const GaussianSkill& filt, const GaussianSkill& smooth_next,
                              double dt, double tau);

/// One (player, matchtime) element of the sparse posterior.
struct SkillEntry {
  std::size_t match = 0;
  double time = 0.0;
  double dt = 0.0;  ///< time since the player's previous match (0 at the anchor)
  GaussianSkill predict;
  GaussianSkill filter;
};

struct GaussianFilterTrace {
  /// players[i][j]: player i at its j-th match. The prior anchor is the
  /// predict belief of j = 0.
  std::vector<std::vector<SkillEntry>> players;
  std::vector<PredictiveProbs> probs;
  std::vector<double> logpred;
  std::vector<std::uint8_t> first_order;
  double log_likelihood = 0.0;

  std::size_t first_order_count() const;
};

/// Result of assimilating one match given the two predicted beliefs.
struct MatchUpdate {
  GaussianSkill home;
  GaussianSkill away;
  PredictiveProbs probs;
  double logpred = 0.0;
  bool first_order = false;
};

using GaussianAssimilator =
    std::function<MatchUpdate(std::size_t match, const GaussianSkill& home, const GaussianSkill& away)>;

/// Sweep with a caller-supplied assimilation step. New players start from
/// N(0, sigma0^2) at their first match.
GaussianFilterTrace run_filter(const MatchStream& stream, const SparseIndex& index,
                               const GaussianParams& params, const GaussianAssimilator& assimilate,
                               unsigned threads = 1);

GaussianFilterTrace run_filter(const MatchStream& stream, const SparseIndex& index,
                               const GaussianParams& params, GaussianMethod method,
                               unsigned threads = 1);

/// Elo-Davidson sweep. Ratings are stored as means with zero variance.
GaussianFilterTrace run_elo_filter(const MatchStream& stream, const SparseIndex& index,
                                   const EloParams& params);

struct SmoothEntry {
  std::size_t match = 0;
  double time = 0.0;
  GaussianSkill smooth;
  /// E[x_j x_{j+1}] with the player's next matchtime; NaN at the last one.
  double lag_one = 0.0;
};

struct GaussianSmoothResult {
  std::vector<std::vector<SmoothEntry>> players;
};

GaussianSmoothResult run_smoother(const GaussianFilterTrace& trace, unsigned threads = 1);

/// Predictive probabilities for a fixture between beliefs already propagated
/// to the fixture time.
PredictiveProbs gaussian_predictive(const GaussianSkill& bh, const GaussianSkill& ba,
                                    const GaussianParams& params, GaussianMethod method);

}  // namespace skillrate
