#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "skillrate/discrete.hpp"
#include "skillrate/gaussian.hpp"
#include "skillrate/learn.hpp"
#include "skillrate/smc.hpp"

namespace skillrate {

enum class Method { EloDavidson, Glicko, ExtendedKalman, TrueSkill2, Smc, Discrete };

/// Short names: elo, glicko, ek, ts2, smc, discrete.
const char* to_string(Method m);
/// Display names used in reports.
const char* display_name(Method m);
Method parse_method(std::string_view name);
/// Methods fitted by EM (the others use grid search).
bool fits_by_em(Method m);

/// Everything needed to run one method. Discrete parameters live in the
/// theta slots as (sigma_d, tau_d, epsilon_d).
struct ModelConfig {
  Method method = Method::ExtendedKalman;
  Theta theta;
  EloParams elo;
  Sigmoid sigmoid = Sigmoid::Logistic;
  std::optional<double> sigma_max;  ///< Glicko only; defaults to sigma0
  std::size_t particles = 1000;
  std::uint64_t seed = 1;
  std::size_t states = 500;
  double discrete_scale = 0.0;  ///< 0 selects S/5
  unsigned threads = 1;
  bool gradient_step = false;  ///< EM for ek/ts2: gradient step for sigma0 and tau

  /// Method defaults: logistic sigmoid for Elo/Glicko/EK, probit otherwise.
  static ModelConfig defaults(Method m);

  /// Numeric keys: sigma0 tau epsilon (sigma_d tau_d epsilon_d for the
  /// discrete model), k kappa sigma_max particles seed states scale threads gradient_step.
  void set(std::string_view key, double value);
  double get(std::string_view key) const;

  GaussianParams gaussian() const;
  DiscreteParams discrete() const;
  EmConfig em(std::size_t max_iters, double tol) const;
  void validate() const;
};

/// Flat key=value serialisation; `method` and `sigmoid` are written as names.
void write_params(std::ostream& out, const ModelConfig& config);
ModelConfig read_params(std::istream& in);

/// Summary of a belief at one (player, matchtime).
struct BeliefSummary {
  double mean = 0.0;
  double var = 0.0;
};

/// A finished filter sweep (and optionally smoothing) of one method.
class Run {
 public:
  static Run filter(std::shared_ptr<const MatchStream> stream, const ModelConfig& config);

  const MatchStream& stream() const { return *stream_; }
  const ModelConfig& config() const { return config_; }
  const std::vector<PredictiveProbs>& probs() const { return probs_; }
  const std::vector<double>& logpred() const { return logpred_; }
  double log_likelihood() const { return log_likelihood_; }
  double avg_nll() const;

  /// Throws Usage for Elo-Davidson, which has no smoother.
  void smooth();
  bool smoothed() const { return smoothed_; }

  struct Fixture {
    PredictiveProbs probs;
    bool home_unknown = false;
    bool away_unknown = false;
  };
  /// Propagates the players' latest filter beliefs to `time` (stream time)
  /// and integrates the likelihood. Unknown players start from the prior.
  Fixture predict(std::optional<PlayerId> home, std::optional<PlayerId> away, double time) const;

  /// Entries of player i: (match, time) plus predict/filter/smooth summaries
  /// and the smoothed lag-one moment (NaN where not defined).
  struct Row {
    std::size_t match = 0;
    double time = 0.0;
    BeliefSummary predict;
    BeliefSummary filter;
    std::optional<BeliefSummary> smooth;
    double lag_one = 0.0;
  };
  std::vector<Row> rows(PlayerId i) const;

  /// `player,match_index,time,kind,mean,var[,lag_one]` for every player.
  void write_ratings(std::ostream& out) const;
  void write_smooth(std::ostream& out) const;
  /// Particle trajectories `player,time,sample_index,position` (SMC only).
  void write_particles(std::ostream& out) const;
  /// Categorical vectors `player,match_index,time,kind,p1..pS` or the
  /// `mean,std,q05,q50,q95` summary (discrete only).
  void write_categorical(std::ostream& out, bool summary) const;

 private:
  std::shared_ptr<const MatchStream> stream_;
  ModelConfig config_;
  std::vector<PredictiveProbs> probs_;
  std::vector<double> logpred_;
  double log_likelihood_ = 0.0;
  bool smoothed_ = false;

  std::variant<GaussianFilterTrace, SmcTrace, DiscreteFilterTrace> trace_;
  GaussianSmoothResult gaussian_smooth_;
  std::vector<PlayerTrajectories> trajectories_;
  DiscreteSmoothResult discrete_smooth_;
  std::shared_ptr<const DiscreteModel> discrete_model_;
};

}  // namespace skillrate
