#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "skillrate/core.hpp"
#include "skillrate/likelihood.hpp"

namespace skillrate {

using Rng = std::mt19937_64;

/// Independent generator for one (a, b, tag) cell, derived from the run seed
/// by a splitmix64 hash. Streams never depend on scheduling.
Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag);

struct ParticleBelief {
  std::vector<double> positions;
  std::vector<double> weights;

  static ParticleBelief uniform(std::vector<double> positions);
  std::size_t size() const { return positions.size(); }
  /// Throws Numerical unless J >= 2, positions are finite and weights are a
  /// distribution (to 1e-9).
  void validate() const;
};

/// Skill dynamics seen by the particle filter: an initial law and a
/// transition kernel with a tractable density for backward simulation.
class SkillDynamics {
 public:
  virtual ~SkillDynamics() = default;
  virtual double sample_initial(Rng& rng) const = 0;
  virtual double sample(double x, double dt, Rng& rng) const = 0;
  /// log M_dt(from, to) up to a term independent of `from`.
  virtual double log_transition(double from, double to, double dt) const = 0;
  /// True when M_dt is the identity kernel.
  virtual bool is_identity(double dt) const = 0;
};

/// Gaussian random walk: x_0 ~ N(0, sigma0^2), increments N(0, tau^2 dt).
class GaussianWalk final : public SkillDynamics {
 public:
  GaussianWalk(double sigma0, double tau);
  double sample_initial(Rng& rng) const override;
  double sample(double x, double dt, Rng& rng) const override;
  double log_transition(double from, double to, double dt) const override;
  bool is_identity(double dt) const override { return tau_ == 0.0 || dt == 0.0; }

 private:
  double sigma0_;
  double tau_;
};

/// log G(y | x_home, x_away) for one match.
using PairLogLikelihood = std::function<double(std::size_t match, double xh, double xa)>;

PairLogLikelihood outcome_pair_likelihood(const MatchStream& stream, const ObservationModel& obs);

/// Moves every particle through the kernel; weights are untouched.
ParticleBelief smc_propagate(const ParticleBelief& b, double dt, const SkillDynamics& dyn, Rng& rng);

struct SmcAssimilation {
  ParticleBelief home;  ///< resampled, uniform weights
  ParticleBelief away;
  std::vector<double> weights;  ///< normalised joint weights before resampling
  double logpred = 0.0;
};

/// Pairs particles by index, reweights by the likelihood, and resamples the
/// J joint pairs multinomially.
SmcAssimilation smc_assimilate(const ParticleBelief& bh, const ParticleBelief& ba,
                               const std::function<double(double, double)>& log_lik, Rng& rng);

/// Multinomial ancestor draw: J indices from a normalised weight vector.
std::vector<std::size_t> multinomial_resample(const std::vector<double>& weights, std::size_t count,
                                              Rng& rng);

struct ParticleEntry {
  std::size_t match = 0;
  double time = 0.0;
  double dt = 0.0;
  std::vector<double> positions;  ///< predicted positions at this matchtime
  std::vector<double> weights;    ///< filter weights before resampling
};

struct SmcConfig {
  std::size_t particles = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct SmcTrace {
  std::vector<std::vector<ParticleEntry>> players;
  std::vector<PredictiveProbs> probs;  ///< empty unless outcome probabilities were requested
  std::vector<double> logpred;
  double log_likelihood = 0.0;
};

/// Particle filter over the stream. When `obs` is given, the outcome
/// probabilities of each match are estimated from the predicted pairs.
SmcTrace run_smc_filter(const MatchStream& stream, const SparseIndex& index,
                        const SkillDynamics& dyn, const PairLogLikelihood& log_lik,
                        const SmcConfig& config, const ObservationModel* obs = nullptr);

/// Smoothed trajectories of one player: sample m, entry j at [m * n + j].
struct PlayerTrajectories {
  std::size_t samples = 0;
  std::size_t length = 0;
  std::vector<double> values;

  double at(std::size_t sample, std::size_t entry) const { return values[sample * length + entry]; }
};

/// Backward simulation of J unweighted trajectories per player, O(J^2) per
/// step. Trajectories sharing a next-step value share one weight vector.
std::vector<PlayerTrajectories> backward_simulate(const SmcTrace& trace, const SkillDynamics& dyn,
                                                  const SmcConfig& config);

struct SmcEmStatistics {
  std::size_t samples = 0;  ///< J
  double initial_sq_sum = 0.0;  ///< sum over players and samples of x_0^2
  std::size_t initial_count = 0;  ///< players with at least one match, times J
  double transition_sum = 0.0;  ///< sum of (x_k - x_{k-1})^2 / dt over samples
  std::size_t transition_count = 0;  ///< transitions with dt > 0, times J
  /// diffs[k]: J samples of x_home - x_away at match k.
  std::vector<std::vector<double>> diffs;
};

SmcEmStatistics smc_em_statistics(const std::vector<PlayerTrajectories>& trajectories,
                                  const SmcTrace& trace, const MatchStream& stream);

}  // namespace skillrate
