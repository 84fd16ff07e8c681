#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skillrate/core.hpp"
#include "skillrate/discrete.hpp"
#include "skillrate/gaussian.hpp"
#include "skillrate/quadrature.hpp"
#include "skillrate/smc.hpp"

namespace skillrate {

/// Static parameters (sigma0, tau, epsilon). For the discrete model the same
/// slots hold (sigma_d, tau_d, epsilon_d).
struct Theta {
  double sigma0 = 1.0;
  double tau = 0.05;
  double epsilon = 0.0;

  friend bool operator==(const Theta&, const Theta&) = default;
};

/// Upper end of the epsilon search, in likelihood-scale units.
inline constexpr double kEpsilonBracket = 5.0;
inline constexpr std::size_t kHermiteNodes = 30;
/// Draw width used to start EM on data with draws when none is given
/// (in units of the likelihood scale).
inline constexpr double kInitialEpsilon = 0.1;

// ---------------------------------------------------------------------------
// Gaussian E-step and M-steps

/// Smoothed moments needed by the closed-form M-steps.
struct GaussianEStep {
  std::vector<double> initial_second_moments;  ///< E[x_0^2] per player with a match
  std::vector<double> transition_moments;      ///< E[(x_j - x_{j-1})^2], dt > 0 only
  std::vector<double> transition_dts;
  std::vector<GaussianSkill> differences;      ///< law of x_h - x_a at each match
  std::vector<Outcome> outcomes;
};

GaussianEStep gaussian_e_step(const MatchStream& stream, const GaussianFilterTrace& trace,
                              const GaussianSmoothResult& smooth);

double m_step_sigma0(const GaussianEStep& e);
/// nullopt when there is no transition with positive elapsed time.
std::optional<double> m_step_tau(const GaussianEStep& e);

double q_sigma0(const GaussianEStep& e, double sigma0);
double q_tau(const GaussianEStep& e, double tau);
double q_epsilon(const GaussianEStep& e, double epsilon, Sigmoid sigmoid, const QuadratureRule& rule);

/// Golden-section maximiser of `objective` on [0, upper]; 0 when the data
/// have no draws.
double m_step_epsilon(const std::function<double(double)>& objective, bool has_draws,
                      double upper = kEpsilonBracket);

// ---------------------------------------------------------------------------
// Particle E-step

double q_sigma0(const SmcEmStatistics& st, double sigma0);
double q_tau(const SmcEmStatistics& st, double tau);
double q_epsilon(const SmcEmStatistics& st, const std::vector<Outcome>& outcomes, double epsilon,
                 Sigmoid sigmoid);

// ---------------------------------------------------------------------------
// Discrete E-step

struct DiscreteEStep {
  Categorical initial_mass;  ///< sum of smoothed first-match vectors
  /// mass[y][d + S - 1]: smoothed probability mass at home-minus-away state
  /// difference d over matches with outcome y.
  std::array<std::vector<double>, 3> difference_mass;
  bool has_draws = false;
};

DiscreteEStep discrete_e_step(const MatchStream& stream, const DiscreteFilterTrace& trace,
                              const DiscreteSmoothResult& smooth, std::size_t states);

double q_sigma_d(const DiscreteEStep& e, double sigma_d, const Spectrum& spec);
double q_epsilon_d(const DiscreteEStep& e, double epsilon_d, const DiscreteParams& p);

// ---------------------------------------------------------------------------
// Fisher gradients: E_smooth[grad log p(x, y | theta)]

struct FisherGradient {
  double sigma0 = 0.0;
  double tau = 0.0;
  double epsilon = 0.0;
};

/// Set `observation_term` to false for likelihoods without an epsilon.
FisherGradient fisher_gradient(const GaussianEStep& e, const Theta& theta, Sigmoid sigmoid,
                               const QuadratureRule& rule, bool observation_term = true);
FisherGradient fisher_gradient(const SmcEmStatistics& st, const std::vector<Outcome>& outcomes,
                               const Theta& theta, Sigmoid sigmoid, bool observation_term = true);
/// tau_d slot from q2_gradient; the other two by central differences of the
/// E-step objectives, which share their gradient with log P(y) at theta.
FisherGradient fisher_gradient(const DiscreteEStep& e, const DiscreteFilterTrace& trace,
                               const DiscreteSmoothResult& smooth, const DiscreteModel& model);

// ---------------------------------------------------------------------------
// EM driver

enum class EmMethod { ExtendedKalman, TrueSkill2, Smc, Discrete };

struct EmConfig {
  EmMethod method = EmMethod::ExtendedKalman;
  Sigmoid sigmoid = Sigmoid::Logistic;
  std::size_t states = 500;
  double discrete_scale = 0.0;  ///< 0 selects S/5
  std::size_t particles = 1000;
  std::uint64_t seed = 1;
  std::size_t max_iters = 1000;
  double tol = 1e-6;
  unsigned threads = 1;
  /// Gaussian methods: replace the closed-form sigma0/tau maximisers by one
  /// backtracking gradient-ascent step on the same objective.
  bool gradient_step = false;
};

struct EmState {
  Theta theta;
  std::size_t iteration = 0;
  std::vector<double> loglik_history;  ///< sum of log predictive probabilities
  std::vector<Theta> theta_history;
  /// Surrogate objective at the E-step parameters and after the M-step, one
  /// pair per iteration (NaN where too costly to evaluate).
  std::vector<std::pair<double, double>> q_history;
  bool converged = false;
  bool diverged = false;
  std::string note;
  std::size_t matches = 0;

  double avg_nll(std::size_t i) const { return -loglik_history.at(i) / static_cast<double>(matches); }
};

using EmObserver = std::function<void(const EmState&)>;

EmState em_fit(const MatchStream& stream, const Theta& init, const EmConfig& config,
               const EmObserver& observer = {});

/// Sum of log predictive probabilities of one filter sweep at theta.
double filter_log_likelihood(const MatchStream& stream, const Theta& theta, const EmConfig& config);

// ---------------------------------------------------------------------------
// Grid search

enum class GridMethod { EloDavidson, Glicko };

struct GridSpec {
  std::vector<double> p1;  ///< K (Elo) or sigma0 (Glicko)
  std::vector<double> p2;  ///< kappa (Elo) or tau (Glicko)
  double epsilon = 0.0;    ///< Glicko draw width
  Sigmoid sigmoid = Sigmoid::Logistic;
};

struct GridPoint {
  double p1 = 0.0;
  double p2 = 0.0;
  double avg_nll = 0.0;
};

struct GridResult {
  std::vector<GridPoint> surface;  ///< p1-major order
  GridPoint best;
};

GridResult grid_search(const MatchStream& stream, GridMethod method, const GridSpec& spec,
                       unsigned threads = 1);

}  // namespace skillrate
