#pragma once

#include <Eigen/Dense>
#include <vector>

#include "skillrate/core.hpp"
#include "skillrate/likelihood.hpp"

namespace skillrate {

/// Probability vector over the states 1..S (stored 0-based).
using Categorical = Eigen::VectorXd;

struct DiscreteParams {
  std::size_t states = 500;
  double sigma_d = 50.0;   ///< initial spread; the walk runs for sigma_d^2 at rate 1
  double tau_d = 1.0;      ///< jump rate per day
  double epsilon_d = 0.0;  ///< draw width in state units
  double scale = 0.0;      ///< likelihood scale s_d; 0 selects S/5
  Sigmoid sigmoid = Sigmoid::InverseProbit;

  double likelihood_scale() const { return scale > 0.0 ? scale : static_cast<double>(states) / 5.0; }
  ObservationModel observation() const { return {epsilon_d, likelihood_scale(), sigmoid}; }
  void validate() const;
};

/// Generator Q = P - I of the reflected walk: 1/2 to each neighbour, the
/// missing neighbour's mass held at the two boundary states.
Eigen::MatrixXd build_generator(std::size_t S);

enum class SpectrumSource {
  ClosedForm,  ///< the periodic-looking closed form (accepted only if it checks out)
  Cosine,      ///< DCT-II eigenbasis of the reflected walk
  Numerical,   ///< symmetric eigensolver
};

const char* to_string(SpectrumSource s);

/// Q = psi^T diag(lambda) psi, eigenvectors in the rows of psi.
struct Spectrum {
  Eigen::MatrixXd psi;
  Eigen::VectorXd lambda;
  SpectrumSource source = SpectrumSource::Numerical;

  std::size_t size() const { return static_cast<std::size_t>(lambda.size()); }
};

/// Candidate pairs, exposed for testing.
Spectrum closed_form_spectrum(std::size_t S);
Spectrum cosine_spectrum(std::size_t S);
Spectrum numerical_spectrum(std::size_t S);

/// max(|psi psi^T - I|, |psi^T diag(lambda) psi - Q|) entrywise.
double spectrum_error(const Spectrum& spec, const Eigen::MatrixXd& generator);

/// First candidate whose error is below 1e-10; throws Numerical if none.
Spectrum build_spectrum(std::size_t S);

/// v exp(t Q) for any row vector v (no clamping), O(S^2).
Eigen::VectorXd apply_kernel(const Eigen::VectorXd& v, double t, const Spectrum& spec);

/// pi exp(rate dt Q), clamped to >= 0 and renormalised.
Categorical discrete_propagate(const Categorical& pi, double dt, double rate, const Spectrum& spec);

/// The one or two median states: index (S-1)/2 for odd S, S/2-1 and S/2 for
/// even S (0-based).
Categorical median_states(std::size_t S);
Categorical build_initial(const DiscreteParams& p, const Spectrum& spec);

/// (a, b) -> G(y | a - b) for states a (home) and b (away).
Eigen::MatrixXd discrete_likelihood_table(Outcome y, const DiscreteParams& p);

struct DiscreteAssimilation {
  Categorical home;
  Categorical away;
  double logpred = 0.0;
};

DiscreteAssimilation discrete_assimilate(const Categorical& ph, const Categorical& pa,
                                         const Eigen::MatrixXd& table);

/// Smooth_k = Filter_k (.) [(Smooth_{k+1} / Predict_{k+1}) M^T], renormalised.
/// With dt == 0 the kernel is the identity and smooth_next is returned.
Categorical discrete_smooth_step(const Categorical& filt, const Categorical& smooth_next,
                                 const Categorical& predict_next, double dt, double rate,
                                 const Spectrum& spec);

struct CategoricalEntry {
  std::size_t match = 0;
  double time = 0.0;
  double dt = 0.0;
  Categorical predict;
  Categorical filter;
};

struct DiscreteFilterTrace {
  std::vector<std::vector<CategoricalEntry>> players;
  std::vector<PredictiveProbs> probs;
  std::vector<double> logpred;
  double log_likelihood = 0.0;
};

/// Holds the spectrum, the initial vector and the three outcome tables.
struct DiscreteModel {
  DiscreteParams params;
  Spectrum spectrum;
  Categorical initial;
  std::array<Eigen::MatrixXd, 3> tables;

  static DiscreteModel build(const DiscreteParams& params);
  /// Rebuild for new parameters, reusing the spectrum when S is unchanged.
  DiscreteModel with(const DiscreteParams& params) const;
  PredictiveProbs predictive(const Categorical& ph, const Categorical& pa) const;
};

DiscreteFilterTrace run_discrete_filter(const MatchStream& stream, const SparseIndex& index,
                                        const DiscreteModel& model, unsigned threads = 1);

/// smooth[i][j]: player i at its j-th match.
using DiscreteSmoothResult = std::vector<std::vector<Categorical>>;

DiscreteSmoothResult run_discrete_smoother(const DiscreteFilterTrace& trace,
                                           const DiscreteModel& model, unsigned threads = 1);

/// dQ2/dtau_d at the rate used to build the trace. Each transition
/// contributes N/D with F = Filter_{k-1} psi^T, R = (Smooth_k / Predict_k) psi^T,
/// N = sum F dt lambda exp(rate dt lambda) R, D = sum F exp(rate dt lambda) R.
double q2_gradient(const DiscreteFilterTrace& trace, const DiscreteSmoothResult& smooth,
                   double rate, const Spectrum& spec, unsigned threads = 1);

/// Transition statistics for exact Q2 evaluation: one accumulated matrix
/// sum F (x) (Smooth / Predict) per distinct dt, already multiplied by the
/// kernel at the E-step rate, so Q2(rate) = sum <J_dt, log M_dt(rate)>.
struct TransitionStatistics {
  std::vector<double> dts;
  std::vector<Eigen::MatrixXd> joints;

  /// Number of S^3 kernels needed to evaluate Q2 once.
  std::size_t cost_units() const { return dts.size(); }
};

TransitionStatistics transition_statistics(const DiscreteFilterTrace& trace,
                                           const DiscreteSmoothResult& smooth, double rate,
                                           const Spectrum& spec);
double q2_value(const TransitionStatistics& stats, double rate, const Spectrum& spec);

}  // namespace skillrate
