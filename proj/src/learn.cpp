#include "skillrate/learn.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <set>

namespace skillrate {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
/// Above this many S^3 kernel evaluations the tau_d line search compares
/// filter log-likelihoods instead of exact Q2 values.
constexpr double kExactQ2Budget = 5e9;

double floored(double l) { return std::isfinite(l) ? std::max(l, kLogFloor) : kLogFloor; }

std::vector<Outcome> outcomes_of(const MatchStream& stream) {
  std::vector<Outcome> out;
  out.reserve(stream.size());
  for (const auto& r : stream.records) out.push_back(r.outcome);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian

GaussianEStep gaussian_e_step(const MatchStream& stream, const GaussianFilterTrace& trace,
                              const GaussianSmoothResult& smooth) {
  GaussianEStep e;
  e.outcomes = outcomes_of(stream);
  std::vector<GaussianSkill> home(stream.size()), away(stream.size());
  for (std::size_t i = 0; i < trace.players.size(); ++i) {
    const auto& entries = trace.players[i];
    const auto& sm = smooth.players[i];
    if (entries.empty()) continue;
    const auto second = [&](std::size_t j) {
      return sm[j].smooth.var + sm[j].smooth.mean * sm[j].smooth.mean;
    };
    e.initial_second_moments.push_back(second(0));
    for (std::size_t j = 1; j < entries.size(); ++j) {
      if (!(entries[j].dt > 0.0)) continue;
      e.transition_moments.push_back(second(j) - 2.0 * sm[j - 1].lag_one + second(j - 1));
      e.transition_dts.push_back(entries[j].dt);
    }
    for (std::size_t j = 0; j < entries.size(); ++j) {
      const std::size_t k = entries[j].match;
      (stream.records[k].home == i ? home : away)[k] = sm[j].smooth;
    }
  }
  e.differences.resize(stream.size());
  for (std::size_t k = 0; k < stream.size(); ++k)
    e.differences[k] = {home[k].mean - away[k].mean, home[k].var + away[k].var};
  return e;
}

double m_step_sigma0(const GaussianEStep& e) {
  if (e.initial_second_moments.empty()) throw_input("no player has a match");
  double total = 0.0;
  for (double m : e.initial_second_moments) total += m;
  return std::sqrt(total / static_cast<double>(e.initial_second_moments.size()));
}

std::optional<double> m_step_tau(const GaussianEStep& e) {
  if (e.transition_moments.empty()) return std::nullopt;
  double total = 0.0;
  for (std::size_t t = 0; t < e.transition_moments.size(); ++t)
    total += e.transition_moments[t] / e.transition_dts[t];
  return std::sqrt(total / static_cast<double>(e.transition_moments.size()));
}

double q_sigma0(const GaussianEStep& e, double sigma0) {
  double q = 0.0;
  for (double m : e.initial_second_moments)
    q += -std::log(sigma0) - kHalfLog2Pi - m / (2.0 * sigma0 * sigma0);
  return q;
}

double q_tau(const GaussianEStep& e, double tau) {
  double q = 0.0;
  for (std::size_t t = 0; t < e.transition_moments.size(); ++t) {
    const double v = tau * tau * e.transition_dts[t];
    q += -0.5 * std::log(v) - kHalfLog2Pi - e.transition_moments[t] / (2.0 * v);
  }
  return q;
}

double q_epsilon(const GaussianEStep& e, double epsilon, Sigmoid sigmoid, const QuadratureRule& rule) {
  const ObservationModel obs{epsilon, 1.0, sigmoid};
  double q = 0.0;
  for (std::size_t k = 0; k < e.differences.size(); ++k) {
    const Outcome y = e.outcomes[k];
    q += rule.expect(e.differences[k].mean, e.differences[k].var,
                     [&](double z) { return floored(log_outcome_likelihood(z, y, obs)); });
  }
  return q;
}

double m_step_epsilon(const std::function<double(double)>& objective, bool has_draws, double upper) {
  if (!has_draws) return 0.0;
  return maximize_unimodal(objective, 0.0, upper, 1e-6);
}

// ---------------------------------------------------------------------------
// Particles

double q_sigma0(const SmcEmStatistics& st, double sigma0) {
  if (st.samples == 0) return 0.0;
  const double players = static_cast<double>(st.initial_count) / static_cast<double>(st.samples);
  return -players * (std::log(sigma0) + kHalfLog2Pi) -
         st.initial_sq_sum / static_cast<double>(st.samples) / (2.0 * sigma0 * sigma0);
}

// Omits the tau-independent log(2 pi dt) terms.
double q_tau(const SmcEmStatistics& st, double tau) {
  if (st.samples == 0) return 0.0;
  const double transitions = static_cast<double>(st.transition_count) / static_cast<double>(st.samples);
  return -transitions * std::log(tau) -
         st.transition_sum / static_cast<double>(st.samples) / (2.0 * tau * tau);
}

double q_epsilon(const SmcEmStatistics& st, const std::vector<Outcome>& outcomes, double epsilon,
                 Sigmoid sigmoid) {
  const ObservationModel obs{epsilon, 1.0, sigmoid};
  double q = 0.0;
  for (std::size_t k = 0; k < st.diffs.size(); ++k) {
    double sum = 0.0;
    for (double z : st.diffs[k]) sum += floored(log_outcome_likelihood(z, outcomes[k], obs));
    if (!st.diffs[k].empty()) q += sum / static_cast<double>(st.diffs[k].size());
  }
  return q;
}

// ---------------------------------------------------------------------------
// Discrete

DiscreteEStep discrete_e_step(const MatchStream& stream, const DiscreteFilterTrace& trace,
                              const DiscreteSmoothResult& smooth, std::size_t states) {
  const auto n = static_cast<Eigen::Index>(states);
  DiscreteEStep e;
  e.has_draws = stream.has_draws();
  e.initial_mass = Categorical::Zero(n);
  for (auto& m : e.difference_mass) m.assign(2 * states - 1, 0.0);
  std::vector<const Categorical*> home(stream.size()), away(stream.size());
  for (std::size_t i = 0; i < trace.players.size(); ++i) {
    const auto& entries = trace.players[i];
    if (entries.empty()) continue;
    e.initial_mass += smooth[i][0];
    for (std::size_t j = 0; j < entries.size(); ++j) {
      const std::size_t k = entries[j].match;
      (stream.records[k].home == i ? home : away)[k] = &smooth[i][j];
    }
  }
  for (std::size_t k = 0; k < stream.size(); ++k) {
    auto& mass = e.difference_mass[static_cast<int>(stream.records[k].outcome)];
    const Categorical& h = *home[k];
    const Categorical& a = *away[k];
    for (Eigen::Index x = 0; x < n; ++x) {
      if (h(x) == 0.0) continue;
      double* row = mass.data() + (x + n - 1);
      for (Eigen::Index z = 0; z < n; ++z) row[-z] += h(x) * a(z);
    }
  }
  return e;
}

double q_sigma_d(const DiscreteEStep& e, double sigma_d, const Spectrum& spec) {
  const Categorical m0 = discrete_propagate(median_states(spec.size()), sigma_d * sigma_d, 1.0, spec);
  double q = 0.0;
  for (Eigen::Index s = 0; s < m0.size(); ++s)
    if (e.initial_mass(s) > 0.0) q += e.initial_mass(s) * safe_log(m0(s));
  return q;
}

double q_epsilon_d(const DiscreteEStep& e, double epsilon_d, const DiscreteParams& p) {
  ObservationModel obs = p.observation();
  obs.epsilon = epsilon_d;
  const auto S = static_cast<long>(p.states);
  double q = 0.0;
  for (Outcome y : kAllOutcomes) {
    const auto& mass = e.difference_mass[static_cast<int>(y)];
    for (long d = -(S - 1); d < S; ++d) {
      const double w = mass[static_cast<std::size_t>(d + S - 1)];
      if (w > 0.0) q += w * floored(log_outcome_likelihood(static_cast<double>(d), y, obs));
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Fisher gradients

FisherGradient fisher_gradient(const GaussianEStep& e, const Theta& theta, Sigmoid sigmoid,
                               const QuadratureRule& rule, bool observation_term) {
  FisherGradient g;
  const double s0 = theta.sigma0;
  for (double m : e.initial_second_moments) g.sigma0 += -1.0 / s0 + m / (s0 * s0 * s0);
  const double tau = theta.tau;
  for (std::size_t t = 0; t < e.transition_moments.size(); ++t)
    g.tau += -1.0 / tau + e.transition_moments[t] / (tau * tau * tau * e.transition_dts[t]);
  if (observation_term) {
    const ObservationModel obs{theta.epsilon, 1.0, sigmoid};
    for (std::size_t k = 0; k < e.differences.size(); ++k) {
      const Outcome y = e.outcomes[k];
      g.epsilon += rule.expect(e.differences[k].mean, e.differences[k].var,
                               [&](double z) { return log_likelihood_epsilon_slope(z, y, obs); });
    }
  }
  return g;
}

FisherGradient fisher_gradient(const SmcEmStatistics& st, const std::vector<Outcome>& outcomes,
                               const Theta& theta, Sigmoid sigmoid, bool observation_term) {
  FisherGradient g;
  if (st.samples == 0) return g;
  const double J = static_cast<double>(st.samples);
  const double s0 = theta.sigma0;
  const double tau = theta.tau;
  g.sigma0 = -static_cast<double>(st.initial_count) / J / s0 + st.initial_sq_sum / J / (s0 * s0 * s0);
  g.tau = -static_cast<double>(st.transition_count) / J / tau + st.transition_sum / J / (tau * tau * tau);
  if (observation_term) {
    const ObservationModel obs{theta.epsilon, 1.0, sigmoid};
    for (std::size_t k = 0; k < st.diffs.size(); ++k) {
      double sum = 0.0;
      for (double z : st.diffs[k]) sum += log_likelihood_epsilon_slope(z, outcomes[k], obs);
      if (!st.diffs[k].empty()) g.epsilon += sum / static_cast<double>(st.diffs[k].size());
    }
  }
  return g;
}

FisherGradient fisher_gradient(const DiscreteEStep& e, const DiscreteFilterTrace& trace,
                               const DiscreteSmoothResult& smooth, const DiscreteModel& model) {
  const DiscreteParams& p = model.params;
  FisherGradient g;
  g.tau = q2_gradient(trace, smooth, p.tau_d, model.spectrum);
  const auto central = [](const std::function<double(double)>& f, double x) {
    const double h = 1e-4 * std::max(1.0, x);
    if (x < h) return (f(x + h) - f(x)) / h;
    return (f(x + h) - f(x - h)) / (2.0 * h);
  };
  g.sigma0 = central([&](double s) { return q_sigma_d(e, s, model.spectrum); }, p.sigma_d);
  if (e.has_draws) g.epsilon = central([&](double eps) { return q_epsilon_d(e, eps, p); }, p.epsilon_d);
  return g;
}

// ---------------------------------------------------------------------------
// EM

namespace {

// One backtracking step along sign(grad) of size 0.1 x, halved up to 20 times
// until the objective improves.
double ascent_step(const std::function<double(double)>& q, double x, double grad) {
  if (grad == 0.0 || !std::isfinite(grad)) return x;
  const double q0 = q(x);
  double step = std::copysign(0.1 * x, grad);
  for (int i = 0; i <= 20; ++i, step *= 0.5) {
    const double cand = x + step;
    if (cand > 0.0 && q(cand) > q0) return cand;
  }
  return x;
}

class EmEngine {
 public:
  virtual ~EmEngine() = default;
  /// Filters at theta and keeps the trace for the next M-step.
  virtual double filter(const Theta& theta, std::size_t iteration) = 0;
  /// Smooths the kept trace and returns the maximiser; fills (Q before, Q after).
  virtual Theta m_step(const Theta& theta, std::pair<double, double>& q) = 0;
};

class GaussianEngine final : public EmEngine {
 public:
  GaussianEngine(const MatchStream& stream, const EmConfig& config)
      : stream_(stream), config_(config), index_(SparseIndex::build(stream)),
        rule_(gauss_hermite(kHermiteNodes)), draws_(stream.has_draws()) {}

  double filter(const Theta& theta, std::size_t) override {
    const GaussianParams p{theta.sigma0, theta.tau, theta.epsilon, config_.sigmoid, std::nullopt};
    const auto method = config_.method == EmMethod::TrueSkill2 ? GaussianMethod::TrueSkill2
                                                                : GaussianMethod::ExtendedKalman;
    trace_ = run_filter(stream_, index_, p, method, config_.threads);
    return trace_.log_likelihood;
  }

  Theta m_step(const Theta& theta, std::pair<double, double>& q) override {
    const auto smooth = run_smoother(trace_, config_.threads);
    const GaussianEStep e = gaussian_e_step(stream_, trace_, smooth);
    Theta next = theta;
    if (config_.gradient_step) {
      const FisherGradient g = fisher_gradient(e, theta, config_.sigmoid, rule_, false);
      next.sigma0 = ascent_step([&](double s) { return q_sigma0(e, s); }, theta.sigma0, g.sigma0);
      if (!e.transition_moments.empty())
        next.tau = ascent_step([&](double t) { return q_tau(e, t); }, theta.tau, g.tau);
    } else {
      next.sigma0 = std::max(m_step_sigma0(e), 1e-8);
      if (auto tau = m_step_tau(e)) next.tau = *tau;
    }
    auto objective = [&](double eps) { return q_epsilon(e, eps, config_.sigmoid, rule_); };
    next.epsilon = m_step_epsilon(objective, draws_);
    const auto total = [&](const Theta& t) {
      return q_sigma0(e, t.sigma0) + (e.transition_moments.empty() ? 0.0 : q_tau(e, t.tau)) +
             objective(t.epsilon);
    };
    q = {total(theta), total(next)};
    return next;
  }

 private:
  const MatchStream& stream_;
  EmConfig config_;
  SparseIndex index_;
  QuadratureRule rule_;
  bool draws_;
  GaussianFilterTrace trace_;
};

class SmcEngine final : public EmEngine {
 public:
  SmcEngine(const MatchStream& stream, const EmConfig& config)
      : stream_(stream), config_(config), index_(SparseIndex::build(stream)),
        outcomes_(outcomes_of(stream)), draws_(stream.has_draws()) {}

  double filter(const Theta& theta, std::size_t iteration) override {
    require_draw_support(stream_, theta.epsilon, "particle filter");
    smc_ = {config_.particles, config_.seed + iteration, config_.threads};
    dyn_ = std::make_unique<GaussianWalk>(theta.sigma0, theta.tau);
    const ObservationModel obs{theta.epsilon, 1.0, config_.sigmoid};
    trace_ = run_smc_filter(stream_, index_, *dyn_, outcome_pair_likelihood(stream_, obs), smc_);
    return trace_.log_likelihood;
  }

  Theta m_step(const Theta& theta, std::pair<double, double>& q) override {
    const auto paths = backward_simulate(trace_, *dyn_, smc_);
    const SmcEmStatistics st = smc_em_statistics(paths, trace_, stream_);
    Theta next = theta;
    next.sigma0 = std::max(std::sqrt(st.initial_sq_sum / static_cast<double>(st.initial_count)), 1e-8);
    if (st.transition_count > 0)
      next.tau = std::sqrt(st.transition_sum / static_cast<double>(st.transition_count));
    auto objective = [&](double eps) { return q_epsilon(st, outcomes_, eps, config_.sigmoid); };
    next.epsilon = m_step_epsilon(objective, draws_);
    const auto total = [&](const Theta& t) {
      return q_sigma0(st, t.sigma0) + (st.transition_count ? q_tau(st, t.tau) : 0.0) + objective(t.epsilon);
    };
    q = {total(theta), total(next)};
    return next;
  }

 private:
  const MatchStream& stream_;
  EmConfig config_;
  SparseIndex index_;
  std::vector<Outcome> outcomes_;
  bool draws_;
  SmcConfig smc_;
  std::unique_ptr<GaussianWalk> dyn_;
  SmcTrace trace_;
};

class DiscreteEngine final : public EmEngine {
 public:
  DiscreteEngine(const MatchStream& stream, const EmConfig& config)
      : stream_(stream), config_(config), index_(SparseIndex::build(stream)),
        draws_(stream.has_draws()) {
    DiscreteParams p;
    p.states = config.states;
    p.scale = config.discrete_scale;
    p.sigmoid = config.sigmoid;
    model_ = DiscreteModel::build(p);
  }

  double filter(const Theta& theta, std::size_t) override {
    model_ = model_.with(params(theta));
    trace_ = run_discrete_filter(stream_, index_, model_, config_.threads);
    return trace_.log_likelihood;
  }

  Theta m_step(const Theta& theta, std::pair<double, double>& q) override {
    const auto smooth = run_discrete_smoother(trace_, model_, config_.threads);
    const DiscreteEStep e = discrete_e_step(stream_, trace_, smooth, config_.states);
    const Spectrum& spec = model_.spectrum;
    const DiscreteParams p = model_.params;
    Theta next = theta;
    next.sigma0 = maximize_unimodal([&](double s) { return q_sigma_d(e, s, spec); }, 0.0,
                                          static_cast<double>(config_.states), 1e-6);
    auto q3 = [&](double eps) { return q_epsilon_d(e, eps, p); };
    next.epsilon = m_step_epsilon(q3, draws_, kEpsilonBracket * p.likelihood_scale());

    std::set<double> dts;
    for (const auto& entries : trace_.players)
      for (std::size_t j = 1; j < entries.size(); ++j)
        if (entries[j].dt > 0.0) dts.insert(entries[j].dt);
    const double s3 = std::pow(static_cast<double>(config_.states), 3.0);
    const bool exact = s3 * static_cast<double>(dts.size()) <= kExactQ2Budget;

    double q2_before = kNaN, q2_after = kNaN;
    const double tau_hat = theta.tau;
    const double grad = dts.empty() ? 0.0 : q2_gradient(trace_, smooth, tau_hat, spec, config_.threads);
    double step = std::max(0.1 * tau_hat, 1e-6) * (grad > 0.0 ? 1.0 : (grad < 0.0 ? -1.0 : 0.0));
    if (exact) {
      const TransitionStatistics stats = transition_statistics(trace_, smooth, tau_hat, spec);
      q2_before = q2_after = q2_value(stats, tau_hat, spec);
      for (int halving = 0; step != 0.0 && halving <= 20; ++halving, step *= 0.5) {
        const double cand = std::max(tau_hat + step, 0.0);
        const double value = q2_value(stats, cand, spec);
        if (value > q2_before) {
          next.tau = cand;
          q2_after = value;
          break;
        }
      }
    } else if (step != 0.0) {
      Theta probe = next;
      probe.tau = tau_hat;
      const double base = log_likelihood_at(probe);
      for (int halving = 0; halving <= 20; ++halving, step *= 0.5) {
        probe.tau = std::max(tau_hat + step, 0.0);
        if (log_likelihood_at(probe) > base) {
          next.tau = probe.tau;
          break;
        }
      }
    }
    q = {q_sigma_d(e, theta.sigma0, spec) + q2_before + q3(theta.epsilon),
         q_sigma_d(e, next.sigma0, spec) + q2_after + q3(next.epsilon)};
    return next;
  }

 private:
  DiscreteParams params(const Theta& theta) const {
    DiscreteParams p = model_.params;
    p.sigma_d = theta.sigma0;
    p.tau_d = theta.tau;
    p.epsilon_d = theta.epsilon;
    return p;
  }

  double log_likelihood_at(const Theta& theta) const {
    const DiscreteModel m = model_.with(params(theta));
    return run_discrete_filter(stream_, index_, m, config_.threads).log_likelihood;
  }

  const MatchStream& stream_;
  EmConfig config_;
  SparseIndex index_;
  bool draws_;
  DiscreteModel model_;
  DiscreteFilterTrace trace_;
};

std::unique_ptr<EmEngine> make_engine(const MatchStream& stream, const EmConfig& config) {
  switch (config.method) {
    case EmMethod::ExtendedKalman:
    case EmMethod::TrueSkill2: return std::make_unique<GaussianEngine>(stream, config);
    case EmMethod::Smc: return std::make_unique<SmcEngine>(stream, config);
    case EmMethod::Discrete: return std::make_unique<DiscreteEngine>(stream, config);
  }
  throw_usage("unknown EM method");
}

}  // namespace

double filter_log_likelihood(const MatchStream& stream, const Theta& theta, const EmConfig& config) {
  return make_engine(stream, config)->filter(theta, 0);
}

EmState em_fit(const MatchStream& stream, const Theta& init, const EmConfig& config,
               const EmObserver& observer) {
  if (stream.empty()) throw_input("cannot fit parameters on an empty stream");
  if (config.max_iters == 0) throw_usage("max_iters must be positive");
  EmState st;
  st.matches = stream.size();
  st.theta = init;
  if (!stream.has_draws()) {
    st.theta.epsilon = 0.0;
  } else if (!(st.theta.epsilon > 0.0)) {
    // A zero draw width gives draws probability zero; start inside the bracket.
    double unit = 1.0;
    if (config.method == EmMethod::Discrete)
      unit = config.discrete_scale > 0.0 ? config.discrete_scale : static_cast<double>(config.states) / 5.0;
    st.theta.epsilon = kInitialEpsilon * unit;
  }
  auto engine = make_engine(stream, config);

  const double ll0 = engine->filter(st.theta, 0);
  if (!std::isfinite(ll0)) throw_numerical("log-likelihood at the initial parameters is not finite");
  st.loglik_history.push_back(ll0);
  st.theta_history.push_back(st.theta);
  if (observer) observer(st);

  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    try {
      std::pair<double, double> q{kNaN, kNaN};
      const Theta next = engine->m_step(st.theta, q);
      const double ll = engine->filter(next, it);
      if (!std::isfinite(ll)) {
        st.diverged = true;
        st.note = "log-likelihood became non-finite; kept the last good parameters";
        break;
      }
      st.theta = next;
      st.iteration = it;
      st.loglik_history.push_back(ll);
      st.theta_history.push_back(next);
      st.q_history.push_back(q);
      if (observer) observer(st);
      if (std::abs(st.avg_nll(it) - st.avg_nll(it - 1)) < config.tol) {
        st.converged = true;
        break;
      }
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::Numerical) throw;
      st.diverged = true;
      st.note = std::string("numerical failure: ") + err.what() + "; kept the last good parameters";
      break;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Grid search

GridResult grid_search(const MatchStream& stream, GridMethod method, const GridSpec& spec,
                       unsigned threads) {
  if (spec.p1.empty() || spec.p2.empty()) throw_input("grid search needs a nonempty grid");
  if (stream.empty()) throw_input("grid search needs at least one match");
  const SparseIndex index = SparseIndex::build(stream);
  GridResult result;
  result.surface.resize(spec.p1.size() * spec.p2.size());
  const double K = static_cast<double>(stream.size());
  parallel_for(result.surface.size(), threads, [&](std::size_t g) {
    const double p1 = spec.p1[g / spec.p2.size()];
    const double p2 = spec.p2[g % spec.p2.size()];
    double ll = 0.0;
    if (method == GridMethod::EloDavidson) {
      ll = run_elo_filter(stream, index, EloParams{p1, p2, 1.0}).log_likelihood;
    } else {
      const GaussianParams p{p1, p2, spec.epsilon, spec.sigmoid, p1};
      ll = run_filter(stream, index, p, GaussianMethod::Glicko).log_likelihood;
    }
    result.surface[g] = {p1, p2, -ll / K};
  });
  result.best = result.surface.front();
  for (const auto& pt : result.surface)
    if (pt.avg_nll < result.best.avg_nll) result.best = pt;
  return result;
}

}  // namespace skillrate
