#include "skillrate/gaussian.hpp"

#include <cmath>
#include <limits>

namespace skillrate {
namespace {

constexpr double kMinOutcomeProb = 1e-300;

void require_finite(const GaussianSkill& b, std::size_t match) {
  if (!std::isfinite(b.mean) || !std::isfinite(b.var) || b.var < 0.0)
    throw_numerical("match " + std::to_string(match + 1) + ": non-finite skill belief");
}

double surrogate_log_integral(const Taylor2& e, double vd, bool* first_order) {
  double h = e.second;
  double denom = 1.0 - h * vd;
  if (!std::isfinite(h) || !(denom > 0.0)) {
    h = 0.0;
    denom = 1.0;
    if (first_order) *first_order = true;
  }
  return e.value - 0.5 * std::log(denom) + 0.5 * e.first * e.first * vd / denom;
}

ObservationModel ts2_observation(const ObservationModel& obs, double vd) {
  if (obs.sigmoid != Sigmoid::InverseProbit)
    throw_input("TrueSkill2 requires the probit sigmoid");
  return {obs.epsilon, std::sqrt(obs.scale * obs.scale + vd), Sigmoid::InverseProbit};
}

}  // namespace

void GaussianParams::validate() const {
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw_input("sigma0 must be positive");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw_input("tau must be nonnegative");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw_input("epsilon must be nonnegative");
  if (sigma_max && !(*sigma_max > 0.0)) throw_input("sigma_max must be positive");
}

PredictiveProbs elo_davidson_probs(double xh, double xa, const EloParams& p) {
  const double z = (xh - xa) / p.scale;
  // Divide through by 10^|z| so nothing overflows.
  const double big = 1.0;
  const double small = std::pow(10.0, -2.0 * std::abs(z));
  const double draw = p.kappa * std::pow(10.0, -std::abs(z));
  const double total = big + small + draw;
  PredictiveProbs probs;
  probs.home = (z >= 0.0 ? big : small) / total;
  probs.away = (z >= 0.0 ? small : big) / total;
  probs.draw = draw / total;
  return probs;
}

EloUpdate elo_davidson_update(double xh, double xa, Outcome y, const EloParams& p) {
  EloUpdate u;
  u.probs = elo_davidson_probs(xh, xa, p);
  const double expected_home = u.probs.home + 0.5 * u.probs.draw;
  const double expected_away = u.probs.away + 0.5 * u.probs.draw;
  const double score_home = y == Outcome::HomeWin ? 1.0 : (y == Outcome::Draw ? 0.5 : 0.0);
  u.home = xh + p.k * (score_home - expected_home);
  u.away = xa + p.k * ((1.0 - score_home) - expected_away);
  return u;
}

GaussianSkill gaussian_propagate(const GaussianSkill& b, double dt, double tau,
                                 std::optional<double> sigma_max) {
  if (dt < 0.0) throw_usage("gaussian_propagate: negative elapsed time");
  GaussianSkill out{b.mean, b.var + tau * tau * dt};
  if (sigma_max) out.var = std::min(out.var, *sigma_max * *sigma_max);
  return out;
}

GaussianSkill gaussian_propagate(const GaussianSkill& b, double dt, const GaussianParams& p) {
  return gaussian_propagate(b, dt, p.tau, p.sigma_max);
}

PairPosterior ek_assimilate(const GaussianSkill& bh, const GaussianSkill& ba,
                            const Taylor2& expansion) {
  const double vh = bh.var;
  const double va = ba.var;
  const double vd = vh + va;
  PairPosterior post;
  post.logpred = surrogate_log_integral(expansion, vd, &post.first_order);
  const double h = post.first_order ? 0.0 : expansion.second;
  const double denom = 1.0 - h * vd;
  const double gain = expansion.first / denom;
  const double c = h / denom;
  post.home = {bh.mean + gain * vh, std::max(vh + c * vh * vh, kVarFloor)};
  post.away = {ba.mean - gain * va, std::max(va + c * va * va, kVarFloor)};
  post.cross_cov = -c * vh * va;
  return post;
}

PairPosterior ek_assimilate(const GaussianSkill& bh, const GaussianSkill& ba, Outcome y,
                            const ObservationModel& obs) {
  return ek_assimilate(bh, ba, log_likelihood_taylor(bh.mean - ba.mean, y, obs));
}

PredictiveProbs ek_predictive(const GaussianSkill& bh, const GaussianSkill& ba,
                              const ObservationModel& obs) {
  const double d0 = bh.mean - ba.mean;
  const double vd = bh.var + ba.var;
  std::array<double, 3> logs{};
  double top = -std::numeric_limits<double>::infinity();
  for (Outcome y : kAllOutcomes) {
    auto& l = logs[static_cast<int>(y)];
    if (y == Outcome::Draw && !(obs.epsilon > 0.0)) {
      l = -std::numeric_limits<double>::infinity();
      continue;
    }
    l = surrogate_log_integral(log_likelihood_taylor(d0, y, obs), vd, nullptr);
    top = std::max(top, l);
  }
  PredictiveProbs p;
  p.home = std::exp(logs[0] - top);
  p.away = std::exp(logs[1] - top);
  p.draw = std::exp(logs[2] - top);
  const double total = p.sum();
  p.home /= total;
  p.away /= total;
  p.draw /= total;
  return p;
}

PairPosterior ts2_assimilate(const GaussianSkill& bh, const GaussianSkill& ba, Outcome y,
                             const ObservationModel& obs) {
  const double vh = bh.var;
  const double va = ba.var;
  const auto marginal = ts2_observation(obs, vh + va);
  // Derivatives of the log normaliser in the predictive mean difference give
  // the exact posterior moments.
  const Taylor2 l = log_likelihood_taylor(bh.mean - ba.mean, y, marginal);
  if (!(l.value > std::log(kMinOutcomeProb)))
    throw_numerical("observed outcome has probability below 1e-300 under current beliefs");
  PairPosterior post;
  post.logpred = l.value;
  post.home = {bh.mean + vh * l.first, std::max(vh + vh * vh * l.second, kVarFloor)};
  post.away = {ba.mean - va * l.first, std::max(va + va * va * l.second, kVarFloor)};
  post.cross_cov = -vh * va * l.second;
  return post;
}

PredictiveProbs ts2_predictive(const GaussianSkill& bh, const GaussianSkill& ba,
                               const ObservationModel& obs) {
  return outcome_probabilities(bh.mean - ba.mean, ts2_observation(obs, bh.var + ba.var));
}

SmoothStep kalman_smooth_step(const GaussianSkill& filt, const GaussianSkill& smooth_next,
                              double predicted_var_next) {
  const double gain = predicted_var_next > 0.0 ? filt.var / predicted_var_next : 0.0;
  SmoothStep s;
  s.smooth.mean = filt.mean + gain * (smooth_next.mean - filt.mean);
  s.smooth.var =
      std::max(filt.var + gain * gain * (smooth_next.var - predicted_var_next), 0.0);
  s.lag_one = s.smooth.mean * smooth_next.mean + gain * smooth_next.var;
  return s;
}

SmoothStep kalman_smooth_step(const GaussianSkill& filt, const GaussianSkill& smooth_next,
                              double dt, double tau) {
  if (dt < 0.0) throw_usage("kalman_smooth_step: negative elapsed time");
  return kalman_smooth_step(filt, smooth_next, filt.var + tau * tau * dt);
}

std::size_t GaussianFilterTrace::first_order_count() const {
  std::size_t n = 0;
  for (auto f : first_order) n += f;
  return n;
}

namespace {

GaussianFilterTrace empty_trace(const MatchStream& stream, const SparseIndex& index) {
  if (index.num_matches() != stream.size() || index.num_players() != stream.players.size())
    throw_usage("sparse index does not match the stream");
  GaussianFilterTrace trace;
  trace.players.resize(stream.players.size());
  for (PlayerId i = 0; i < trace.players.size(); ++i)
    trace.players[i].reserve(index.matches(i).size());
  trace.probs.resize(stream.size());
  trace.logpred.resize(stream.size());
  trace.first_order.resize(stream.size());
  return trace;
}

}  // namespace

GaussianFilterTrace run_filter(const MatchStream& stream, const SparseIndex& index,
                               const GaussianParams& params, const GaussianAssimilator& assimilate,
                               unsigned threads) {
  params.validate();
  auto trace = empty_trace(stream, index);
  const GaussianSkill prior{0.0, params.sigma0 * params.sigma0};

  auto predict = [&](PlayerId i, double t) {
    const auto& hist = trace.players[i];
    if (hist.empty()) return std::pair{prior, 0.0};
    const double dt = t - hist.back().time;
    return std::pair{gaussian_propagate(hist.back().filter, dt, params), dt};
  };

  for (const auto& block : simultaneous_blocks(stream)) {
    parallel_for(block.size(), threads, [&](std::size_t b) {
      const std::size_t k = block[b];
      const auto& r = stream.records[k];
      const auto [ph, dth] = predict(r.home, r.time);
      const auto [pa, dta] = predict(r.away, r.time);
      const MatchUpdate u = assimilate(k, ph, pa);
      require_finite(u.home, k);
      require_finite(u.away, k);
      if (!std::isfinite(u.logpred)) throw_numerical("match " + std::to_string(k + 1) + ": non-finite log-probability");
      trace.players[r.home].push_back({k, r.time, dth, ph, u.home});
      trace.players[r.away].push_back({k, r.time, dta, pa, u.away});
      trace.probs[k] = u.probs;
      trace.logpred[k] = u.logpred;
      trace.first_order[k] = u.first_order;
    });
  }
  for (double l : trace.logpred) trace.log_likelihood += l;
  return trace;
}

GaussianFilterTrace run_filter(const MatchStream& stream, const SparseIndex& index,
                               const GaussianParams& params, GaussianMethod method,
                               unsigned threads) {
  GaussianParams p = params;
  const ObservationModel obs = p.observation();
  switch (method) {
    case GaussianMethod::EloDavidson:
      throw_usage("Elo-Davidson has no Gaussian parameters; use run_elo_filter");
    case GaussianMethod::Glicko:
      if (!p.sigma_max) p.sigma_max = p.sigma0;
      [[fallthrough]];
    case GaussianMethod::ExtendedKalman:
      if (method == GaussianMethod::ExtendedKalman) p.sigma_max.reset();
      require_draw_support(stream, p.epsilon, method == GaussianMethod::Glicko ? "Glicko" : "Extended Kalman");
      return run_filter(stream, index, p, [&](std::size_t k, const GaussianSkill& h, const GaussianSkill& a) {
        const Outcome y = stream.records[k].outcome;
        const PairPosterior post = ek_assimilate(h, a, y, obs);
        MatchUpdate u{post.home, post.away, ek_predictive(h, a, obs), 0.0, post.first_order};
        u.logpred = safe_log(u.probs[y]);
        return u;
      }, threads);
    case GaussianMethod::TrueSkill2:
      p.sigma_max.reset();
      require_draw_support(stream, p.epsilon, "TrueSkill2");
      if (p.sigmoid != Sigmoid::InverseProbit) throw_input("TrueSkill2 requires the probit sigmoid");
      return run_filter(stream, index, p, [&](std::size_t k, const GaussianSkill& h, const GaussianSkill& a) {
        const Outcome y = stream.records[k].outcome;
        const PairPosterior post = ts2_assimilate(h, a, y, obs);
        return MatchUpdate{post.home, post.away, ts2_predictive(h, a, obs), post.logpred, false};
      }, threads);
  }
  throw_usage("unknown Gaussian method");
}

GaussianFilterTrace run_elo_filter(const MatchStream& stream, const SparseIndex& index,
                                   const EloParams& params) {
  if (!(params.k > 0.0)) throw_input("Elo learning rate K must be positive");
  if (!(params.kappa >= 0.0)) throw_input("Elo draw propensity kappa must be nonnegative");
  if (!(params.scale > 0.0)) throw_input("Elo scale must be positive");
  if (params.kappa == 0.0 && stream.has_draws())
    throw_input("Elo-Davidson: data contain draws but kappa is zero");
  auto trace = empty_trace(stream, index);
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const auto& r = stream.records[k];
    auto rating = [&](PlayerId i) {
      const auto& hist = trace.players[i];
      return hist.empty() ? std::pair{0.0, 0.0} : std::pair{hist.back().filter.mean, r.time - hist.back().time};
    };
    const auto [xh, dth] = rating(r.home);
    const auto [xa, dta] = rating(r.away);
    const EloUpdate u = elo_davidson_update(xh, xa, r.outcome, params);
    trace.players[r.home].push_back({k, r.time, dth, {xh, 0.0}, {u.home, 0.0}});
    trace.players[r.away].push_back({k, r.time, dta, {xa, 0.0}, {u.away, 0.0}});
    trace.probs[k] = u.probs;
    trace.logpred[k] = safe_log(u.probs[r.outcome]);
    trace.log_likelihood += trace.logpred[k];
  }
  return trace;
}

GaussianSmoothResult run_smoother(const GaussianFilterTrace& trace, unsigned threads) {
  GaussianSmoothResult result;
  result.players.resize(trace.players.size());
  parallel_for(trace.players.size(), threads, [&](std::size_t i) {
    const auto& entries = trace.players[i];
    auto& out = result.players[i];
    out.resize(entries.size());
    if (entries.empty()) return;
    const std::size_t last = entries.size() - 1;
    out[last] = {entries[last].match, entries[last].time, entries[last].filter,
                 std::numeric_limits<double>::quiet_NaN()};
    for (std::size_t j = last; j-- > 0;) {
      const SmoothStep s =
          kalman_smooth_step(entries[j].filter, out[j + 1].smooth, entries[j + 1].predict.var);
      out[j] = {entries[j].match, entries[j].time, s.smooth, s.lag_one};
    }
  });
  return result;
}

PredictiveProbs gaussian_predictive(const GaussianSkill& bh, const GaussianSkill& ba,
                                    const GaussianParams& params, GaussianMethod method) {
  switch (method) {
    case GaussianMethod::Glicko:
    case GaussianMethod::ExtendedKalman: return ek_predictive(bh, ba, params.observation());
    case GaussianMethod::TrueSkill2: return ts2_predictive(bh, ba, params.observation());
    case GaussianMethod::EloDavidson: break;
  }
  throw_usage("Elo-Davidson predictions need Elo parameters");
}

}  // namespace skillrate
