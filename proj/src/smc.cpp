#include "skillrate/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace skillrate {
namespace {

enum StreamTag : std::uint64_t { kInitial = 1, kPropagate = 2, kResample = 3, kBackward = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Normalises log-weights in place into probabilities; returns log of the sum
// of exp(logw).
double normalise_log_weights(std::vector<double>& logw) {
  const double top = *std::max_element(logw.begin(), logw.end());
  if (!(top > kNegInf)) return kNegInf;
  double total = 0.0;
  for (double& l : logw) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logw) l /= total;
  return top + std::log(total);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b * 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ tag);
  return Rng(h);
}

ParticleBelief ParticleBelief::uniform(std::vector<double> positions) {
  ParticleBelief b;
  b.weights.assign(positions.size(), 1.0 / static_cast<double>(positions.size()));
  b.positions = std::move(positions);
  return b;
}

void ParticleBelief::validate() const {
  if (positions.size() < 2) throw_numerical("particle belief needs at least two particles");
  if (weights.size() != positions.size()) throw_numerical("particle weights and positions differ in size");
  double total = 0.0;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (!std::isfinite(positions[j])) throw_numerical("non-finite particle position");
    if (!(weights[j] >= 0.0)) throw_numerical("negative particle weight");
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw_numerical("particle weights do not sum to one");
}

GaussianWalk::GaussianWalk(double sigma0, double tau) : sigma0_(sigma0), tau_(tau) {
  if (!(sigma0 > 0.0)) throw_input("sigma0 must be positive");
  if (!(tau >= 0.0)) throw_input("tau must be nonnegative");
}

double GaussianWalk::sample_initial(Rng& rng) const {
  return std::normal_distribution<double>(0.0, sigma0_)(rng);
}

double GaussianWalk::sample(double x, double dt, Rng& rng) const {
  if (is_identity(dt)) return x;
  return x + std::normal_distribution<double>(0.0, tau_ * std::sqrt(dt))(rng);
}

double GaussianWalk::log_transition(double from, double to, double dt) const {
  const double diff = to - from;
  return -0.5 * diff * diff / (tau_ * tau_ * dt);
}

PairLogLikelihood outcome_pair_likelihood(const MatchStream& stream, const ObservationModel& obs) {
  const auto* records = &stream.records;
  return [records, obs](std::size_t k, double xh, double xa) {
    return log_outcome_likelihood(xh - xa, (*records)[k].outcome, obs);
  };
}

ParticleBelief smc_propagate(const ParticleBelief& b, double dt, const SkillDynamics& dyn, Rng& rng) {
  if (dt < 0.0) throw_usage("smc_propagate: negative elapsed time");
  ParticleBelief out = b;
  if (dyn.is_identity(dt)) return out;
  for (double& x : out.positions) x = dyn.sample(x, dt, rng);
  return out;
}

std::vector<std::size_t> multinomial_resample(const std::vector<double>& weights, std::size_t count,
                                              Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(count);
  for (double& v : u) v = unif(rng);
  std::sort(u.begin(), u.end());
  std::vector<std::size_t> out(count);
  double cumulative = weights.empty() ? 0.0 : weights[0];
  std::size_t j = 0;
  for (std::size_t m = 0; m < count; ++m) {
    while (u[m] >= cumulative && j + 1 < weights.size()) cumulative += weights[++j];
    // Skip zero-weight tail entries reached only through round-off.
    while (weights[j] == 0.0 && j > 0) --j;
    out[m] = j;
  }
  return out;
}

SmcAssimilation smc_assimilate(const ParticleBelief& bh, const ParticleBelief& ba,
                               const std::function<double(double, double)>& log_lik, Rng& rng) {
  const std::size_t n = bh.size();
  if (ba.size() != n) throw_usage("smc_assimilate: particle counts differ");
  std::vector<double> logw(n);
  double pair_total = 0.0;
  for (std::size_t j = 0; j < n; ++j) pair_total += bh.weights[j] * ba.weights[j];
  for (std::size_t j = 0; j < n; ++j)
    logw[j] = std::log(bh.weights[j] * ba.weights[j] / pair_total) +
              log_lik(bh.positions[j], ba.positions[j]);
  SmcAssimilation out;
  out.logpred = normalise_log_weights(logw);
  if (!(out.logpred > kNegInf)) throw_numerical("all particle weights vanished: impossible observation");
  const auto ancestors = multinomial_resample(logw, n, rng);
  std::vector<double> h(n), a(n);
  for (std::size_t j = 0; j < n; ++j) {
    h[j] = bh.positions[ancestors[j]];
    a[j] = ba.positions[ancestors[j]];
  }
  out.home = ParticleBelief::uniform(std::move(h));
  out.away = ParticleBelief::uniform(std::move(a));
  out.weights = std::move(logw);
  return out;
}

SmcTrace run_smc_filter(const MatchStream& stream, const SparseIndex& index,
                        const SkillDynamics& dyn, const PairLogLikelihood& log_lik,
                        const SmcConfig& config, const ObservationModel* obs) {
  if (config.particles < 2) throw_input("need at least two particles");
  if (index.num_matches() != stream.size() || index.num_players() != stream.players.size())
    throw_usage("sparse index does not match the stream");
  const std::size_t J = config.particles;
  SmcTrace trace;
  trace.players.resize(stream.players.size());
  for (PlayerId i = 0; i < trace.players.size(); ++i)
    trace.players[i].reserve(index.matches(i).size());
  trace.logpred.resize(stream.size());
  if (obs) trace.probs.resize(stream.size());

  struct State {
    ParticleBelief belief;
    double time = 0.0;
    bool started = false;
  };
  std::vector<State> state(stream.players.size());

  auto predict = [&](PlayerId i, std::size_t k, double t) {
    State& s = state[i];
    if (!s.started) {
      Rng rng = make_stream(config.seed, i, 0, kInitial);
      std::vector<double> x(J);
      for (double& v : x) v = dyn.sample_initial(rng);
      return std::pair{ParticleBelief::uniform(std::move(x)), 0.0};
    }
    const double dt = t - s.time;
    Rng rng = make_stream(config.seed, i, k, kPropagate);
    return std::pair{smc_propagate(s.belief, dt, dyn, rng), dt};
  };

  for (const auto& block : simultaneous_blocks(stream)) {
    parallel_for(block.size(), config.threads, [&](std::size_t b) {
      const std::size_t k = block[b];
      const auto& r = stream.records[k];
      auto [ph, dth] = predict(r.home, k, r.time);
      auto [pa, dta] = predict(r.away, k, r.time);
      if (obs) {
        PredictiveProbs p;
        for (std::size_t j = 0; j < J; ++j) {
          const auto q = outcome_probabilities(ph.positions[j] - pa.positions[j], *obs);
          p.home += q.home;
          p.away += q.away;
          p.draw += q.draw;
        }
        const double total = p.sum();
        trace.probs[k] = {p.home / total, p.away / total, p.draw / total};
      }
      Rng rng = make_stream(config.seed, k, 0, kResample);
      auto assimilated = smc_assimilate(
          ph, pa, [&](double xh, double xa) { return log_lik(k, xh, xa); }, rng);
      trace.logpred[k] = assimilated.logpred;
      trace.players[r.home].push_back({k, r.time, dth, std::move(ph.positions), assimilated.weights});
      trace.players[r.away].push_back({k, r.time, dta, std::move(pa.positions), std::move(assimilated.weights)});
      state[r.home] = {std::move(assimilated.home), r.time, true};
      state[r.away] = {std::move(assimilated.away), r.time, true};
    });
  }
  for (double l : trace.logpred) trace.log_likelihood += l;
  return trace;
}

std::vector<PlayerTrajectories> backward_simulate(const SmcTrace& trace, const SkillDynamics& dyn,
                                                  const SmcConfig& config) {
  std::vector<PlayerTrajectories> out(trace.players.size());
  parallel_for(trace.players.size(), config.threads, [&](std::size_t i) {
    const auto& entries = trace.players[i];
    auto& traj = out[i];
    const std::size_t n = entries.size();
    if (n == 0) return;
    const std::size_t J = entries.back().positions.size();
    traj.samples = J;
    traj.length = n;
    traj.values.assign(J * n, 0.0);
    Rng rng = make_stream(config.seed, i, 0, kBackward);

    const auto last = multinomial_resample(entries[n - 1].weights, J, rng);
    for (std::size_t m = 0; m < J; ++m) traj.values[m * n + n - 1] = entries[n - 1].positions[last[m]];

    std::vector<std::size_t> order(J);
    std::vector<double> w(J);
    for (std::size_t j = n - 1; j-- > 0;) {
      const auto& filt = entries[j];
      const double dt = entries[j + 1].dt;
      const bool identity = dyn.is_identity(dt);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return traj.values[a * n + j + 1] < traj.values[b * n + j + 1];
      });
      for (std::size_t g = 0; g < J;) {
        const double next = traj.values[order[g] * n + j + 1];
        std::size_t end = g;
        while (end < J && traj.values[order[end] * n + j + 1] == next) ++end;
        for (std::size_t l = 0; l < J; ++l) {
          if (identity)
            w[l] = filt.positions[l] == next ? std::log(filt.weights[l]) : kNegInf;
          else
            w[l] = std::log(filt.weights[l]) + dyn.log_transition(filt.positions[l], next, dt);
        }
        if (!(normalise_log_weights(w) > kNegInf))
          throw_numerical("backward simulation found no admissible ancestor");
        const auto anc = multinomial_resample(w, end - g, rng);
        for (std::size_t q = g; q < end; ++q) traj.values[order[q] * n + j] = filt.positions[anc[q - g]];
        g = end;
      }
    }
  });
  return out;
}

SmcEmStatistics smc_em_statistics(const std::vector<PlayerTrajectories>& trajectories,
                                  const SmcTrace& trace, const MatchStream& stream) {
  SmcEmStatistics st;
  st.diffs.resize(stream.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    const auto& entries = trace.players[i];
    const std::size_t n = traj.length;
    if (n == 0) continue;
    const std::size_t J = traj.samples;
    st.samples = J;
    for (std::size_t m = 0; m < J; ++m) st.initial_sq_sum += traj.at(m, 0) * traj.at(m, 0);
    st.initial_count += J;
    for (std::size_t j = 1; j < n; ++j) {
      const double dt = entries[j].dt;
      if (!(dt > 0.0)) continue;
      for (std::size_t m = 0; m < J; ++m) {
        const double step = traj.at(m, j) - traj.at(m, j - 1);
        st.transition_sum += step * step / dt;
      }
      st.transition_count += J;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = entries[j].match;
      auto& d = st.diffs[k];
      if (d.empty()) d.assign(J, 0.0);
      const double sign = stream.records[k].home == i ? 1.0 : -1.0;
      for (std::size_t m = 0; m < J; ++m) d[m] += sign * traj.at(m, j);
    }
  }
  return st;
}

}  // namespace skillrate
