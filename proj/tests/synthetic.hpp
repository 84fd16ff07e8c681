// Match streams sampled from the random-walk skill model.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "skillrate/core.hpp"

namespace synth {

struct Config {
  std::size_t players = 10;
  std::size_t matches = 200;
  double days = 100.0;   ///< matches spread evenly over [0, days), whole days
  double sigma0 = 1.0;
  double tau = 0.1;      ///< per sqrt(day)
  double epsilon = 0.3;
  double scale = 1.0;
  bool probit = true;
  std::uint64_t seed = 7;
};

struct Sample {
  skillrate::MatchStream stream;
  std::vector<std::vector<double>> skills;  ///< per match: (home, away)
};

inline Sample generate(const Config& c) {
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, c.players - 1);

  Sample s;
  for (std::size_t i = 0; i < c.players; ++i) s.stream.players.intern("p" + std::to_string(i));
  std::vector<double> x(c.players), last(c.players);
  std::vector<bool> seen(c.players, false);
  for (std::size_t k = 0; k < c.matches; ++k) {
    const double t = std::floor(c.days * static_cast<double>(k) / static_cast<double>(c.matches));
    std::size_t h = pick(rng), a = pick(rng);
    while (a == h) a = pick(rng);
    for (std::size_t i : {h, a}) {
      if (!seen[i]) {
        x[i] = c.sigma0 * normal(rng);
        seen[i] = true;
      } else {
        x[i] += c.tau * std::sqrt(t - last[i]) * normal(rng);
      }
      last[i] = t;
    }
    const double d = x[h] - x[a];
    const double ph = oracle::outcome_prob(0, d, c.epsilon, c.scale, c.probit);
    const double pa = oracle::outcome_prob(1, d, c.epsilon, c.scale, c.probit);
    const double u = uniform(rng);
    const auto y = u < ph ? skillrate::Outcome::HomeWin
                          : (u < ph + pa ? skillrate::Outcome::AwayWin : skillrate::Outcome::Draw);
    s.stream.records.push_back({t, static_cast<skillrate::PlayerId>(h), static_cast<skillrate::PlayerId>(a), y});
    s.skills.push_back({x[h], x[a]});
  }
  return s;
}

}  // namespace synth
