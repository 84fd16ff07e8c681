#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "doctest.h"
#include "skillrate/gaussian.hpp"

using namespace skillrate;

namespace {

MatchStream pair_stream(std::size_t players, std::vector<MatchRecord> recs) {
  MatchStream s;
  for (std::size_t i = 0; i < players; ++i) s.players.intern("p" + std::to_string(i));
  s.records = std::move(recs);
  return s;
}

Taylor2 gaussian_obs(double y, double d0, double r) {
  const double e = y - d0;
  return {-0.5 * std::log(2.0 * std::numbers::pi * r) - 0.5 * e * e / r, e / r, -1.0 / r};
}

}  // namespace

TEST_CASE("elo-davidson updates") {
  const EloParams p{32.0, 0.0, 1.0};
  auto u = elo_davidson_update(0, 0, Outcome::HomeWin, p);
  CHECK(u.home == doctest::Approx(16.0));
  CHECK(u.away == doctest::Approx(-16.0));
  for (double kappa : {0.0, 0.5, 2.0}) {
    u = elo_davidson_update(0, 0, Outcome::Draw, {10.0, kappa, 1.0});
    CHECK(u.home == 0.0);
    CHECK(u.away == 0.0);
  }
  u = elo_davidson_update(1, 0, Outcome::HomeWin, {10.0, 1.0, 1.0});
  CHECK(u.home == doctest::Approx(1.0 + 10.0 * (1.0 - (10.0 + 0.5) / (0.1 + 10.0 + 1.0))).epsilon(1e-14));
  CHECK(u.probs.sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gaussian propagation") {
  CHECK(gaussian_propagate({0.3, 1.0}, 5.0, 0.0).var == 1.0);
  const auto b = gaussian_propagate({0.0, 1.0}, 4.0, 1.0);
  CHECK(b.mean == 0.0);
  CHECK(b.var == 5.0);
  CHECK(gaussian_propagate({0.2, 1.0}, 4.0, 1.0, std::sqrt(1.5)).var == doctest::Approx(1.5));
}

TEST_CASE("extended kalman update") {
  SUBCASE("a flat likelihood leaves the beliefs alone") {
    const PairPosterior p = ek_assimilate({0.2, 1.0}, {-0.1, 2.0}, Taylor2{-0.3, 0.0, 0.0});
    CHECK(p.home.mean == 0.2);
    CHECK(p.away.var == 2.0);
    CHECK(p.cross_cov == 0.0);
  }
  SUBCASE("a home win at parity is antisymmetric") {
    const PairPosterior p = ek_assimilate({0, 1}, {0, 1}, Outcome::HomeWin, {0.0, 1.0, Sigmoid::Logistic});
    CHECK(p.home.mean > 0);
    CHECK(p.away.mean == doctest::Approx(-p.home.mean).epsilon(1e-15));
    CHECK(p.home.var == doctest::Approx(p.away.var).epsilon(1e-15));
  }
  SUBCASE("moments are those of the quadratic surrogate") {
    const GaussianSkill bh{0.3, 0.8}, ba{-0.2, 1.3};
    const ObservationModel obs{0.0, 1.0, Sigmoid::Logistic};
    const Taylor2 t = log_likelihood_taylor(bh.mean - ba.mean, Outcome::HomeWin, obs);
    const PairPosterior p = ek_assimilate(bh, ba, Outcome::HomeWin, obs);
    const auto rh = oracle::gauss_legendre(300, bh.mean - 10, bh.mean + 10);
    const auto ra = oracle::gauss_legendre(300, ba.mean - 10, ba.mean + 10);
    const double d0 = bh.mean - ba.mean;
    double z = 0, m = 0, m2 = 0;
    for (std::size_t i = 0; i < rh.x.size(); ++i)
      for (std::size_t j = 0; j < ra.x.size(); ++j) {
        const double e = rh.x[i] - ra.x[j] - d0;
        const double w = rh.w[i] * ra.w[j] * oracle::normal_pdf(rh.x[i], bh.mean, bh.var) *
                         oracle::normal_pdf(ra.x[j], ba.mean, ba.var) * std::exp(t.first * e + 0.5 * t.second * e * e);
        z += w;
        m += w * rh.x[i];
        m2 += w * rh.x[i] * rh.x[i];
      }
    CHECK(std::abs(p.home.mean - m / z) < 1e-8);
    CHECK(std::abs(p.home.var - (m2 / z - m * m / (z * z))) < 1e-8);
  }
  SUBCASE("positive curvature falls back to first order") {
    const PairPosterior p = ek_assimilate({0, 1}, {0, 1}, Taylor2{0.0, 0.5, 10.0});
    CHECK(p.first_order);
    CHECK(p.home.var == 1.0);
    CHECK(p.home.mean == doctest::Approx(0.5));
  }
}

TEST_CASE("trueskill2 update") {
  const ObservationModel obs{0.0, 1.0, Sigmoid::InverseProbit};
  const PairPosterior p = ts2_assimilate({0, 1}, {0, 1}, Outcome::HomeWin, obs);
  CHECK(p.logpred == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(p.home.mean == doctest::Approx(-p.away.mean).epsilon(1e-15));
  CHECK(p.home.var < 1.0);

  const GaussianSkill bh{0.3, 0.8}, ba{-0.1, 1.2};
  const ObservationModel obs2{0.25, 1.0, Sigmoid::InverseProbit};
  const auto rh = oracle::gauss_legendre(300, bh.mean - 10, bh.mean + 10);
  const auto ra = oracle::gauss_legendre(300, ba.mean - 10, ba.mean + 10);
  for (int y = 0; y < 3; ++y) {
    const PairPosterior q = ts2_assimilate(bh, ba, static_cast<Outcome>(y), obs2);
    double z = 0, mh = 0, vh = 0, ma = 0, va = 0;
    for (std::size_t i = 0; i < rh.x.size(); ++i)
      for (std::size_t j = 0; j < ra.x.size(); ++j) {
        const double w = rh.w[i] * ra.w[j] * oracle::normal_pdf(rh.x[i], bh.mean, bh.var) *
                         oracle::normal_pdf(ra.x[j], ba.mean, ba.var) *
                         oracle::outcome_prob(y, rh.x[i] - ra.x[j], 0.25, 1.0, true);
        z += w;
        mh += w * rh.x[i];
        vh += w * rh.x[i] * rh.x[i];
        ma += w * ra.x[j];
        va += w * ra.x[j] * ra.x[j];
      }
    mh /= z;
    ma /= z;
    CHECK(std::abs(q.home.mean - mh) < 1e-8);
    CHECK(std::abs(q.home.var - (vh / z - mh * mh)) < 1e-8);
    CHECK(std::abs(q.away.mean - ma) < 1e-8);
    CHECK(std::abs(q.away.var - (va / z - ma * ma)) < 1e-8);
    CHECK(std::abs(q.logpred - std::log(z)) < 1e-8);
  }
}

TEST_CASE("kalman smoothing step") {
  const GaussianSkill filt{0.4, 0.7};
  const double dt = 2.0, tau = 0.3;
  const GaussianSkill pred = gaussian_propagate(filt, dt, tau);
  SmoothStep s = kalman_smooth_step(filt, pred, dt, tau);
  CHECK(s.smooth.mean == doctest::Approx(filt.mean).epsilon(1e-15));
  CHECK(s.smooth.var == doctest::Approx(filt.var).epsilon(1e-15));

  s = kalman_smooth_step(filt, {1.5, 0.2}, 1.0, 1e9);
  CHECK(s.smooth.mean == doctest::Approx(filt.mean).epsilon(1e-8));
  CHECK(s.lag_one == doctest::Approx(filt.mean * 1.5).epsilon(1e-8));
}

TEST_CASE("5-step chain against joint conditioning") {
  // One player observed through Gaussian pseudo-observations of x - x_opp
  // where the opponents are fresh and tightly known.
  const double sigma0 = 1.1, tau = 0.4, r = 0.3;
  const std::vector<double> times = {0.0, 1.0, 2.5, 2.5, 6.0};
  const std::vector<double> y = {0.5, -0.2, 1.1, 0.4, 0.0};
  std::vector<MatchRecord> recs;
  for (std::size_t k = 0; k < 5; ++k) recs.push_back({times[k], 0, static_cast<PlayerId>(k + 1), Outcome::HomeWin});
  const MatchStream s = pair_stream(6, recs);
  const GaussianParams params{sigma0, tau, 0.0, Sigmoid::Logistic, std::nullopt};
  const auto trace = run_filter(s, SparseIndex::build(s), params, [&](std::size_t k, const GaussianSkill& h, const GaussianSkill& a) {
    const PairPosterior p = ek_assimilate(h, a, gaussian_obs(y[k], h.mean - a.mean, r));
    return MatchUpdate{p.home, p.away, {}, p.logpred, p.first_order};
  });
  const auto sm = run_smoother(trace);

  Eigen::VectorXd m = Eigen::VectorXd::Zero(10);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(10, 10);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(5, 10);
  Eigen::VectorXd yy(5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) P(i, j) = sigma0 * sigma0 + tau * tau * std::min(times[i], times[j]);
    P(5 + i, 5 + i) = sigma0 * sigma0;
    H(i, i) = 1;
    H(i, 5 + i) = -1;
    yy(i) = y[i];
  }
  const auto post = oracle::condition(m, P, H, r * Eigen::MatrixXd::Identity(5, 5), yy);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(sm.players[0][k].smooth.mean - post.mean(k)) < 1e-12);
    CHECK(std::abs(sm.players[0][k].smooth.var - post.cov(k, k)) < 1e-12);
  }
  CHECK(std::abs(trace.log_likelihood - post.log_marginal) < 1e-12);
  CHECK(std::isnan(sm.players[0][4].lag_one));
}

TEST_CASE("filter sweeps") {
  const GaussianParams params{1.0, 0.1, 0.0, Sigmoid::InverseProbit, std::nullopt};
  SUBCASE("empty stream") {
    const MatchStream s = pair_stream(3, {});
    const auto t = run_filter(s, SparseIndex::build(s), params, GaussianMethod::TrueSkill2);
    CHECK(t.log_likelihood == 0.0);
    CHECK(t.players.size() == 3);
  }
  SUBCASE("one symmetric match") {
    const MatchStream s = pair_stream(2, {{0, 0, 1, Outcome::AwayWin}});
    for (GaussianMethod m : {GaussianMethod::TrueSkill2, GaussianMethod::Glicko}) {
      const auto t = run_filter(s, SparseIndex::build(s), params, m);
      CHECK(t.log_likelihood == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    }
  }
  SUBCASE("trueskill2 over 10 matches against chained quadrature") {
    std::vector<MatchRecord> recs;
    const Outcome ys[10] = {Outcome::HomeWin, Outcome::AwayWin, Outcome::HomeWin, Outcome::HomeWin, Outcome::AwayWin,
                            Outcome::HomeWin, Outcome::HomeWin, Outcome::AwayWin, Outcome::AwayWin, Outcome::HomeWin};
    for (int k = 0; k < 10; ++k) recs.push_back({1.0 * k, static_cast<PlayerId>(k % 2), static_cast<PlayerId>(1 - k % 2), ys[k]});
    const MatchStream s = pair_stream(2, recs);
    const auto t = run_filter(s, SparseIndex::build(s), params, GaussianMethod::TrueSkill2);
    GaussianSkill b[2] = {{0, 1}, {0, 1}};
    double ll = 0.0;
    for (int k = 0; k < 10; ++k) {
      const int h = k % 2, a = 1 - h;
      if (k > 0) {
        b[0] = gaussian_propagate(b[0], 1.0, 0.1);
        b[1] = gaussian_propagate(b[1], 1.0, 0.1);
      }
      const auto rh = oracle::gauss_legendre(200, b[h].mean - 10 * std::sqrt(b[h].var), b[h].mean + 10 * std::sqrt(b[h].var));
      const auto ra = oracle::gauss_legendre(200, b[a].mean - 10 * std::sqrt(b[a].var), b[a].mean + 10 * std::sqrt(b[a].var));
      const int y = static_cast<int>(ys[k]);
      double z = 0, mh = 0, vh = 0, ma = 0, va = 0;
      for (std::size_t i = 0; i < rh.x.size(); ++i)
        for (std::size_t j = 0; j < ra.x.size(); ++j) {
          const double w = rh.w[i] * ra.w[j] * oracle::normal_pdf(rh.x[i], b[h].mean, b[h].var) *
                           oracle::normal_pdf(ra.x[j], b[a].mean, b[a].var) *
                           oracle::outcome_prob(y, rh.x[i] - ra.x[j], 0.0, 1.0, true);
          z += w;
          mh += w * rh.x[i];
          vh += w * rh.x[i] * rh.x[i];
          ma += w * ra.x[j];
          va += w * ra.x[j] * ra.x[j];
        }
      ll += std::log(z);
      mh /= z;
      ma /= z;
      b[h] = {mh, vh / z - mh * mh};
      b[a] = {ma, va / z - ma * ma};
    }
    CHECK(std::abs(t.log_likelihood - ll) < 1e-6);
  }
}

TEST_CASE("smoother boundary cases") {
  const GaussianParams params{1.0, 0.0, 0.0, Sigmoid::InverseProbit, std::nullopt};
  const MatchStream s = pair_stream(3, {{0, 0, 1, Outcome::HomeWin}, {3, 0, 2, Outcome::AwayWin}, {4, 0, 1, Outcome::HomeWin}});
  const auto t = run_filter(s, SparseIndex::build(s), params, GaussianMethod::TrueSkill2);
  const auto sm = run_smoother(t);
  CHECK(sm.players[2][0].smooth.mean == t.players[2][0].filter.mean);
  CHECK(sm.players[2][0].smooth.var == t.players[2][0].filter.var);
  for (const auto& e : sm.players[0]) CHECK(e.smooth.mean == doctest::Approx(sm.players[0][0].smooth.mean).epsilon(1e-12));
}

TEST_CASE("glicko refuses draws it cannot produce") {
  const GaussianParams params{1.0, 0.1, 0.0, Sigmoid::Logistic, 1.0};
  const MatchStream s = pair_stream(2, {{0, 0, 1, Outcome::Draw}});
  CHECK_THROWS_WITH_AS(run_filter(s, SparseIndex::build(s), params, GaussianMethod::Glicko), doctest::Contains("Glicko"), Error);
}
