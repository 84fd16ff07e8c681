#include <cmath>

#include "../oracles.hpp"
#include "doctest.h"
#include "skillrate/discrete.hpp"

using namespace skillrate;

namespace {

MatchStream stream_of(std::size_t players, std::vector<MatchRecord> recs) {
  MatchStream s;
  for (std::size_t i = 0; i < players; ++i) s.players.intern("p" + std::to_string(i));
  s.records = std::move(recs);
  return s;
}

DiscreteParams params(std::size_t S, double sigma_d, double tau_d, double eps) {
  DiscreteParams p;
  p.states = S;
  p.sigma_d = sigma_d;
  p.tau_d = tau_d;
  p.epsilon_d = eps;
  return p;
}

}  // namespace

TEST_CASE("generator") {
  Eigen::MatrixXd want(2, 2);
  want << -0.5, 0.5, 0.5, -0.5;
  CHECK((build_generator(2) - want).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t S : {3u, 7u, 40u}) {
    const Eigen::MatrixXd Q = build_generator(S);
    CHECK(Q.rowwise().sum().cwiseAbs().maxCoeff() < 1e-15);
    CHECK((Eigen::RowVectorXd::Ones(S) * Q).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((Q - oracle::reflected_generator(static_cast<int>(S))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("spectrum for S = 2") {
  const Spectrum s = build_spectrum(2);
  std::vector<double> l(s.lambda.data(), s.lambda.data() + 2);
  std::sort(l.begin(), l.end());
  CHECK(l[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::abs(l[1]) < 1e-14);
  for (int r = 0; r < 2; ++r) {
    const double a = s.psi(r, 0), b = s.psi(r, 1);
    CHECK(std::abs(std::abs(a) - 1 / std::sqrt(2.0)) < 1e-14);
    CHECK(std::abs(std::abs(b) - 1 / std::sqrt(2.0)) < 1e-14);
  }
}

TEST_CASE("every spectrum candidate is checked") {
  const Eigen::MatrixXd Q = build_generator(9);
  CHECK(spectrum_error(cosine_spectrum(9), Q) < 1e-12);
  CHECK(spectrum_error(numerical_spectrum(9), Q) < 1e-12);
  CHECK(build_spectrum(9).source != SpectrumSource::ClosedForm);
}

TEST_CASE("propagation") {
  const Spectrum spec = build_spectrum(10);
  Categorical pi = Categorical::Zero(10);
  pi(2) = 0.3;
  pi(7) = 0.7;
  CHECK((discrete_propagate(pi, 0.0, 0.7, spec) - pi).cwiseAbs().maxCoeff() < 1e-15);
  const Categorical u = Categorical::Constant(10, 0.1);
  CHECK((discrete_propagate(u, 5.0, 0.7, spec) - u).cwiseAbs().maxCoeff() < 1e-14);
  const Categorical e = Categorical::Unit(10, 4);
  const Eigen::MatrixXd E = oracle::expm(3.0 * 0.7 * oracle::reflected_generator(10));
  CHECK((discrete_propagate(e, 3.0, 0.7, spec) - E.row(4).transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("initial vector") {
  const auto p0 = params(10, 0.0, 1.0, 0.0);
  const DiscreteModel m0 = DiscreteModel::build(p0);
  CHECK((m0.initial - median_states(10)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(median_states(5)(2) == 1.0);

  const std::size_t S = 12;
  const auto wide = params(S, std::sqrt(50.0) * S, 1.0, 0.0);
  const Categorical m = DiscreteModel::build(wide).initial;
  CHECK(oracle::total_variation(m, Categorical::Constant(S, 1.0 / S)) < 1e-6);

  const Categorical n = DiscreteModel::build(params(11, 2.0, 1.0, 0.0)).initial;
  double mean = 0, sq = 0;
  for (int s = 0; s < 11; ++s) {
    mean += s * n(s);
    sq += s * s * n(s);
  }
  CHECK(std::abs(std::sqrt(sq - mean * mean) - 2.0) < 0.15 * 2.0);
}

TEST_CASE("likelihood tables") {
  const auto p = params(7, 2.0, 1.0, 0.0);
  const Eigen::MatrixXd H = discrete_likelihood_table(Outcome::HomeWin, p);
  for (int i = 0; i < 7; ++i) CHECK(H(i, i) == doctest::Approx(0.5).epsilon(1e-15));
  const auto q = params(7, 2.0, 1.0, 0.8);
  const Eigen::MatrixXd T = discrete_likelihood_table(Outcome::HomeWin, q) + discrete_likelihood_table(Outcome::AwayWin, q) +
                            discrete_likelihood_table(Outcome::Draw, q);
  CHECK((T.array() - 1.0).abs().maxCoeff() < 1e-15);
  const double sd = q.likelihood_scale();
  CHECK(discrete_likelihood_table(Outcome::AwayWin, q)(1, 5) == doctest::Approx(oracle::outcome_prob(1, -4.0, 0.8, sd, true)).epsilon(1e-15));
}

TEST_CASE("assimilation") {
  Categorical ph(4), pa(4);
  ph << 0.1, 0.2, 0.3, 0.4;
  pa << 0.25, 0.25, 0.4, 0.1;
  const DiscreteAssimilation flat = discrete_assimilate(ph, pa, Eigen::MatrixXd::Constant(4, 4, 0.3));
  CHECK((flat.home - ph).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(flat.logpred == doctest::Approx(std::log(0.3)));

  const Categorical u = Categorical::Constant(4, 0.25);
  CHECK(discrete_assimilate(u, u, discrete_likelihood_table(Outcome::HomeWin, params(4, 1, 1, 0))).logpred ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));

  const Eigen::MatrixXd G = discrete_likelihood_table(Outcome::Draw, params(4, 1, 1, 0.7));
  const DiscreteAssimilation r = discrete_assimilate(ph, pa, G);
  Categorical h = Categorical::Zero(4), a = Categorical::Zero(4);
  double z = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double w = ph(i) * pa(j) * G(i, j);
      h(i) += w;
      a(j) += w;
      z += w;
    }
  CHECK((r.home - h / z).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((r.away - a / z).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(r.logpred - std::log(z)) < 1e-14);
}

TEST_CASE("smoothing step boundary cases") {
  const Spectrum spec = build_spectrum(6);
  Categorical f(6);
  f << 0.05, 0.1, 0.3, 0.3, 0.2, 0.05;
  const Categorical pred = discrete_propagate(f, 2.0, 0.5, spec);
  CHECK((discrete_smooth_step(f, pred, pred, 2.0, 0.5, spec) - f).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((discrete_smooth_step(f, pred, f, 0.0, 0.5, spec) - pred).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("q2 gradient") {
  SUBCASE("uniform filter and smooth give zero") {
    const auto p = params(5, 1.0, 0.6, 0.0);
    const DiscreteModel m = DiscreteModel::build(p);
    DiscreteFilterTrace t;
    const Categorical u = Categorical::Constant(5, 0.2);
    t.players = {{{0, 0.0, 0.0, u, u}, {1, 2.0, 2.0, u, u}}};
    const DiscreteSmoothResult sm = {{u, u}};
    CHECK(std::abs(q2_gradient(t, sm, 0.6, m.spectrum)) < 1e-14);
  }
  SUBCASE("dispersed smoothed transitions push the rate up") {
    const auto p = params(2, 1.0, 0.1, 0.0);
    const DiscreteModel m = DiscreteModel::build(p);
    Categorical f(2), s(2);
    f << 1.0, 0.0;
    s << 0.0, 1.0;
    DiscreteFilterTrace t;
    const Categorical pred = discrete_propagate(f, 1.0, 0.1, m.spectrum);
    t.players = {{{0, 0.0, 0.0, f, f}, {1, 1.0, 1.0, pred, s}}};
    CHECK(q2_gradient(t, {{f, s}}, 0.1, m.spectrum) > 0.0);
  }
}

TEST_CASE("filter sweeps") {
  const auto p = params(5, 1.0, 0.5, 0.0);
  const DiscreteModel m = DiscreteModel::build(p);
  SUBCASE("empty stream") {
    const MatchStream s = stream_of(2, {});
    CHECK(run_discrete_filter(s, SparseIndex::build(s), m).log_likelihood == 0.0);
  }
  SUBCASE("one symmetric match") {
    const MatchStream s = stream_of(2, {{0, 0, 1, Outcome::HomeWin}});
    CHECK(run_discrete_filter(s, SparseIndex::build(s), m).log_likelihood == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  }
  SUBCASE("thread count does not change results") {
    std::vector<MatchRecord> recs;
    for (int k = 0; k < 40; ++k)
      recs.push_back({static_cast<double>(k / 4), static_cast<PlayerId>(2 * (k % 4)), static_cast<PlayerId>(2 * (k % 4) + 1 - 0), Outcome::HomeWin});
    const MatchStream s = stream_of(8, recs);
    const auto a = run_discrete_filter(s, SparseIndex::build(s), m, 1);
    const auto b = run_discrete_filter(s, SparseIndex::build(s), m, 3);
    CHECK(a.log_likelihood == b.log_likelihood);
    CHECK(run_discrete_smoother(a, m, 1)[5].front() == run_discrete_smoother(b, m, 2)[5].front());
  }
}

TEST_CASE("30-match naive factorial recursion") {
  // The same per-player recursion written with dense kernels and explicit sums.
  const auto p = params(5, 1.3, 0.4, 0.6);
  const DiscreteModel m = DiscreteModel::build(p);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<MatchRecord> recs;
  double t = 0;
  for (int k = 0; k < 30; ++k) {
    t += std::floor(3 * u(rng));
    const bool flip = u(rng) < 0.5;
    recs.push_back({t, flip ? PlayerId{1} : PlayerId{0}, flip ? PlayerId{0} : PlayerId{1}, static_cast<Outcome>(static_cast<int>(3 * u(rng)))});
  }
  const MatchStream s = stream_of(2, recs);
  const auto trace = run_discrete_filter(s, SparseIndex::build(s), m);
  const Eigen::MatrixXd Q = oracle::reflected_generator(5);
  Categorical nu = Categorical::Zero(5);
  nu(2) = 1.0;
  Categorical b[2];
  b[0] = b[1] = (nu.transpose() * oracle::expm(1.3 * 1.3 * Q)).transpose();
  double last = recs.front().time, ll = 0;
  for (const auto& r : recs) {
    const Eigen::MatrixXd M = oracle::expm(0.4 * (r.time - last) * Q);
    last = r.time;
    b[0] = (b[0].transpose() * M).transpose();
    b[1] = (b[1].transpose() * M).transpose();
    const Categorical& bh = b[r.home];
    const Categorical& ba = b[r.away];
    Categorical nh = Categorical::Zero(5), na = Categorical::Zero(5);
    double z = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const double w = bh(i) * ba(j) * oracle::outcome_prob(static_cast<int>(r.outcome), i - j, 0.6, 1.0, true);
        nh(i) += w;
        na(j) += w;
        z += w;
      }
    ll += std::log(z);
    b[r.home] = nh / z;
    b[r.away] = na / z;
  }
  CHECK(std::abs(trace.log_likelihood - ll) < 1e-10);
}
