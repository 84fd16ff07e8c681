#include "skillrate/discrete.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <numbers>

namespace skillrate {
namespace {

constexpr double kSpectrumTolerance = 1e-10;
constexpr double kClampTolerance = 1e-9;

Categorical clamp_normalise(Eigen::VectorXd v) {
  const double worst = v.minCoeff();
  if (worst < -kClampTolerance)
    throw_numerical("spectral propagation produced a negative mass of " + std::to_string(worst));
  v = v.cwiseMax(0.0);
  const double total = v.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw_numerical("categorical belief lost all mass");
  return v / total;
}

Eigen::VectorXd kernel_diagonal(const Spectrum& spec, double t) {
  return (spec.lambda * t).array().exp().matrix();
}

}  // namespace

void DiscreteParams::validate() const {
  if (states < 2) throw_input("the discrete model needs at least two states");
  if (!(sigma_d >= 0.0) || !std::isfinite(sigma_d)) throw_input("sigma_d must be nonnegative");
  if (!(tau_d >= 0.0) || !std::isfinite(tau_d)) throw_input("tau_d must be nonnegative");
  if (!(epsilon_d >= 0.0) || !std::isfinite(epsilon_d)) throw_input("epsilon_d must be nonnegative");
  if (scale < 0.0 || !std::isfinite(scale)) throw_input("likelihood scale must be positive");
}

Eigen::MatrixXd build_generator(std::size_t S) {
  if (S < 2) throw_input("the discrete model needs at least two states");
  const auto n = static_cast<Eigen::Index>(S);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) q(i, i + 1) = q(i + 1, i) = 0.5;
  q(0, 0) = 0.5;
  q(n - 1, n - 1) = 0.5;
  q.diagonal().array() -= 1.0;
  return q;
}

const char* to_string(SpectrumSource s) {
  switch (s) {
    case SpectrumSource::ClosedForm: return "closed_form";
    case SpectrumSource::Cosine: return "cosine";
    case SpectrumSource::Numerical: return "numerical";
  }
  return "?";
}

Spectrum closed_form_spectrum(std::size_t S) {
  const auto n = static_cast<Eigen::Index>(S);
  const double s = static_cast<double>(S);
  Spectrum spec;
  spec.source = SpectrumSource::ClosedForm;
  spec.psi.resize(n, n);
  spec.lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    spec.lambda(i) = std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / s) - 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      spec.psi(i, j) = i == 0 ? 1.0 / std::sqrt(s)
                              : std::sqrt(2.0 / s) *
                                    std::cos(std::numbers::pi * static_cast<double>(i) *
                                             static_cast<double>(2 * j + 1) / s);
    }
  }
  return spec;
}

Spectrum cosine_spectrum(std::size_t S) {
  const auto n = static_cast<Eigen::Index>(S);
  const double s = static_cast<double>(S);
  Spectrum spec;
  spec.source = SpectrumSource::Cosine;
  spec.psi.resize(n, n);
  spec.lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    spec.lambda(i) = std::cos(std::numbers::pi * static_cast<double>(i) / s) - 1.0;
    const double c = i == 0 ? 1.0 / std::sqrt(s) : std::sqrt(2.0 / s);
    for (Eigen::Index j = 0; j < n; ++j)
      spec.psi(i, j) = c * std::cos(std::numbers::pi * static_cast<double>(i) *
                                    static_cast<double>(2 * j + 1) / (2.0 * s));
  }
  return spec;
}

Spectrum numerical_spectrum(std::size_t S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(build_generator(S));
  if (solver.info() != Eigen::Success) throw_numerical("symmetric eigensolver failed");
  Spectrum spec;
  spec.source = SpectrumSource::Numerical;
  // Eigen returns ascending eigenvalues with eigenvectors in columns; store
  // the stationary mode first and eigenvectors as rows.
  spec.lambda = solver.eigenvalues().reverse();
  spec.psi = solver.eigenvectors().rowwise().reverse().transpose();
  return spec;
}

double spectrum_error(const Spectrum& spec, const Eigen::MatrixXd& generator) {
  const auto n = spec.psi.rows();
  const double orth = (spec.psi * spec.psi.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  const double recon =
      (spec.psi.transpose() * spec.lambda.asDiagonal() * spec.psi - generator).cwiseAbs().maxCoeff();
  const double err = std::max(orth, recon);
  return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

Spectrum build_spectrum(std::size_t S) {
  const Eigen::MatrixXd q = build_generator(S);
  for (auto make : {closed_form_spectrum, cosine_spectrum, numerical_spectrum}) {
    Spectrum spec = make(S);
    if (spectrum_error(spec, q) < kSpectrumTolerance) return spec;
  }
  throw_numerical("no spectral decomposition of the generator passed the reconstruction check");
}

Eigen::VectorXd apply_kernel(const Eigen::VectorXd& v, double t, const Spectrum& spec) {
  if (t == 0.0) return v;
  const Eigen::VectorXd coeffs = spec.psi * v;
  return spec.psi.transpose() * coeffs.cwiseProduct(kernel_diagonal(spec, t));
}

Categorical discrete_propagate(const Categorical& pi, double dt, double rate, const Spectrum& spec) {
  if (dt < 0.0) throw_usage("discrete_propagate: negative elapsed time");
  if (dt == 0.0 || rate == 0.0) return pi;
  return clamp_normalise(apply_kernel(pi, rate * dt, spec));
}

Categorical median_states(std::size_t S) {
  Categorical nu = Categorical::Zero(static_cast<Eigen::Index>(S));
  if (S % 2 == 1) {
    nu((S - 1) / 2) = 1.0;
  } else {
    nu(S / 2 - 1) = 0.5;
    nu(S / 2) = 0.5;
  }
  return nu;
}

Categorical build_initial(const DiscreteParams& p, const Spectrum& spec) {
  if (spec.size() != p.states) throw_usage("spectrum size differs from the state count");
  return discrete_propagate(median_states(p.states), p.sigma_d * p.sigma_d, 1.0, spec);
}

Eigen::MatrixXd discrete_likelihood_table(Outcome y, const DiscreteParams& p) {
  p.validate();
  if (y == Outcome::Draw && !(p.epsilon_d > 0.0))
    throw_input("draw likelihood requested with epsilon_d = 0");
  const auto n = static_cast<Eigen::Index>(p.states);
  const ObservationModel obs = p.observation();
  // Entries depend on a - b only.
  std::vector<double> by_diff(static_cast<std::size_t>(2 * n - 1));
  for (Eigen::Index d = -(n - 1); d < n; ++d)
    by_diff[static_cast<std::size_t>(d + n - 1)] = outcome_likelihood(static_cast<double>(d), y, obs);
  Eigen::MatrixXd t(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) t(a, b) = by_diff[static_cast<std::size_t>(a - b + n - 1)];
  return t;
}

DiscreteAssimilation discrete_assimilate(const Categorical& ph, const Categorical& pa,
                                         const Eigen::MatrixXd& table) {
  const Eigen::VectorXd toward_home = table * pa;
  const double z = ph.dot(toward_home);
  if (!(z > 0.0)) throw_numerical("observed outcome has zero probability under current beliefs");
  DiscreteAssimilation out;
  out.home = ph.cwiseProduct(toward_home) / z;
  out.away = pa.cwiseProduct(table.transpose() * ph) / z;
  out.logpred = std::log(z);
  return out;
}

Categorical discrete_smooth_step(const Categorical& filt, const Categorical& smooth_next,
                                 const Categorical& predict_next, double dt, double rate,
                                 const Spectrum& spec) {
  if (dt == 0.0 || rate == 0.0) return smooth_next;
  Eigen::VectorXd ratio(smooth_next.size());
  for (Eigen::Index s = 0; s < ratio.size(); ++s)
    ratio(s) = predict_next(s) > 0.0 ? smooth_next(s) / predict_next(s) : 0.0;
  // The kernel is symmetric, so M^T acts like M.
  Eigen::VectorXd out = filt.cwiseProduct(apply_kernel(ratio, rate * dt, spec));
  return clamp_normalise(std::move(out));
}

DiscreteModel DiscreteModel::build(const DiscreteParams& params) {
  params.validate();
  DiscreteModel m;
  m.spectrum = build_spectrum(params.states);
  return m.with(params);
}

DiscreteModel DiscreteModel::with(const DiscreteParams& params) const {
  params.validate();
  DiscreteModel m;
  m.params = params;
  m.spectrum = spectrum.size() == params.states ? spectrum : build_spectrum(params.states);
  m.initial = build_initial(params, m.spectrum);
  for (Outcome y : kAllOutcomes) {
    const auto n = static_cast<Eigen::Index>(params.states);
    m.tables[static_cast<int>(y)] = y == Outcome::Draw && !(params.epsilon_d > 0.0)
                                        ? Eigen::MatrixXd::Zero(n, n)
                                        : discrete_likelihood_table(y, params);
  }
  return m;
}

PredictiveProbs DiscreteModel::predictive(const Categorical& ph, const Categorical& pa) const {
  PredictiveProbs p;
  p.home = ph.dot(tables[0] * pa);
  p.away = ph.dot(tables[1] * pa);
  p.draw = ph.dot(tables[2] * pa);
  const double total = p.sum();
  return {p.home / total, p.away / total, p.draw / total};
}

DiscreteFilterTrace run_discrete_filter(const MatchStream& stream, const SparseIndex& index,
                                        const DiscreteModel& model, unsigned threads) {
  if (index.num_matches() != stream.size() || index.num_players() != stream.players.size())
    throw_usage("sparse index does not match the stream");
  require_draw_support(stream, model.params.epsilon_d, "discrete model");
  DiscreteFilterTrace trace;
  trace.players.resize(stream.players.size());
  for (PlayerId i = 0; i < trace.players.size(); ++i)
    trace.players[i].reserve(index.matches(i).size());
  trace.probs.resize(stream.size());
  trace.logpred.resize(stream.size());
  const double rate = model.params.tau_d;

  auto predict = [&](PlayerId i, double t) {
    const auto& hist = trace.players[i];
    if (hist.empty()) return std::pair{model.initial, 0.0};
    const double dt = t - hist.back().time;
    return std::pair{discrete_propagate(hist.back().filter, dt, rate, model.spectrum), dt};
  };

  for (const auto& block : simultaneous_blocks(stream)) {
    parallel_for(block.size(), threads, [&](std::size_t b) {
      const std::size_t k = block[b];
      const auto& r = stream.records[k];
      auto [ph, dth] = predict(r.home, r.time);
      auto [pa, dta] = predict(r.away, r.time);
      trace.probs[k] = model.predictive(ph, pa);
      auto post = discrete_assimilate(ph, pa, model.tables[static_cast<int>(r.outcome)]);
      trace.logpred[k] = post.logpred;
      trace.players[r.home].push_back({k, r.time, dth, std::move(ph), std::move(post.home)});
      trace.players[r.away].push_back({k, r.time, dta, std::move(pa), std::move(post.away)});
    });
  }
  for (double l : trace.logpred) trace.log_likelihood += l;
  return trace;
}

DiscreteSmoothResult run_discrete_smoother(const DiscreteFilterTrace& trace,
                                           const DiscreteModel& model, unsigned threads) {
  DiscreteSmoothResult out(trace.players.size());
  parallel_for(trace.players.size(), threads, [&](std::size_t i) {
    const auto& entries = trace.players[i];
    auto& smooth = out[i];
    smooth.resize(entries.size());
    if (entries.empty()) return;
    smooth.back() = entries.back().filter;
    for (std::size_t j = entries.size() - 1; j-- > 0;)
      smooth[j] = discrete_smooth_step(entries[j].filter, smooth[j + 1], entries[j + 1].predict,
                                       entries[j + 1].dt, model.params.tau_d, model.spectrum);
  });
  return out;
}

namespace {

Eigen::VectorXd smooth_ratio(const Categorical& smooth, const Categorical& predict) {
  Eigen::VectorXd r(smooth.size());
  for (Eigen::Index s = 0; s < r.size(); ++s) r(s) = predict(s) > 0.0 ? smooth(s) / predict(s) : 0.0;
  return r;
}

}  // namespace

double q2_gradient(const DiscreteFilterTrace& trace, const DiscreteSmoothResult& smooth,
                   double rate, const Spectrum& spec, unsigned threads) {
  std::vector<double> per_player(trace.players.size(), 0.0);
  parallel_for(trace.players.size(), threads, [&](std::size_t i) {
    const auto& entries = trace.players[i];
    std::vector<std::size_t> steps;
    for (std::size_t j = 1; j < entries.size(); ++j)
      if (entries[j].dt > 0.0) steps.push_back(j);
    if (steps.empty()) return;
    const auto n = static_cast<Eigen::Index>(spec.size());
    const auto m = static_cast<Eigen::Index>(steps.size());
    Eigen::MatrixXd F(n, m), R(n, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      const std::size_t j = steps[static_cast<std::size_t>(c)];
      F.col(c) = entries[j - 1].filter;
      R.col(c) = smooth_ratio(smooth[i][j], entries[j].predict);
    }
    const Eigen::MatrixXd f = spec.psi * F;
    const Eigen::MatrixXd r = spec.psi * R;
    double total = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      const double dt = entries[steps[static_cast<std::size_t>(c)]].dt;
      const Eigen::ArrayXd fer = f.col(c).array() * (spec.lambda.array() * (rate * dt)).exp() * r.col(c).array();
      const double num = (fer * (dt * spec.lambda.array())).sum();
      const double den = fer.sum();
      if (!(den > 0.0)) throw_numerical("q2_gradient: nonpositive bridging normaliser");
      total += num / den;
    }
    per_player[i] = total;
  });
  double g = 0.0;
  for (double v : per_player) g += v;
  return g;
}

TransitionStatistics transition_statistics(const DiscreteFilterTrace& trace,
                                           const DiscreteSmoothResult& smooth, double rate,
                                           const Spectrum& spec) {
  const auto n = static_cast<Eigen::Index>(spec.size());
  std::map<double, Eigen::MatrixXd> by_dt;
  for (std::size_t i = 0; i < trace.players.size(); ++i) {
    const auto& entries = trace.players[i];
    for (std::size_t j = 1; j < entries.size(); ++j) {
      const double dt = entries[j].dt;
      if (!(dt > 0.0)) continue;
      auto [it, fresh] = by_dt.try_emplace(dt);
      if (fresh) it->second = Eigen::MatrixXd::Zero(n, n);
      it->second.noalias() +=
          entries[j - 1].filter * smooth_ratio(smooth[i][j], entries[j].predict).transpose();
    }
  }
  TransitionStatistics stats;
  for (auto& [dt, acc] : by_dt) {
    const Eigen::MatrixXd kernel =
        spec.psi.transpose() * kernel_diagonal(spec, rate * dt).asDiagonal() * spec.psi;
    stats.dts.push_back(dt);
    stats.joints.push_back(acc.cwiseProduct(kernel));
  }
  return stats;
}

double q2_value(const TransitionStatistics& stats, double rate, const Spectrum& spec) {
  double total = 0.0;
  for (std::size_t g = 0; g < stats.dts.size(); ++g) {
    const Eigen::MatrixXd kernel =
        spec.psi.transpose() * kernel_diagonal(spec, rate * stats.dts[g]).asDiagonal() * spec.psi;
    total += (stats.joints[g].array() * kernel.array().max(1e-300).log()).sum();
  }
  return total;
}

}  // namespace skillrate
