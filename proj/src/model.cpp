#include "skillrate/model.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

#include "skillrate/ingest.hpp"

namespace skillrate {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kPredictTag = 5;

struct MethodName {
  Method method;
  const char* key;
  const char* display;
};

constexpr MethodName kMethodNames[] = {
    {Method::EloDavidson, "elo", "Elo-Davidson"},
    {Method::Glicko, "glicko", "Glicko"},
    {Method::ExtendedKalman, "ek", "Extended Kalman"},
    {Method::TrueSkill2, "ts2", "TrueSkill2"},
    {Method::Smc, "smc", "SMC"},
    {Method::Discrete, "discrete", "Discrete"},
};

std::size_t as_count(std::string_view key, double v, double min) {
  if (!(v >= min) || v != std::floor(v) || v > 1e15)
    throw_input(std::string(key) + " must be an integer >= " + std::to_string(static_cast<long>(min)));
  return static_cast<std::size_t>(v);
}

BeliefSummary summarise(const std::vector<double>& x, const std::vector<double>* w) {
  double m = 0.0, s = 0.0, total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double wj = w ? (*w)[j] : 1.0;
    total += wj;
    m += wj * x[j];
  }
  m /= total;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double wj = w ? (*w)[j] : 1.0;
    s += wj * (x[j] - m) * (x[j] - m);
  }
  return {m, s / total};
}

// Moments of the 1-based state index.
BeliefSummary summarise(const Categorical& p) {
  double m = 0.0, s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) m += p(i) * static_cast<double>(i + 1);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(i + 1) - m;
    s += p(i) * d * d;
  }
  return {m, s};
}

double quantile_state(const Categorical& p, double q) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    c += p(i);
    if (c >= q) return static_cast<double>(i + 1);
  }
  return static_cast<double>(p.size());
}

GaussianMethod gaussian_method(Method m) {
  switch (m) {
    case Method::EloDavidson: return GaussianMethod::EloDavidson;
    case Method::Glicko: return GaussianMethod::Glicko;
    case Method::TrueSkill2: return GaussianMethod::TrueSkill2;
    default: return GaussianMethod::ExtendedKalman;
  }
}

void write_number(std::ostream& out, double v) {
  if (std::isfinite(v)) out << v;
}

}  // namespace

const char* to_string(Method m) {
  for (const auto& n : kMethodNames)
    if (n.method == m) return n.key;
  return "?";
}

const char* display_name(Method m) {
  for (const auto& n : kMethodNames)
    if (n.method == m) return n.display;
  return "?";
}

Method parse_method(std::string_view name) {
  for (const auto& n : kMethodNames)
    if (name == n.key) return n.method;
  if (name == "elo-davidson" || name == "elo_davidson") return Method::EloDavidson;
  if (name == "extended-kalman" || name == "extended_kalman") return Method::ExtendedKalman;
  if (name == "trueskill2") return Method::TrueSkill2;
  if (name == "fhmm") return Method::Discrete;
  throw_input("unknown method '" + std::string(name) + "' (expected elo, glicko, ek, ts2, smc or discrete)");
}

bool fits_by_em(Method m) { return m != Method::EloDavidson && m != Method::Glicko; }

ModelConfig ModelConfig::defaults(Method m) {
  ModelConfig c;
  c.method = m;
  c.elo = {0.05, 0.0, 1.0};
  switch (m) {
    case Method::EloDavidson:
    case Method::Glicko:
    case Method::ExtendedKalman: c.sigmoid = Sigmoid::Logistic; break;
    default: c.sigmoid = Sigmoid::InverseProbit; break;
  }
  if (m == Method::Discrete) c.theta = {100.0, 25.0, 0.0};
  return c;
}

void ModelConfig::set(std::string_view key, double value) {
  if (!std::isfinite(value)) throw_input("parameter " + std::string(key) + " must be finite");
  if (key == "sigma0" || key == "sigma_d") theta.sigma0 = value;
  else if (key == "tau" || key == "tau_d") theta.tau = value;
  else if (key == "epsilon" || key == "epsilon_d") theta.epsilon = value;
  else if (key == "k") elo.k = value;
  else if (key == "kappa") elo.kappa = value;
  else if (key == "sigma_max") sigma_max = value;
  else if (key == "particles") particles = as_count(key, value, 2);
  else if (key == "seed") seed = as_count(key, value, 0);
  else if (key == "states") states = as_count(key, value, 2);
  else if (key == "scale") discrete_scale = value;
  else if (key == "threads") threads = static_cast<unsigned>(as_count(key, value, 1));
  else if (key == "gradient_step") gradient_step = as_count(key, value, 0) != 0;
  else throw_input("unknown parameter '" + std::string(key) + "'");
}

double ModelConfig::get(std::string_view key) const {
  if (key == "sigma0" || key == "sigma_d") return theta.sigma0;
  if (key == "tau" || key == "tau_d") return theta.tau;
  if (key == "epsilon" || key == "epsilon_d") return theta.epsilon;
  if (key == "k") return elo.k;
  if (key == "kappa") return elo.kappa;
  if (key == "sigma_max") return sigma_max ? *sigma_max : (method == Method::Glicko ? theta.sigma0 : kNaN);
  if (key == "particles") return static_cast<double>(particles);
  if (key == "seed") return static_cast<double>(seed);
  if (key == "states") return static_cast<double>(states);
  if (key == "scale") return discrete().likelihood_scale();
  if (key == "threads") return threads;
  if (key == "gradient_step") return gradient_step ? 1.0 : 0.0;
  throw_input("unknown parameter '" + std::string(key) + "'");
}

GaussianParams ModelConfig::gaussian() const {
  GaussianParams p{theta.sigma0, theta.tau, theta.epsilon, sigmoid, std::nullopt};
  if (method == Method::Glicko) p.sigma_max = sigma_max ? *sigma_max : theta.sigma0;
  return p;
}

DiscreteParams ModelConfig::discrete() const {
  DiscreteParams p;
  p.states = states;
  p.sigma_d = theta.sigma0;
  p.tau_d = theta.tau;
  p.epsilon_d = theta.epsilon;
  p.scale = discrete_scale;
  p.sigmoid = sigmoid;
  return p;
}

EmConfig ModelConfig::em(std::size_t max_iters, double tol) const {
  EmConfig c;
  switch (method) {
    case Method::ExtendedKalman: c.method = EmMethod::ExtendedKalman; break;
    case Method::TrueSkill2: c.method = EmMethod::TrueSkill2; break;
    case Method::Smc: c.method = EmMethod::Smc; break;
    case Method::Discrete: c.method = EmMethod::Discrete; break;
    default: throw_usage(std::string(display_name(method)) + " is fitted by grid search, not EM");
  }
  c.sigmoid = sigmoid;
  c.states = states;
  c.discrete_scale = discrete_scale;
  c.particles = particles;
  c.seed = seed;
  c.max_iters = max_iters;
  c.tol = tol;
  c.threads = threads;
  c.gradient_step = gradient_step;
  return c;
}

void ModelConfig::validate() const {
  if (method == Method::TrueSkill2 && sigmoid != Sigmoid::InverseProbit)
    throw_input("TrueSkill2 requires the probit sigmoid");
  if (particles < 2) throw_input("particles must be at least 2");
  if (threads < 1) throw_input("threads must be at least 1");
  switch (method) {
    case Method::EloDavidson:
      if (!(elo.k > 0.0)) throw_input("Elo learning rate K must be positive");
      if (!(elo.kappa >= 0.0)) throw_input("Elo draw propensity kappa must be nonnegative");
      break;
    case Method::Discrete: discrete().validate(); break;
    default: gaussian().validate(); break;
  }
}

void write_params(std::ostream& out, const ModelConfig& c) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "method=" << to_string(c.method) << '\n';
  if (c.method != Method::EloDavidson) out << "sigmoid=" << to_string(c.sigmoid) << '\n';
  switch (c.method) {
    case Method::EloDavidson:
      out << "k=" << c.elo.k << "\nkappa=" << c.elo.kappa << '\n';
      break;
    case Method::Discrete:
      out << "sigma_d=" << c.theta.sigma0 << "\ntau_d=" << c.theta.tau << "\nepsilon_d=" << c.theta.epsilon
          << "\nstates=" << c.states << "\nscale=" << c.discrete().likelihood_scale() << '\n';
      break;
    default:
      out << "sigma0=" << c.theta.sigma0 << "\ntau=" << c.theta.tau << "\nepsilon=" << c.theta.epsilon << '\n';
      if (c.method == Method::Glicko) out << "sigma_max=" << c.get("sigma_max") << '\n';
      if (c.method == Method::Smc) out << "particles=" << c.particles << "\nseed=" << c.seed << '\n';
      if (c.gradient_step) out << "gradient_step=1\n";
      break;
  }
}

ModelConfig read_params(std::istream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw_input("params line " + std::to_string(lineno) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  const auto m = kv.find("method");
  if (m == kv.end()) throw_input("params file has no method");
  ModelConfig c = ModelConfig::defaults(parse_method(m->second));
  for (const auto& [key, value] : kv) {
    if (key == "method") continue;
    if (key == "sigmoid") {
      c.sigmoid = parse_sigmoid(value);
      continue;
    }
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw_input("params: value of '" + key + "' is not a number");
    }
    c.set(key, v);
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

Run Run::filter(std::shared_ptr<const MatchStream> stream, const ModelConfig& config) {
  if (!stream) throw_usage("Run::filter: no stream");
  config.validate();
  Run run;
  run.stream_ = std::move(stream);
  run.config_ = config;
  const MatchStream& s = *run.stream_;
  const SparseIndex index = SparseIndex::build(s);
  switch (config.method) {
    case Method::EloDavidson: {
      auto t = run_elo_filter(s, index, config.elo);
      run.probs_ = t.probs;
      run.logpred_ = t.logpred;
      run.log_likelihood_ = t.log_likelihood;
      run.trace_ = std::move(t);
      break;
    }
    case Method::Glicko:
    case Method::ExtendedKalman:
    case Method::TrueSkill2: {
      auto t = run_filter(s, index, config.gaussian(), gaussian_method(config.method), config.threads);
      run.probs_ = t.probs;
      run.logpred_ = t.logpred;
      run.log_likelihood_ = t.log_likelihood;
      run.trace_ = std::move(t);
      break;
    }
    case Method::Smc: {
      require_draw_support(s, config.theta.epsilon, "particle filter");
      const GaussianWalk dyn(config.theta.sigma0, config.theta.tau);
      const ObservationModel obs = config.gaussian().observation();
      auto t = run_smc_filter(s, index, dyn, outcome_pair_likelihood(s, obs),
                              {config.particles, config.seed, config.threads}, &obs);
      run.probs_ = t.probs;
      run.logpred_ = t.logpred;
      run.log_likelihood_ = t.log_likelihood;
      run.trace_ = std::move(t);
      break;
    }
    case Method::Discrete: {
      run.discrete_model_ = std::make_shared<DiscreteModel>(DiscreteModel::build(config.discrete()));
      auto t = run_discrete_filter(s, index, *run.discrete_model_, config.threads);
      run.probs_ = t.probs;
      run.logpred_ = t.logpred;
      run.log_likelihood_ = t.log_likelihood;
      run.trace_ = std::move(t);
      break;
    }
  }
  return run;
}

double Run::avg_nll() const {
  if (stream_->empty()) return 0.0;
  return -log_likelihood_ / static_cast<double>(stream_->size());
}

void Run::smooth() {
  if (smoothed_) return;
  switch (config_.method) {
    case Method::EloDavidson: throw_usage("Elo-Davidson has no smoother");
    case Method::Glicko:
    case Method::ExtendedKalman:
    case Method::TrueSkill2:
      gaussian_smooth_ = run_smoother(std::get<GaussianFilterTrace>(trace_), config_.threads);
      break;
    case Method::Smc: {
      const GaussianWalk dyn(config_.theta.sigma0, config_.theta.tau);
      trajectories_ = backward_simulate(std::get<SmcTrace>(trace_), dyn,
                                        {config_.particles, config_.seed, config_.threads});
      break;
    }
    case Method::Discrete:
      discrete_smooth_ = run_discrete_smoother(std::get<DiscreteFilterTrace>(trace_), *discrete_model_,
                                               config_.threads);
      break;
  }
  smoothed_ = true;
}

Run::Fixture Run::predict(std::optional<PlayerId> home, std::optional<PlayerId> away, double time) const {
  if (!std::isfinite(time)) throw_input("fixture time must be finite");
  Fixture fx;
  fx.home_unknown = !home;
  fx.away_unknown = !away;
  if (home && away && *home == *away) throw_input("fixture needs two different players");

  auto elapsed = [&](double last) {
    if (time < last) throw_input("fixture time precedes the player's last processed match");
    return time - last;
  };

  switch (config_.method) {
    case Method::EloDavidson: {
      const auto& t = std::get<GaussianFilterTrace>(trace_);
      auto rating = [&](std::optional<PlayerId> i) {
        if (!i || t.players.at(*i).empty()) return 0.0;
        elapsed(t.players[*i].back().time);
        return t.players[*i].back().filter.mean;
      };
      fx.probs = elo_davidson_probs(rating(home), rating(away), config_.elo);
      break;
    }
    case Method::Glicko:
    case Method::ExtendedKalman:
    case Method::TrueSkill2: {
      const auto& t = std::get<GaussianFilterTrace>(trace_);
      const GaussianParams p = config_.gaussian();
      auto belief = [&](std::optional<PlayerId> i) {
        if (!i || t.players.at(*i).empty()) return GaussianSkill{0.0, p.sigma0 * p.sigma0};
        const auto& last = t.players[*i].back();
        return gaussian_propagate(last.filter, elapsed(last.time), p);
      };
      fx.probs = gaussian_predictive(belief(home), belief(away), p, gaussian_method(config_.method));
      break;
    }
    case Method::Smc: {
      const auto& t = std::get<SmcTrace>(trace_);
      const GaussianWalk dyn(config_.theta.sigma0, config_.theta.tau);
      const std::size_t J = config_.particles;
      const auto time_bits = static_cast<std::uint64_t>(std::llround(time * 1e6));
      auto particles = [&](std::optional<PlayerId> i, std::uint64_t side) {
        const std::uint64_t who = i ? *i : (std::uint64_t{1} << 40) + side;
        Rng rng = make_stream(config_.seed, who, time_bits, kPredictTag);
        std::vector<double> x(J);
        if (!i || t.players.at(*i).empty()) {
          for (double& v : x) v = dyn.sample_initial(rng);
          return x;
        }
        const auto& last = t.players[*i].back();
        const double dt = elapsed(last.time);
        const auto anc = multinomial_resample(last.weights, J, rng);
        for (std::size_t j = 0; j < J; ++j) x[j] = dyn.sample(last.positions[anc[j]], dt, rng);
        return x;
      };
      const auto xh = particles(home, 0);
      const auto xa = particles(away, 1);
      const ObservationModel obs = config_.gaussian().observation();
      // Two prior beliefs are exchangeable: average each pair in both orientations.
      const bool exchangeable = (!home || t.players.at(*home).empty()) && (!away || t.players.at(*away).empty());
      PredictiveProbs p;
      for (std::size_t j = 0; j < J; ++j) {
        const auto q = outcome_probabilities(xh[j] - xa[j], obs);
        if (exchangeable) {
          const double w = q.home + q.away;
          p.home += w;
          p.away += w;
          p.draw += 2.0 * q.draw;
        } else {
          p.home += q.home;
          p.away += q.away;
          p.draw += q.draw;
        }
      }
      const double total = p.sum();
      fx.probs = {p.home / total, p.away / total, p.draw / total};
      break;
    }
    case Method::Discrete: {
      const auto& t = std::get<DiscreteFilterTrace>(trace_);
      const DiscreteModel& m = *discrete_model_;
      auto belief = [&](std::optional<PlayerId> i) {
        if (!i || t.players.at(*i).empty()) return m.initial;
        const auto& last = t.players[*i].back();
        return discrete_propagate(last.filter, elapsed(last.time), m.params.tau_d, m.spectrum);
      };
      fx.probs = m.predictive(belief(home), belief(away));
      break;
    }
  }
  return fx;
}

std::vector<Run::Row> Run::rows(PlayerId i) const {
  if (i >= stream_->players.size()) throw_input("unknown player id");
  std::vector<Row> out;
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        const auto& entries = t.players[i];
        for (std::size_t j = 0; j < entries.size(); ++j) {
          Row r;
          r.match = entries[j].match;
          r.time = entries[j].time;
          r.lag_one = kNaN;
          if constexpr (std::is_same_v<T, GaussianFilterTrace>) {
            r.predict = {entries[j].predict.mean, entries[j].predict.var};
            r.filter = {entries[j].filter.mean, entries[j].filter.var};
            if (smoothed_) {
              const auto& s = gaussian_smooth_.players[i][j];
              r.smooth = BeliefSummary{s.smooth.mean, s.smooth.var};
              r.lag_one = s.lag_one;
            }
          } else if constexpr (std::is_same_v<T, SmcTrace>) {
            r.predict = summarise(entries[j].positions, nullptr);
            r.filter = summarise(entries[j].positions, &entries[j].weights);
            if (smoothed_) {
              const auto& tr = trajectories_[i];
              std::vector<double> x(tr.samples);
              for (std::size_t m = 0; m < tr.samples; ++m) x[m] = tr.at(m, j);
              r.smooth = summarise(x, nullptr);
              if (j + 1 < tr.length) {
                double lag = 0.0;
                for (std::size_t m = 0; m < tr.samples; ++m) lag += tr.at(m, j) * tr.at(m, j + 1);
                r.lag_one = lag / static_cast<double>(tr.samples);
              }
            }
          } else {
            r.predict = summarise(entries[j].predict);
            r.filter = summarise(entries[j].filter);
            if (smoothed_) r.smooth = summarise(discrete_smooth_[i][j]);
          }
          out.push_back(r);
        }
      },
      trace_);
  return out;
}

void Run::write_ratings(std::ostream& out) const {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "player,match_index,time,kind,mean,var\n";
  for (PlayerId i = 0; i < stream_->players.size(); ++i) {
    for (const Row& r : rows(i)) {
      for (const auto& [kind, b] : {std::pair{"predict", r.predict}, std::pair{"filter", r.filter}}) {
        write_csv_field(out, stream_->players.name(i));
        out << ',' << (r.match + 1) << ',' << r.time << ',' << kind << ',' << b.mean << ',' << b.var << '\n';
      }
    }
  }
}

void Run::write_smooth(std::ostream& out) const {
  if (!smoothed_) throw_usage("write_smooth: run the smoother first");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "player,match_index,time,kind,mean,var,lag_one\n";
  for (PlayerId i = 0; i < stream_->players.size(); ++i) {
    for (const Row& r : rows(i)) {
      write_csv_field(out, stream_->players.name(i));
      out << ',' << (r.match + 1) << ',' << r.time << ",smooth," << r.smooth->mean << ',' << r.smooth->var << ',';
      write_number(out, r.lag_one);
      out << '\n';
    }
  }
}

void Run::write_particles(std::ostream& out) const {
  if (config_.method != Method::Smc) throw_usage("particle dumps need the SMC method");
  if (!smoothed_) throw_usage("write_particles: run the smoother first");
  const auto& t = std::get<SmcTrace>(trace_);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "player,time,sample_index,position\n";
  for (PlayerId i = 0; i < stream_->players.size(); ++i) {
    const auto& tr = trajectories_[i];
    for (std::size_t j = 0; j < tr.length; ++j)
      for (std::size_t m = 0; m < tr.samples; ++m) {
        write_csv_field(out, stream_->players.name(i));
        out << ',' << t.players[i][j].time << ',' << m << ',' << tr.at(m, j) << '\n';
      }
  }
}

void Run::write_categorical(std::ostream& out, bool summary) const {
  if (config_.method != Method::Discrete) throw_usage("categorical dumps need the discrete method");
  const auto& t = std::get<DiscreteFilterTrace>(trace_);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "player,match_index,time,kind";
  if (summary) {
    out << ",mean,std,q05,q50,q95";
  } else {
    for (std::size_t s = 1; s <= config_.states; ++s) out << ",p" << s;
  }
  out << '\n';
  auto emit = [&](PlayerId i, const CategoricalEntry& e, const char* kind, const Categorical& p) {
    write_csv_field(out, stream_->players.name(i));
    out << ',' << (e.match + 1) << ',' << e.time << ',' << kind;
    if (summary) {
      const BeliefSummary b = summarise(p);
      out << ',' << b.mean << ',' << std::sqrt(b.var) << ',' << quantile_state(p, 0.05) << ','
          << quantile_state(p, 0.5) << ',' << quantile_state(p, 0.95);
    } else {
      for (Eigen::Index s = 0; s < p.size(); ++s) out << ',' << p(s);
    }
    out << '\n';
  };
  for (PlayerId i = 0; i < stream_->players.size(); ++i) {
    const auto& entries = t.players[i];
    for (std::size_t j = 0; j < entries.size(); ++j) {
      emit(i, entries[j], "filter", entries[j].filter);
      if (smoothed_) emit(i, entries[j], "smooth", discrete_smooth_[i][j]);
    }
  }
}

}  // namespace skillrate
