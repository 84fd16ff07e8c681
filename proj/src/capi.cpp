#include "skillrate/skillrate.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "skillrate/eval.hpp"
#include "skillrate/ingest.hpp"
#include "skillrate/model.hpp"

using namespace skillrate;

struct skr_dataset {
  std::shared_ptr<const MatchStream> stream;
};

struct skr_model {
  ModelConfig config;
};

struct skr_run {
  Run run;
};

struct skr_report {
  std::vector<EvalReport> reports;
};

namespace {

thread_local std::string last_error;

skr_status fail(skr_status code, const std::string& what) {
  last_error = what;
  return code;
}

template <class F>
skr_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return SKR_OK;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Input: return fail(SKR_ERR_INPUT, e.what());
      case ErrorKind::Numerical: return fail(SKR_ERR_NUMERICAL, e.what());
      case ErrorKind::Usage: return fail(SKR_ERR_USAGE, e.what());
    }
    return fail(SKR_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SKR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SKR_ERR_INTERNAL, e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw_usage(std::string(what) + " is NULL");
}

// Opens `path` for writing ("-" is standard output) and hands the stream to `body`.
template <class F>
void write_to(const char* path, F&& body) {
  require(path, "output path");
  if (std::string_view(path) == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_input(std::string("cannot open '") + path + "' for writing");
  body(out);
  out.flush();
  if (!out) throw_input(std::string("failed writing '") + path + "'");
}

PlayerId player_id(const MatchStream& s, const char* name) {
  require(name, "player name");
  const auto id = s.players.find(name);
  if (!id) throw_input(std::string("unknown player '") + name + "'");
  return *id;
}

}  // namespace

extern "C" {

const char* skr_last_error(void) { return last_error.c_str(); }
const char* skr_version(void) { return "0.1.0"; }

// ---- datasets --------------------------------------------------------------

skr_status skr_dataset_load(const char* path, const char* schema_path, skr_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const SchemaDescriptor schema = schema_path ? load_schema(schema_path) : SchemaDescriptor{};
    auto s = std::make_shared<MatchStream>(load_csv(path, schema));
    *out = new skr_dataset{std::move(s)};
  });
}

skr_status skr_dataset_split(const skr_dataset* data, const char* cutoff_date, skr_dataset** train,
                             skr_dataset** test) {
  return guarded([&] {
    require(data, "dataset");
    require(cutoff_date, "cutoff date");
    require(train, "train");
    require(test, "test");
    auto [a, b] = split_by_date(*data->stream, cutoff_date);
    auto ta = std::make_unique<skr_dataset>(skr_dataset{std::make_shared<MatchStream>(std::move(a))});
    auto tb = std::make_unique<skr_dataset>(skr_dataset{std::make_shared<MatchStream>(std::move(b))});
    *train = ta.release();
    *test = tb.release();
  });
}

skr_status skr_dataset_write_csv(const skr_dataset* data, const char* path) {
  return guarded([&] {
    require(data, "dataset");
    write_to(path, [&](std::ostream& o) { write_csv(o, *data->stream); });
  });
}

size_t skr_dataset_matches(const skr_dataset* data) { return data ? data->stream->size() : 0; }
size_t skr_dataset_players(const skr_dataset* data) { return data ? data->stream->players.size() : 0; }
double skr_dataset_draw_fraction(const skr_dataset* data) {
  return data ? data->stream->draw_fraction() : std::numeric_limits<double>::quiet_NaN();
}

skr_status skr_dataset_time_of(const skr_dataset* data, const char* date, double* out) {
  return guarded([&] {
    require(data, "dataset");
    require(date, "date");
    require(out, "out");
    *out = stream_time(*data->stream, date);
  });
}

void skr_dataset_free(skr_dataset* data) { delete data; }

// ---- models ----------------------------------------------------------------

skr_status skr_model_create(const char* method, skr_model** out) {
  return guarded([&] {
    require(method, "method");
    require(out, "out");
    *out = new skr_model{ModelConfig::defaults(parse_method(method))};
  });
}

skr_status skr_model_load_params(const char* path, skr_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::ifstream in(path);
    if (!in) throw_input(std::string("cannot open params file '") + path + "'");
    *out = new skr_model{read_params(in)};
  });
}

skr_status skr_model_save_params(const skr_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    write_to(path, [&](std::ostream& o) { write_params(o, model->config); });
  });
}

const char* skr_model_method(const skr_model* model) { return model ? to_string(model->config.method) : ""; }

skr_status skr_model_set(skr_model* model, const char* key, double value) {
  return guarded([&] {
    require(model, "model");
    require(key, "key");
    model->config.set(key, value);
  });
}

skr_status skr_model_get(const skr_model* model, const char* key, double* value) {
  return guarded([&] {
    require(model, "model");
    require(key, "key");
    require(value, "value");
    *value = model->config.get(key);
  });
}

skr_status skr_model_set_sigmoid(skr_model* model, const char* name) {
  return guarded([&] {
    require(model, "model");
    require(name, "sigmoid");
    model->config.sigmoid = parse_sigmoid(name);
  });
}

skr_model* skr_model_clone(const skr_model* model) {
  if (!model) return nullptr;
  return new (std::nothrow) skr_model{model->config};
}

void skr_model_free(skr_model* model) { delete model; }

skr_status skr_model_fit_em(skr_model* model, const skr_dataset* data, size_t max_iters, double tol,
                            const char* trace_path, skr_fit_info* info) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    ModelConfig& c = model->config;
    c.validate();
    const EmConfig em = c.em(max_iters, tol);
    const EmState st = em_fit(*data->stream, c.theta, em);
    if (trace_path) {
      write_to(trace_path, [&](std::ostream& o) {
        o << std::setprecision(std::numeric_limits<double>::max_digits10);
        o << "iteration,sigma0,tau,epsilon,avg_nll\n";
        for (std::size_t i = 0; i < st.theta_history.size(); ++i) {
          const Theta& t = st.theta_history[i];
          o << i << ',' << t.sigma0 << ',' << t.tau << ',' << t.epsilon << ',' << st.avg_nll(i) << '\n';
        }
      });
    }
    c.theta = st.theta;
    // Seed of the final particle sweep.
    if (c.method == Method::Smc) c.seed = em.seed + st.iteration;
    if (info) {
      info->iterations = st.iteration;
      info->converged = st.converged;
      info->diverged = st.diverged;
      info->avg_nll = st.avg_nll(st.loglik_history.size() - 1);
    }
  });
}

skr_status skr_model_fit_grid(skr_model* model, const skr_dataset* data, const double* p1, size_t n1,
                              const double* p2, size_t n2, const char* grid_path, skr_fit_info* info) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    if ((n1 && !p1) || (n2 && !p2)) throw_usage("grid values are NULL");
    ModelConfig& c = model->config;
    GridMethod gm;
    if (c.method == Method::EloDavidson) gm = GridMethod::EloDavidson;
    else if (c.method == Method::Glicko) gm = GridMethod::Glicko;
    else throw_usage(std::string(display_name(c.method)) + " is fitted by EM, not grid search");
    GridSpec spec{{p1, p1 + n1}, {p2, p2 + n2}, c.theta.epsilon, c.sigmoid};
    const GridResult g = grid_search(*data->stream, gm, spec, c.threads);
    if (grid_path) {
      write_to(grid_path, [&](std::ostream& o) {
        o << std::setprecision(std::numeric_limits<double>::max_digits10);
        o << "p1,p2,avg_nll\n";
        for (const auto& pt : g.surface) o << pt.p1 << ',' << pt.p2 << ',' << pt.avg_nll << '\n';
      });
    }
    if (gm == GridMethod::EloDavidson) {
      c.elo.k = g.best.p1;
      c.elo.kappa = g.best.p2;
    } else {
      c.theta.sigma0 = g.best.p1;
      c.theta.tau = g.best.p2;
      c.sigma_max = g.best.p1;
    }
    if (info) *info = {1, 1, 0, g.best.avg_nll};
  });
}

// ---- runs ------------------------------------------------------------------

skr_status skr_run_filter(const skr_model* model, const skr_dataset* data, skr_run** out) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    require(out, "out");
    *out = new skr_run{Run::filter(data->stream, model->config)};
  });
}

skr_status skr_run_smooth(skr_run* run) {
  return guarded([&] {
    require(run, "run");
    run->run.smooth();
  });
}

double skr_run_log_likelihood(const skr_run* run) {
  return run ? run->run.log_likelihood() : std::numeric_limits<double>::quiet_NaN();
}

double skr_run_avg_nll(const skr_run* run) {
  return run ? run->run.avg_nll() : std::numeric_limits<double>::quiet_NaN();
}

skr_status skr_run_match_probs(const skr_run* run, size_t match, double probs[3]) {
  return guarded([&] {
    require(run, "run");
    require(probs, "probs");
    if (match >= run->run.probs().size()) throw_usage("match index out of range");
    const PredictiveProbs& p = run->run.probs()[match];
    probs[0] = p.home;
    probs[1] = p.away;
    probs[2] = p.draw;
  });
}

skr_status skr_run_predict(const skr_run* run, const char* home, const char* away, const char* date,
                           double probs[3], int* flags) {
  return guarded([&] {
    require(run, "run");
    require(home, "home");
    require(away, "away");
    require(date, "date");
    require(probs, "probs");
    const MatchStream& s = run->run.stream();
    const auto fx = run->run.predict(s.players.find(home), s.players.find(away), stream_time(s, date));
    probs[0] = fx.probs.home;
    probs[1] = fx.probs.away;
    probs[2] = fx.probs.draw;
    if (flags) *flags = (fx.home_unknown ? SKR_UNKNOWN_HOME : 0) | (fx.away_unknown ? SKR_UNKNOWN_AWAY : 0);
  });
}

skr_status skr_run_predict_file(const skr_run* run, const char* fixtures_path, const char* out_path) {
  return guarded([&] {
    require(run, "run");
    require(fixtures_path, "fixtures path");
    std::ifstream in(fixtures_path);
    if (!in) throw_input(std::string("cannot open fixture file '") + fixtures_path + "'");
    const auto fixtures = read_fixtures(in);
    const MatchStream& s = run->run.stream();
    std::vector<Run::Fixture> results;
    results.reserve(fixtures.size());
    for (std::size_t r = 0; r < fixtures.size(); ++r) {
      const FixtureRow& f = fixtures[r];
      try {
        results.push_back(run->run.predict(s.players.find(f.home), s.players.find(f.away), stream_time(s, f.date)));
      } catch (const Error& e) {
        throw Error(e.kind(), "fixture row " + std::to_string(r + 1) + ": " + e.what());
      }
    }
    write_to(out_path, [&](std::ostream& o) {
      o << std::setprecision(std::numeric_limits<double>::max_digits10);
      o << "date,home,away,p_home,p_away,p_draw,home_unknown,away_unknown\n";
      for (std::size_t r = 0; r < fixtures.size(); ++r) {
        write_csv_field(o, fixtures[r].date);
        o << ',';
        write_csv_field(o, fixtures[r].home);
        o << ',';
        write_csv_field(o, fixtures[r].away);
        const auto& fx = results[r];
        o << ',' << fx.probs.home << ',' << fx.probs.away << ',' << fx.probs.draw << ','
          << int(fx.home_unknown) << ',' << int(fx.away_unknown) << '\n';
      }
    });
  });
}

skr_status skr_run_write_ratings(const skr_run* run, const char* path) {
  return guarded([&] {
    require(run, "run");
    write_to(path, [&](std::ostream& o) { run->run.write_ratings(o); });
  });
}

skr_status skr_run_write_smooth(const skr_run* run, const char* path) {
  return guarded([&] {
    require(run, "run");
    if (!run->run.smoothed()) throw_usage("run the smoother first");
    write_to(path, [&](std::ostream& o) { run->run.write_smooth(o); });
  });
}

skr_status skr_run_write_particles(const skr_run* run, const char* path) {
  return guarded([&] {
    require(run, "run");
    if (run->run.config().method != Method::Smc) throw_usage("particle dumps need the SMC method");
    if (!run->run.smoothed()) throw_usage("run the smoother first");
    write_to(path, [&](std::ostream& o) { run->run.write_particles(o); });
  });
}

skr_status skr_run_write_categorical(const skr_run* run, const char* path, int summary) {
  return guarded([&] {
    require(run, "run");
    if (run->run.config().method != Method::Discrete) throw_usage("categorical dumps need the discrete method");
    write_to(path, [&](std::ostream& o) { run->run.write_categorical(o, summary != 0); });
  });
}

skr_status skr_run_export_trajectory(const skr_run* run, const char* player, const char* path) {
  return guarded([&] {
    require(run, "run");
    const PlayerId id = player_id(run->run.stream(), player);
    write_to(path, [&](std::ostream& o) { export_trajectory(run->run, id, o); });
  });
}

void skr_run_free(skr_run* run) { delete run; }

// ---- evaluation ------------------------------------------------------------

skr_report* skr_report_create(void) { return new (std::nothrow) skr_report; }

skr_status skr_report_evaluate(skr_report* report, const skr_model* model, const skr_dataset* train,
                               const skr_dataset* test, const char* dataset_name, skr_eval_result* result) {
  return guarded([&] {
    require(report, "report");
    require(model, "model");
    require(train, "train");
    require(test, "test");
    const EvalReport r = evaluate(*train->stream, *test->stream, model->config, dataset_name ? dataset_name : "");
    report->reports.push_back(r);
    if (result) {
      *result = {r.train_avg_nll,       r.test_avg_nll,       r.train_matches, r.test_matches,
                 r.train_draw_fraction, r.test_draw_fraction, r.available};
    }
  });
}

skr_status skr_report_write_csv(const skr_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    write_to(path, [&](std::ostream& o) { write_report_csv(o, report->reports); });
  });
}

skr_status skr_report_write_table(const skr_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    write_to(path, [&](std::ostream& o) { write_report_table(o, report->reports); });
  });
}

void skr_report_free(skr_report* report) { delete report; }

}  // extern "C"
