// Command-line front end over the skillrate C API.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skillrate/skillrate.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 1;

struct Failure {
  skr_status status;
  std::string message;
};

void check(skr_status s) {
  if (s != SKR_OK) throw Failure{s, skr_last_error()};
}

[[noreturn]] void input_error(const std::string& message) { throw Failure{SKR_ERR_INPUT, message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<skr_dataset, Deleter<skr_dataset, skr_dataset_free>>;
using Model = std::unique_ptr<skr_model, Deleter<skr_model, skr_model_free>>;
using RunPtr = std::unique_ptr<skr_run, Deleter<skr_run, skr_run_free>>;
using Report = std::unique_ptr<skr_report, Deleter<skr_report, skr_report_free>>;

struct Options {
  std::string method;
  std::string data;
  std::string schema;
  std::string split;
  std::vector<std::string> params;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<std::size_t> states;
  std::optional<unsigned> threads;
  std::optional<std::string> sigmoid;
  std::vector<std::string> overrides;
  std::string out = ".";
  std::size_t max_iters = 1000;
  double tol = 1e-6;
  std::string grid_p1;
  std::string grid_p2;
  std::string fixtures;
  std::vector<std::string> trajectories;
  bool particles_dump = false;
  std::string categorical;
  std::string dataset_name;
  bool train_only = false;
};

Dataset load_data(const Options& o) {
  skr_dataset* d = nullptr;
  check(skr_dataset_load(o.data.c_str(), o.schema.empty() ? nullptr : o.schema.c_str(), &d));
  return Dataset(d);
}

std::pair<Dataset, Dataset> split_data(const Dataset& all, const std::string& cutoff) {
  skr_dataset* train = nullptr;
  skr_dataset* test = nullptr;
  check(skr_dataset_split(all.get(), cutoff.c_str(), &train, &test));
  return {Dataset(train), Dataset(test)};
}

void apply_overrides(skr_model* m, const Options& o) {
  if (o.sigmoid) check(skr_model_set_sigmoid(m, o.sigmoid->c_str()));
  if (o.seed) check(skr_model_set(m, "seed", static_cast<double>(*o.seed)));
  if (o.particles) check(skr_model_set(m, "particles", static_cast<double>(*o.particles)));
  if (o.states) check(skr_model_set(m, "states", static_cast<double>(*o.states)));
  if (o.threads) check(skr_model_set(m, "threads", *o.threads));
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) input_error("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (key == "sigmoid") {
      check(skr_model_set_sigmoid(m, value.c_str()));
      continue;
    }
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0' || errno != 0) input_error("--set " + key + ": '" + value + "' is not a number");
    check(skr_model_set(m, key.c_str(), v));
  }
}

// A model from --params (one file) or --method defaults, then command-line overrides.
Model make_model(const Options& o, const std::string& params_path) {
  skr_model* m = nullptr;
  if (!params_path.empty()) {
    check(skr_model_load_params(params_path.c_str(), &m));
    Model model(m);
    if (!o.method.empty() && o.method != skr_model_method(m))
      input_error("--method " + o.method + " does not match the params file (" + skr_model_method(m) + ")");
    apply_overrides(m, o);
    return model;
  }
  if (o.method.empty()) input_error("give --method or --params");
  check(skr_model_create(o.method.c_str(), &m));
  Model model(m);
  apply_overrides(m, o);
  return model;
}

Model make_model(const Options& o) {
  if (o.params.size() > 1) input_error("this command takes a single --params file");
  return make_model(o, o.params.empty() ? std::string() : o.params.front());
}

std::string out_path(const Options& o, const std::string& name) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) input_error("cannot create output directory '" + o.out + "': " + ec.message());
  return (fs::path(o.out) / name).string();
}

// "a:b:n" (n evenly spaced points) or a comma list.
std::vector<double> parse_grid(const std::string& text, const char* flag) {
  std::vector<double> values;
  auto number = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(v)) input_error(std::string(flag) + ": bad number '" + s + "'");
    return v;
  };
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    const double a = number(text.substr(0, c1));
    const double b = number(text.substr(c1 + 1, c2 - c1 - 1));
    const double n = number(text.substr(c2 + 1));
    if (!(n >= 1) || n != std::floor(n)) input_error(std::string(flag) + ": point count must be a positive integer");
    const auto count = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < count; ++i)
      values.push_back(count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    return values;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(number(item));
  if (values.empty()) input_error(std::string(flag) + " is empty");
  return values;
}

std::string file_safe(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
  return s;
}

void print_fit(const skr_model* m, const skr_fit_info& info, bool em) {
  std::cout << "method " << skr_model_method(m);
  if (em) {
    std::cout << ": " << info.iterations << " EM iterations, "
              << (info.converged ? "converged" : info.diverged ? "stopped early (numerical failure)" : "iteration cap reached");
  }
  std::cout << ", avg NLL " << info.avg_nll << '\n';
}

int cmd_fit(const Options& o) {
  Model model = make_model(o);
  Dataset all = load_data(o);
  Dataset train;
  if (!o.split.empty()) train = std::move(split_data(all, o.split).first);
  const skr_dataset* data = train ? train.get() : all.get();

  const std::string method = skr_model_method(model.get());
  skr_fit_info info{};
  const bool grid = method == "elo" || method == "glicko";
  if (grid) {
    if (o.grid_p1.empty() || o.grid_p2.empty()) input_error("grid search needs --grid-p1 and --grid-p2");
    const auto p1 = parse_grid(o.grid_p1, "--grid-p1");
    const auto p2 = parse_grid(o.grid_p2, "--grid-p2");
    check(skr_model_fit_grid(model.get(), data, p1.data(), p1.size(), p2.data(), p2.size(),
                             out_path(o, "grid.csv").c_str(), &info));
  } else {
    check(skr_model_fit_em(model.get(), data, o.max_iters, o.tol, out_path(o, "em_trace.csv").c_str(), &info));
  }
  check(skr_model_save_params(model.get(), out_path(o, "params.kv").c_str()));
  print_fit(model.get(), info, !grid);
  return 0;
}

RunPtr filter(const Model& model, const Dataset& data) {
  skr_run* r = nullptr;
  check(skr_run_filter(model.get(), data.get(), &r));
  return RunPtr(r);
}

int cmd_rate(const Options& o) {
  Model model = make_model(o);
  Dataset data = load_data(o);
  RunPtr run = filter(model, data);
  check(skr_run_write_ratings(run.get(), out_path(o, "ratings.csv").c_str()));
  if (!o.categorical.empty()) {
    if (o.categorical != "full" && o.categorical != "summary") input_error("--categorical expects full or summary");
    check(skr_run_write_categorical(run.get(), out_path(o, "categorical.csv").c_str(), o.categorical == "summary"));
  }
  std::cout << skr_dataset_matches(data.get()) << " matches, avg NLL " << skr_run_avg_nll(run.get()) << '\n';
  return 0;
}

int cmd_smooth(const Options& o) {
  Model model = make_model(o);
  Dataset data = load_data(o);
  RunPtr run = filter(model, data);
  check(skr_run_smooth(run.get()));
  check(skr_run_write_smooth(run.get(), out_path(o, "smooth.csv").c_str()));
  for (const auto& player : o.trajectories)
    check(skr_run_export_trajectory(run.get(), player.c_str(),
                                    out_path(o, "trajectory_" + file_safe(player) + ".csv").c_str()));
  if (o.particles_dump) check(skr_run_write_particles(run.get(), out_path(o, "particles.csv").c_str()));
  if (!o.categorical.empty()) {
    if (o.categorical != "full" && o.categorical != "summary") input_error("--categorical expects full or summary");
    check(skr_run_write_categorical(run.get(), out_path(o, "categorical.csv").c_str(), o.categorical == "summary"));
  }
  return 0;
}

int cmd_predict(const Options& o) {
  Model model = make_model(o);
  Dataset data = load_data(o);
  RunPtr run = filter(model, data);
  check(skr_run_predict_file(run.get(), o.fixtures.c_str(), out_path(o, "predictions.csv").c_str()));
  return 0;
}

int cmd_evaluate(const Options& o) {
  Dataset all = load_data(o);
  if (o.split.empty() && !o.train_only) input_error("evaluate needs --split (or --train-only)");
  auto [train, test] = split_data(all, o.split.empty() ? std::string("9999-12-31") : o.split);

  Report report(skr_report_create());
  if (!report) throw Failure{SKR_ERR_INTERNAL, "out of memory"};
  const std::string name = o.dataset_name.empty() ? fs::path(o.data).stem().string() : o.dataset_name;
  std::vector<std::string> sources = o.params;
  if (sources.empty()) sources.push_back("");
  for (const auto& p : sources) {
    Model model = make_model(o, p);
    check(skr_report_evaluate(report.get(), model.get(), train.get(), test.get(), name.c_str(), nullptr));
  }
  check(skr_report_write_csv(report.get(), out_path(o, "report.csv").c_str()));
  check(skr_report_write_table(report.get(), out_path(o, "report.txt").c_str()));
  check(skr_report_write_table(report.get(), "-"));
  return 0;
}

void add_model_flags(CLI::App* c, Options& o) {
  c->add_option("--method", o.method, "elo, glicko, ek, ts2, smc or discrete");
  c->add_option("--data", o.data, "match file")->required()->check(CLI::ExistingFile);
  c->add_option("--schema", o.schema, "column mapping file (key=value)")->check(CLI::ExistingFile);
  c->add_option("--seed", o.seed, "random seed (smc)");
  c->add_option("--particles", o.particles, "particles per player (smc)");
  c->add_option("--states", o.states, "grid states S (discrete)");
  c->add_option("--threads", o.threads, "worker cap");
  c->add_option("--sigmoid", o.sigmoid, "logistic or probit");
  c->add_option("--set", o.overrides, "parameter override key=value (repeatable)");
  c->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skill rating: filtering, smoothing and parameter learning for match data"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "learn parameters by EM (ek, ts2, smc, discrete) or grid search (elo, glicko)");
  add_model_flags(fit, o);
  fit->add_option("--params", o.params, "initial parameters")->check(CLI::ExistingFile);
  fit->add_option("--split", o.split, "fit on matches before this date");
  fit->add_option("--max-iters", o.max_iters, "EM iteration cap");
  fit->add_option("--tol", o.tol, "EM stop when avg NLL changes less than this");
  fit->add_option("--grid-p1", o.grid_p1, "K (elo) or sigma0 (glicko): a:b:n or a comma list");
  fit->add_option("--grid-p2", o.grid_p2, "kappa (elo) or tau (glicko): a:b:n or a comma list");

  auto* rate = app.add_subcommand("rate", "filtering sweep: ratings.csv");
  add_model_flags(rate, o);
  rate->add_option("--params", o.params, "parameter file")->check(CLI::ExistingFile);
  rate->add_option("--categorical", o.categorical, "also write categorical.csv (full or summary; discrete)");

  auto* smooth = app.add_subcommand("smooth", "smoothing: smooth.csv and optional trajectories");
  add_model_flags(smooth, o);
  smooth->add_option("--params", o.params, "parameter file")->check(CLI::ExistingFile);
  smooth->add_option("--trajectory", o.trajectories, "player to export (repeatable)");
  smooth->add_flag("--dump-particles", o.particles_dump, "write particles.csv (smc)");
  smooth->add_option("--categorical", o.categorical, "also write categorical.csv (full or summary; discrete)");

  auto* predict = app.add_subcommand("predict", "fixture probabilities: predictions.csv");
  add_model_flags(predict, o);
  predict->add_option("--params", o.params, "parameter file")->check(CLI::ExistingFile);
  predict->add_option("--fixtures", o.fixtures, "date,home,away file")->required()->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand("evaluate", "train/test average NLL: report.csv and report.txt");
  add_model_flags(evaluate, o);
  evaluate->add_option("--params", o.params, "parameter file (repeatable, one row each)")->check(CLI::ExistingFile);
  evaluate->add_option("--split", o.split, "test period starts at this date");
  evaluate->add_flag("--train-only", o.train_only, "evaluate without a test period");
  evaluate->add_option("--name", o.dataset_name, "dataset label in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*fit) return cmd_fit(o);
    if (*rate) return cmd_rate(o);
    if (*smooth) return cmd_smooth(o);
    if (*predict) return cmd_predict(o);
    if (*evaluate) return cmd_evaluate(o);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    switch (f.status) {
      case SKR_ERR_INPUT:
      case SKR_ERR_USAGE: return kExitInput;
      case SKR_ERR_NUMERICAL: return kExitNumerical;
      default: return kExitInternal;
    }
  }
  return kExitInternal;
}
