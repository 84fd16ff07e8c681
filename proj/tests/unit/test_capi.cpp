#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "skillrate/skillrate.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "skillrate_capi_test";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_matches() {
  const fs::path p = scratch() / "matches.csv";
  std::ofstream out(p);
  out << "date,home,away,outcome\n";
  const char* names[] = {"ann", "bob", "cat", "dan"};
  const char* ys = "HADHHAHDAH";
  for (int k = 0; k < 40; ++k)
    out << "2021-0" << 1 + k / 10 << "-" << (k % 10 < 9 ? "0" : "") << 1 + k % 10 << "," << names[k % 4] << ","
        << names[(k + 1 + k / 4 % 3) % 4] << "," << ys[k % 10] << "\n";
  return p;
}

}  // namespace

TEST_CASE("datasets") {
  skr_dataset* d = nullptr;
  REQUIRE(skr_dataset_load(write_matches().c_str(), nullptr, &d) == SKR_OK);
  CHECK(skr_dataset_matches(d) == 40);
  CHECK(skr_dataset_players(d) == 4);
  CHECK(skr_dataset_draw_fraction(d) == doctest::Approx(0.2));
  double t = 0;
  CHECK(skr_dataset_time_of(d, "2021-01-11", &t) == SKR_OK);
  CHECK(t == 10.0);

  skr_dataset *train = nullptr, *test = nullptr;
  REQUIRE(skr_dataset_split(d, "2021-03-01", &train, &test) == SKR_OK);
  CHECK(skr_dataset_matches(train) == 20);
  CHECK(skr_dataset_matches(test) == 20);
  skr_dataset_free(train);
  skr_dataset_free(test);
  skr_dataset_free(d);

  skr_dataset* bad = nullptr;
  CHECK(skr_dataset_load((scratch() / "absent.csv").c_str(), nullptr, &bad) == SKR_ERR_INPUT);
  CHECK(std::string(skr_last_error()).size() > 0);
  CHECK(bad == nullptr);
}

TEST_CASE("models") {
  skr_model* m = nullptr;
  CHECK(skr_model_create("nope", &m) != SKR_OK);
  REQUIRE(skr_model_create("ts2", &m) == SKR_OK);
  CHECK(std::string(skr_model_method(m)) == "ts2");
  CHECK(skr_model_set(m, "tau", 0.2) == SKR_OK);
  double v = 0;
  CHECK(skr_model_get(m, "tau", &v) == SKR_OK);
  CHECK(v == 0.2);
  CHECK(skr_model_set(m, "unknown", 1) == SKR_ERR_INPUT);
  CHECK(skr_model_set_sigmoid(m, "probit") == SKR_OK);

  const fs::path p = scratch() / "m.kv";
  CHECK(skr_model_save_params(m, p.c_str()) == SKR_OK);
  skr_model* back = nullptr;
  REQUIRE(skr_model_load_params(p.c_str(), &back) == SKR_OK);
  CHECK(skr_model_get(back, "tau", &v) == SKR_OK);
  CHECK(v == 0.2);
  skr_model* c = skr_model_clone(back);
  CHECK(c != nullptr);
  skr_model_free(c);
  skr_model_free(back);
  skr_model_free(m);
}

TEST_CASE("fit, run and predict") {
  skr_dataset* d = nullptr;
  REQUIRE(skr_dataset_load(write_matches().c_str(), nullptr, &d) == SKR_OK);
  skr_model* m = nullptr;
  REQUIRE(skr_model_create("ek", &m) == SKR_OK);
  skr_fit_info info{};
  const fs::path trace = scratch() / "trace.csv";
  REQUIRE(skr_model_fit_em(m, d, 50, 1e-8, trace.c_str(), &info) == SKR_OK);
  CHECK(info.iterations >= 1);
  CHECK(slurp(trace).rfind("iteration,sigma0,tau,epsilon,avg_nll\n", 0) == 0);

  skr_run* r = nullptr;
  REQUIRE(skr_run_filter(m, d, &r) == SKR_OK);
  CHECK(skr_run_avg_nll(r) == doctest::Approx(info.avg_nll).epsilon(1e-12));
  double probs[3];
  CHECK(skr_run_match_probs(r, 3, probs) == SKR_OK);
  CHECK(probs[0] + probs[1] + probs[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(skr_run_match_probs(r, 400, probs) != SKR_OK);

  int flags = 0;
  CHECK(skr_run_predict(r, "ann", "zed", "2021-06-01", probs, &flags) == SKR_OK);
  CHECK(flags == SKR_UNKNOWN_AWAY);
  CHECK(skr_run_predict(r, "ann", "bob", "2020-01-01", probs, &flags) == SKR_ERR_INPUT);

  CHECK(skr_run_write_smooth(r, (scratch() / "s.csv").c_str()) == SKR_ERR_USAGE);
  CHECK(skr_run_smooth(r) == SKR_OK);
  CHECK(skr_run_write_smooth(r, (scratch() / "s.csv").c_str()) == SKR_OK);
  CHECK(skr_run_write_particles(r, (scratch() / "p.csv").c_str()) == SKR_ERR_USAGE);
  CHECK(skr_run_export_trajectory(r, "cat", (scratch() / "t.csv").c_str()) == SKR_OK);

  skr_dataset *train = nullptr, *test = nullptr;
  REQUIRE(skr_dataset_split(d, "2021-03-01", &train, &test) == SKR_OK);
  skr_report* rep = skr_report_create();
  skr_eval_result res{};
  CHECK(skr_report_evaluate(rep, m, train, test, "halves", &res) == SKR_OK);
  CHECK(res.available == 1);
  CHECK(res.train_matches == 20);
  CHECK(res.train_avg_nll * 20 + res.test_avg_nll * 20 == doctest::Approx(info.avg_nll * 40).epsilon(1e-12));
  CHECK(skr_report_evaluate(rep, m, test, train, "reversed", &res) == SKR_ERR_INPUT);
  skr_dataset_free(train);
  skr_dataset_free(test);
  CHECK(skr_report_write_csv(rep, (scratch() / "r.csv").c_str()) == SKR_OK);
  skr_report_free(rep);
  skr_run_free(r);

  skr_model* elo = nullptr;
  REQUIRE(skr_model_create("elo", &elo) == SKR_OK);
  const double ks[] = {0.08}, kappas[] = {0.3};
  CHECK(skr_model_fit_grid(elo, d, ks, 1, kappas, 1, nullptr, &info) == SKR_OK);
  double k = 0;
  skr_model_get(elo, "k", &k);
  CHECK(k == 0.08);
  skr_model_free(elo);
  skr_model_free(m);
  skr_dataset_free(d);
}

TEST_CASE("null handles are usage errors") {
  skr_dataset* d = nullptr;
  CHECK(skr_dataset_load(nullptr, nullptr, &d) == SKR_ERR_USAGE);
  CHECK(skr_run_smooth(nullptr) == SKR_ERR_USAGE);
  skr_run_free(nullptr);
  CHECK(std::string(skr_version()).size() > 0);
}
