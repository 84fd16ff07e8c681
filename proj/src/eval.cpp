#include "skillrate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include "skillrate/ingest.hpp"

namespace skillrate {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_optional(std::ostream& out, double v) {
  if (std::isfinite(v)) out << v;
}

std::string cell(double v) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

}  // namespace

EvalReport evaluate(const MatchStream& train, const MatchStream& test, const ModelConfig& config,
                    const std::string& dataset) {
  EvalReport r;
  r.method = display_name(config.method);
  r.dataset = dataset;
  r.train_matches = train.size();
  r.test_matches = test.size();
  r.train_draw_fraction = train.draw_fraction();
  r.test_draw_fraction = test.draw_fraction();
  r.train_avg_nll = kNaN;
  r.test_avg_nll = kNaN;
  if (train.empty()) throw_input("evaluate: the training split is empty");

  auto all = std::make_shared<const MatchStream>(concatenate(train, test));
  if (config.method == Method::Glicko && all->has_draws()) {
    r.available = false;
    return r;
  }
  const Run run = Run::filter(all, config);
  double train_sum = 0.0, test_sum = 0.0;
  for (std::size_t k = 0; k < all->size(); ++k) (k < train.size() ? train_sum : test_sum) += run.logpred()[k];
  r.train_avg_nll = -train_sum / static_cast<double>(train.size());
  if (!test.empty()) r.test_avg_nll = -test_sum / static_cast<double>(test.size());
  return r;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "dataset,method,train_matches,test_matches,train_draw_fraction,test_draw_fraction,"
         "train_avg_nll,test_avg_nll\n";
  for (const auto& r : reports) {
    write_csv_field(out, r.dataset);
    out << ',';
    write_csv_field(out, r.method);
    out << ',' << r.train_matches << ',' << r.test_matches << ',' << r.train_draw_fraction << ','
        << r.test_draw_fraction << ',';
    write_optional(out, r.train_avg_nll);
    out << ',';
    write_optional(out, r.test_avg_nll);
    out << '\n';
  }
}

void write_report_table(std::ostream& out, const std::vector<EvalReport>& reports) {
  std::vector<std::string> datasets, methods;
  auto add = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : reports) {
    add(datasets, r.dataset);
    add(methods, r.method);
  }
  auto find = [&](const std::string& m, const std::string& d) -> const EvalReport* {
    for (const auto& r : reports)
      if (r.method == m && r.dataset == d) return &r;
    return nullptr;
  };

  std::size_t name_width = 6;
  for (const auto& m : methods) name_width = std::max(name_width, m.size());
  std::vector<std::size_t> widths;
  for (const auto& d : datasets) widths.push_back(std::max<std::size_t>(d.size(), 13));

  out << std::left << std::setw(static_cast<int>(name_width)) << "Method";
  for (std::size_t c = 0; c < datasets.size(); ++c)
    out << "  " << std::setw(static_cast<int>(widths[c])) << datasets[c];
  out << '\n' << std::setw(static_cast<int>(name_width)) << "";
  for (std::size_t c = 0; c < datasets.size(); ++c)
    out << "  " << std::setw(static_cast<int>(widths[c])) << "train   test";
  out << '\n';
  for (const auto& m : methods) {
    out << std::setw(static_cast<int>(name_width)) << m;
    for (std::size_t c = 0; c < datasets.size(); ++c) {
      const EvalReport* r = find(m, datasets[c]);
      std::string text = "-       -";
      if (r) {
        std::string a = cell(r->train_avg_nll);
        a.resize(std::max<std::size_t>(a.size(), 5), ' ');
        text = a + "   " + cell(r->test_avg_nll);
      }
      out << "  " << std::setw(static_cast<int>(widths[c])) << text;
    }
    out << '\n';
  }
  out << std::setw(static_cast<int>(name_width)) << "Draws";
  for (std::size_t c = 0; c < datasets.size(); ++c) {
    double draws = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports)
      if (r.dataset == datasets[c]) {
        draws = (r.train_draw_fraction * static_cast<double>(r.train_matches) +
                 r.test_draw_fraction * static_cast<double>(r.test_matches));
        n = r.train_matches + r.test_matches;
      }
    std::ostringstream s;
    s << std::fixed << std::setprecision(0) << (n ? 100.0 * draws / static_cast<double>(n) : 0.0) << '%';
    out << "  " << std::setw(static_cast<int>(widths[c])) << s.str();
  }
  out << std::right << '\n';
}

void export_trajectory(const Run& run, PlayerId player, std::ostream& out) {
  if (player >= run.stream().players.size()) throw_input("export_trajectory: unknown player");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "time,filter_mean,filter_sd,smooth_mean,smooth_sd\n";
  for (const auto& r : run.rows(player)) {
    out << r.time << ',' << r.filter.mean << ',' << std::sqrt(r.filter.var) << ',';
    if (r.smooth) out << r.smooth->mean << ',' << std::sqrt(r.smooth->var);
    else out << ',';
    out << '\n';
  }
}

}  // namespace skillrate
