#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "skillrate/model.hpp"

namespace skillrate {

struct EvalReport {
  std::string method;
  std::string dataset;
  double train_avg_nll = 0.0;  ///< NaN when unavailable
  double test_avg_nll = 0.0;   ///< NaN when unavailable or the test split is empty
  std::size_t train_matches = 0;
  std::size_t test_matches = 0;
  double train_draw_fraction = 0.0;
  double test_draw_fraction = 0.0;
  /// False when the method cannot give normalised draw predictions on data
  /// with draws (Glicko).
  bool available = true;
};

/// Filters train followed by test in one sweep with frozen parameters and
/// splits the log predictive sum at the boundary.
EvalReport evaluate(const MatchStream& train, const MatchStream& test, const ModelConfig& config,
                    const std::string& dataset);

/// `dataset,method,train_matches,test_matches,train_draw_fraction,
/// test_draw_fraction,train_avg_nll,test_avg_nll`; unavailable values are empty.
void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);

/// One row per method, a train/test column pair per dataset; "-" marks
/// unavailable cells.
void write_report_table(std::ostream& out, const std::vector<EvalReport>& reports);

/// `time,filter_mean,filter_sd,smooth_mean,smooth_sd` for one player. Smooth
/// columns are empty when the run has not been smoothed.
void export_trajectory(const Run& run, PlayerId player, std::ostream& out);

}  // namespace skillrate
