#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "gridarb/market_data.hpp"
#include "gridarb/valuation.hpp"

namespace gridarb {

// Lookbacks and target layout for predictor inputs. The input matrix pairs a
// day-ahead block of da_hours+1 hourly columns with a real-time block of
// rt_steps+1 step columns, over 5 hours of row shifts (one row per real-time
// step). hour_shift_steps moves the target curve forward for hour-ahead
// training (one hour = steps_per_hour).
struct FeatureParams {
  int da_hours = 24;          // m
  int rt_steps = 36;          // n
  int target_segments = 10;   // S
  int hour_shift_steps = 0;

  int columns() const { return da_hours + 1 + rt_steps + 1; }
};

inline int window_rows(const PriceSeries& prices) { return 5 * prices.steps_per_hour() + 1; }

// One training sample anchored at step t. Row r of x holds the day-ahead
// prices of the da_hours+1 hours ending at the hour of t-r followed by the
// real-time prices t-r-rt_steps .. t-r; row r of y is the target curve for
// step t-r (shifted by hour_shift_steps), downsampled to target_segments.
struct FeatureWindow {
  long t = 0;
  int hour_shift = 0;
  Eigen::MatrixXd x;  // (rows, columns), raw prices
  Eigen::MatrixXd y;  // (rows, target_segments); empty when no surface given
};

// Smallest anchor with full lookback history.
long first_valid_anchor(const PriceSeries& prices, const FeatureParams& params);
// Largest anchor with a target curve available (surface step k == series
// index k; pass steps = series size when no targets are needed).
long last_valid_anchor(long surface_steps, const FeatureParams& params);

// Builds the raw window at anchor t. `surface` may be null to skip targets;
// when given, its step axis must start at series index 0.
FeatureWindow build_window(const PriceSeries& prices, const ValueSurface* surface, long t,
                           const FeatureParams& params);

// Per-column affine normalization (z-score fitted on training windows only;
// targets stay in $/MWh).
struct Normalization {
  std::vector<double> mean;
  std::vector<double> scale;
};

class TrainingSet {
 public:
  TrainingSet() = default;

  std::shared_ptr<const PriceSeries> prices;  // null for materialized sets
  FeatureParams params;
  int rows = 0;
  int cols = 0;
  std::vector<long> anchors;
  Eigen::MatrixXd targets;      // anchors x S, anchor-row targets
  Eigen::MatrixXd materialized; // count x (rows*cols) normalized inputs; may be empty
  Normalization norm;

  long count() const { return static_cast<long>(anchors.size()); }
  int input_size() const { return rows * cols; }
  bool is_materialized() const { return materialized.size() > 0; }

  // Flattened (row-major) normalized input for sample i (position, not
  // anchor value).
  void fill_row(long i, Eigen::Ref<Eigen::RowVectorXd> dst) const;
};

// Windows at every stride-th valid anchor across the given ranges.
// Normalization is fitted here unless `reuse` is supplied (validation and
// test sets reuse the training fit).
TrainingSet build_training_set(std::shared_ptr<const PriceSeries> prices,
                               const ValueSurface& surface, const std::vector<IndexRange>& ranges,
                               const FeatureParams& params, long stride,
                               const Normalization* reuse = nullptr);

// Normalize a raw window in place using a fitted normalization.
void apply_normalization(const Normalization& norm, Eigen::Ref<Eigen::MatrixXd> x);

// Flat binary dump (header + row-major records) for debugging and
// cross-language parity checks.
void save_training_set(const TrainingSet& set, const std::string& path);

// Reloads a dump as a materialized set (inputs already normalized).
TrainingSet load_training_set(const std::string& path);

}  // namespace gridarb
