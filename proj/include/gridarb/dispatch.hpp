#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gridarb/bidding.hpp"
#include "gridarb/market_data.hpp"
#include "gridarb/storage_spec.hpp"
#include "gridarb/valuation.hpp"
#include "gridarb/value_curve.hpp"

namespace gridarb {

// Participation modes: price response / hour-ahead bids, 1 or 10 SoC segments.
enum class Mode { pr1, pr10, ha1, ha10 };

bool is_hour_ahead(Mode m);
int mode_segments(Mode m);
std::string mode_name(Mode m);
Mode parse_mode(const std::string& name);

struct Dispatch {
  double p = 0.0;  // MWh discharged at the meter
  double b = 0.0;  // MWh charged at the meter
  double e = 0.0;  // SoC after the step
};

struct DispatchRecord {
  long t = 0;
  std::int64_t timestamp = 0;
  double price = 0.0;
  double p = 0.0;
  double b = 0.0;
  double e = 0.0;        // SoC after the step
  double revenue = 0.0;  // price * (p - b) - cost * p
};

struct SimulationResult {
  Mode mode = Mode::pr10;
  std::vector<DispatchRecord> records;
  double total_profit = 0.0;
  std::vector<std::pair<std::string, double>> monthly;  // ("YYYY-MM", profit)

  std::vector<double> accumulated() const;
};

// Single-period optimum of price * (p - b) - cost * p + Q(e) over the feasible
// set from e_prev: a greedy marginal sweep over the piecewise-constant curve.
// Discharge runs while price > q(e)/eta + cost (and price >= 0), charge while
// price < q(e) * eta; equality means no action.
Dispatch single_period_dispatch(const ValueCurve& q_hat, double price, double e_prev,
                                const StorageSpec& spec);

// Price-taker clearing of a monotone bid curve: segments dispatch where the
// price crosses their bids, bounded per segment by its energy span and in
// aggregate by the per-step power bound. Identical arithmetic to
// single_period_dispatch run on the curve that generated the bids.
Dispatch clear_bids(const BidCurve& bids, double price, double e_prev, const StorageSpec& spec);

// Where simulate() gets its predicted curves from. curve_at(a) returns the
// post-step value curve the source pairs with anchor a: the curve for step
// a + hour_shift_steps().
class CurveSource {
 public:
  virtual ~CurveSource() = default;
  virtual int hour_shift_steps() const = 0;
  virtual long min_anchor() const = 0;
  virtual long max_anchor() const = 0;
  virtual ValueCurve curve_at(long anchor) = 0;
  // Optional batch hook called once with every anchor the run will need.
  virtual void prefetch(const std::vector<long>& /*anchors*/) {}
};

// Perfect-information source backed by a value surface whose step k matches
// absolute series index offset + k.
class SurfaceCurveSource final : public CurveSource {
 public:
  SurfaceCurveSource(const ValueSurface* surface, long offset, int hour_shift_steps);
  int hour_shift_steps() const override { return shift_; }
  long min_anchor() const override;
  long max_anchor() const override;
  ValueCurve curve_at(long anchor) override;

 private:
  const ValueSurface* surface_;
  long offset_;
  int shift_;
};

struct SimOptions {
  Mode mode = Mode::pr10;
  int bid_segments = 10;     // J; bids per hour in HA modes
  IndexRange range;          // absolute step indices [begin, end)
  double initial_soc = -1.0; // < 0 selects E/2
};

// Algorithm loop across the range: PR modes re-dispatch against the predicted
// curve every step; HA modes freeze one bid curve per wall-clock hour, decided
// a full hour before delivery, and clear it at every step of that hour.
SimulationResult simulate(const PriceSeries& prices, const StorageSpec& spec, CurveSource& source,
                          const SimOptions& opt);

// Maximum attainable profit over the range: forward simulation against the
// exact value surface of the range itself (terminal value 0).
double perfect_foresight_profit(const PriceSeries& prices, IndexRange range,
                                const StorageSpec& spec, int segments, double initial_soc = -1.0);
// Raw-vector variant used by tests and small studies.
double perfect_foresight_profit(const std::vector<double>& prices, const StorageSpec& spec,
                                int segments, double initial_soc = -1.0);

void write_result_csv(const SimulationResult& result, std::ostream& out);
void write_result_csv(const SimulationResult& result, const std::string& path);
void write_monthly_csv(const SimulationResult& result, std::ostream& out);
void write_monthly_csv(const SimulationResult& result, const std::string& path);

}  // namespace gridarb
