#include "gridarb/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "gridarb/errors.hpp"
#include "gridarb/timeparse.hpp"

namespace gridarb {

bool is_hour_ahead(Mode m) { return m == Mode::ha1 || m == Mode::ha10; }

int mode_segments(Mode m) { return (m == Mode::pr1 || m == Mode::ha1) ? 1 : 10; }

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::pr1: return "pr1";
    case Mode::pr10: return "pr10";
    case Mode::ha1: return "ha1";
    case Mode::ha10: return "ha10";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "pr1") return Mode::pr1;
  if (name == "pr10") return Mode::pr10;
  if (name == "ha1") return Mode::ha1;
  if (name == "ha10") return Mode::ha10;
  throw ConfigError("unknown mode '" + name + "' (expected pr1, pr10, ha1, ha10)");
}

std::vector<double> SimulationResult::accumulated() const {
  std::vector<double> acc(records.size());
  double run = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    run += records[i].revenue;
    acc[i] = run;
  }
  return acc;
}

namespace {

// One marginal sweep shared by the price-response and bid-clearing paths so
// that both produce bit-identical dispatches. Segment j spans
// [breakpoints[j], breakpoints[j+1]); discharge_thr/charge_thr are the
// per-segment price thresholds (C_j and B_j). Strict inequalities: a price
// exactly at a threshold does nothing.
Dispatch marginal_sweep(const std::vector<double>& breakpoints,
                        const std::vector<double>& discharge_thr,
                        const std::vector<double>& charge_thr, double price, double e_prev,
                        const StorageSpec& spec) {
  const int J = static_cast<int>(discharge_thr.size());
  const double capacity = breakpoints.back();
  if (!(e_prev >= 0.0) || !(e_prev <= capacity))
    throw NumericError("dispatch: starting SoC " + std::to_string(e_prev) + " outside [0, " +
                       std::to_string(capacity) + "]");
  if (!std::isfinite(price)) throw NumericError("dispatch: price is not finite");

  Dispatch d;
  d.e = e_prev;
  const double eta = spec.efficiency;

  if (price >= 0.0) {
    double cap_p = spec.step_energy();
    int k = J - 1;
    while (cap_p > 0.0 && d.e > 0.0) {
      while (k > 0 && breakpoints[static_cast<std::size_t>(k)] >= d.e) --k;
      if (!(price > discharge_thr[static_cast<std::size_t>(k)])) break;
      const double lo = breakpoints[static_cast<std::size_t>(k)];
      const double room = d.e - lo;          // SoC held in this segment
      const double want = cap_p / eta;       // SoC drop the power bound allows
      if (room <= want) {
        d.e = lo;
        d.p += room * eta;
        cap_p -= room * eta;
        if (k == 0) break;
      } else {
        d.e -= want;
        d.p += cap_p;
        cap_p = 0.0;
      }
    }
  }
  if (d.p == 0.0) {
    double cap_b = spec.step_energy();
    int k = 0;
    while (cap_b > 0.0 && d.e < capacity) {
      while (k < J - 1 && breakpoints[static_cast<std::size_t>(k) + 1] <= d.e) ++k;
      if (!(price < charge_thr[static_cast<std::size_t>(k)])) break;
      const double hi = breakpoints[static_cast<std::size_t>(k) + 1];
      const double room = hi - d.e;          // headroom in this segment
      const double want = cap_b * eta;       // SoC rise the power bound allows
      if (room <= want) {
        d.e = hi;
        d.b += room / eta;
        cap_b -= room / eta;
        if (k == J - 1) break;
      } else {
        d.e += want;
        d.b += cap_b;
        cap_b = 0.0;
      }
    }
  }
  return d;
}

void require_non_increasing(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) throw NumericError(std::string("dispatch: ") + what + " not monotone");
}

}  // namespace

Dispatch single_period_dispatch(const ValueCurve& q_hat, double price, double e_prev,
                                const StorageSpec& spec) {
  if (!q_hat.non_increasing())
    throw NumericError("single_period_dispatch: value curve is not non-increasing");
  const int S = q_hat.segments();
  std::vector<double> discharge_thr(static_cast<std::size_t>(S));
  std::vector<double> charge_thr(static_cast<std::size_t>(S));
  for (int j = 0; j < S; ++j) {
    const double q = q_hat.values[static_cast<std::size_t>(j)];
    discharge_thr[static_cast<std::size_t>(j)] = spec.discharge_cost + q / spec.efficiency;
    charge_thr[static_cast<std::size_t>(j)] = q * spec.efficiency;
  }
  return marginal_sweep(segment_breakpoints(q_hat.energy, S), discharge_thr, charge_thr, price,
                        e_prev, spec);
}

Dispatch clear_bids(const BidCurve& bids, double price, double e_prev, const StorageSpec& spec) {
  require_non_increasing(bids.discharge_bids, "discharge bids");
  require_non_increasing(bids.charge_bids, "charge bids");
  return marginal_sweep(bids.breakpoints, bids.discharge_bids, bids.charge_bids, price, e_prev,
                        spec);
}

SurfaceCurveSource::SurfaceCurveSource(const ValueSurface* surface, long offset,
                                       int hour_shift_steps)
    : surface_(surface), offset_(offset), shift_(hour_shift_steps) {}

long SurfaceCurveSource::min_anchor() const { return offset_ - shift_; }

long SurfaceCurveSource::max_anchor() const { return offset_ + surface_->steps() - 1 - shift_; }

ValueCurve SurfaceCurveSource::curve_at(long anchor) {
  const long step = anchor + shift_ - offset_;
  if (step < 0 || step >= surface_->steps())
    throw DataError("surface curve source: step " + std::to_string(step) + " outside surface");
  return surface_->post_step(step);
}

SimulationResult simulate(const PriceSeries& prices, const StorageSpec& spec, CurveSource& source,
                          const SimOptions& opt) {
  spec.validate();
  if (opt.range.begin < 0 || opt.range.end > prices.size() || opt.range.size() <= 0)
    throw DataError("simulate: bad index range");
  const int spm = prices.steps_per_hour();
  const int required_shift = is_hour_ahead(opt.mode) ? spm : 0;
  if (source.hour_shift_steps() != required_shift)
    throw ConfigError("simulate: curve source hour shift " +
                      std::to_string(source.hour_shift_steps()) + " does not match mode " +
                      mode_name(opt.mode) + " (needs " + std::to_string(required_shift) + ")");

  const auto anchor_of = [&](long k) -> long {
    if (!is_hour_ahead(opt.mode)) return k;
    const long pos_in_hour = (prices.timestamp(k) % 3600) / prices.spacing_seconds();
    return k - pos_in_hour - spm;  // decided at the top of the previous hour
  };

  // Warm-up: every anchor the run touches must have enough history.
  const long first_anchor = anchor_of(opt.range.begin);
  if (first_anchor < source.min_anchor()) {
    long first_ok = opt.range.begin;
    while (anchor_of(first_ok) < source.min_anchor()) ++first_ok;
    throw DataError("simulate: insufficient warm-up history at t=" +
                    std::to_string(opt.range.begin) + "; first valid start is t=" +
                    std::to_string(first_ok) + " (" +
                    format_iso8601_utc(prices.timestamp(first_ok)) + ")");
  }
  if (anchor_of(opt.range.end - 1) > source.max_anchor())
    throw DataError("simulate: curve source does not cover the end of the range");

  {
    std::vector<long> anchors;
    anchors.reserve(static_cast<std::size_t>(opt.range.size()));
    long last = -1;
    bool have_last = false;
    for (long k = opt.range.begin; k < opt.range.end; ++k) {
      const long a = anchor_of(k);
      if (!have_last || a != last) {
        anchors.push_back(a);
        last = a;
        have_last = true;
      }
    }
    source.prefetch(anchors);
  }

  const double capacity = spec.energy_mwh;
  double e = opt.initial_soc < 0.0 ? 0.5 * capacity : opt.initial_soc;
  if (e < 0.0 || e > capacity) throw ConfigError("simulate: initial SoC outside [0, E]");

  SimulationResult result;
  result.mode = opt.mode;
  result.records.reserve(static_cast<std::size_t>(opt.range.size()));

  long cached_anchor = -1;
  bool have_bids = false;
  BidCurve bids;

  for (long k = opt.range.begin; k < opt.range.end; ++k) {
    const double price = prices.rt_prices[static_cast<std::size_t>(k)];
    Dispatch d;
    if (is_hour_ahead(opt.mode)) {
      const long a = anchor_of(k);
      if (!have_bids || a != cached_anchor) {
        ValueCurve curve = source.curve_at(a);
        if (curve.segments() != opt.bid_segments)
          curve = downsample_curve(curve, opt.bid_segments);
        bids = make_bids(curve, spec);
        cached_anchor = a;
        have_bids = true;
      }
      d = clear_bids(bids, price, e, spec);
    } else {
      const ValueCurve curve = source.curve_at(k);
      d = single_period_dispatch(curve, price, e, spec);
    }
    DispatchRecord rec;
    rec.t = k;
    rec.timestamp = prices.timestamp(k);
    rec.price = price;
    rec.p = d.p;
    rec.b = d.b;
    rec.e = d.e;
    rec.revenue = price * (d.p - d.b) - spec.discharge_cost * d.p;
    result.total_profit += rec.revenue;
    result.records.push_back(rec);
    e = d.e;
  }

  for (const DispatchRecord& rec : result.records) {
    const std::string ym = format_year_month(rec.timestamp);
    if (result.monthly.empty() || result.monthly.back().first != ym)
      result.monthly.emplace_back(ym, 0.0);
    result.monthly.back().second += rec.revenue;
  }
  return result;
}

double perfect_foresight_profit(const std::vector<double>& prices, const StorageSpec& spec,
                                int segments, double initial_soc) {
  const ValueSurface surface =
      backward_induction(prices, spec, constant_curve(spec.energy_mwh, segments, 0.0));
  double e = initial_soc < 0.0 ? 0.5 * spec.energy_mwh : initial_soc;
  double profit = 0.0;
  for (long k = 0; k < static_cast<long>(prices.size()); ++k) {
    const double price = prices[static_cast<std::size_t>(k)];
    const Dispatch d = single_period_dispatch(surface.post_step(k), price, e, spec);
    profit += price * (d.p - d.b) - spec.discharge_cost * d.p;
    e = d.e;
  }
  return profit;
}

double perfect_foresight_profit(const PriceSeries& prices, IndexRange range,
                                const StorageSpec& spec, int segments, double initial_soc) {
  if (range.begin < 0 || range.end > prices.size() || range.size() <= 0)
    throw DataError("perfect_foresight_profit: bad index range");
  std::vector<double> slice(prices.rt_prices.begin() + range.begin,
                            prices.rt_prices.begin() + range.end);
  return perfect_foresight_profit(slice, spec, segments, initial_soc);
}

void write_result_csv(const SimulationResult& result, std::ostream& out) {
  out << "t,price,p,b,soc,revenue\n";
  char buf[192];
  for (const DispatchRecord& r : result.records) {
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.t, r.price, r.p, r.b, r.e,
                  r.revenue);
    out << buf;
  }
}

void write_result_csv(const SimulationResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_result_csv(result, out);
}

void write_monthly_csv(const SimulationResult& result, std::ostream& out) {
  out << "month,profit\n";
  char buf[64];
  for (const auto& [month, profit] : result.monthly) {
    std::snprintf(buf, sizeof buf, "%s,%.2f\n", month.c_str(), profit);
    out << buf;
  }
}

void write_monthly_csv(const SimulationResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_monthly_csv(result, out);
}

}  // namespace gridarb
