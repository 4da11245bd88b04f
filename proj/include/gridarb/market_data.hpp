#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gridarb {

enum class PriceKind { realtime, dayahead };

// One raw price stream on a fixed grid: timestamps are start + i*spacing.
// Constant spacing is enforced at load time (gap slots are forward-filled),
// so timestamps are stored implicitly.
struct SeriesFragment {
  std::string zone;
  int resolution_minutes = 0;
  std::int64_t start = 0;  // epoch seconds of first sample
  std::vector<double> prices;
  long gaps_filled = 0;

  long size() const { return static_cast<long>(prices.size()); }
  std::int64_t spacing_seconds() const { return static_cast<std::int64_t>(resolution_minutes) * 60; }
  std::int64_t timestamp(long i) const { return start + i * spacing_seconds(); }
};

// Aligned real-time / day-ahead pair for one zone. da_expanded holds the
// day-ahead price of the hour containing each real-time step, so
// da_expanded.size() == rt_prices.size().
struct PriceSeries {
  std::string zone;
  int resolution_minutes = 0;  // real-time resolution
  std::int64_t rt_start = 0;
  std::vector<double> rt_prices;
  std::int64_t da_start = 0;  // hour-aligned
  std::vector<double> da_hourly;
  std::vector<double> da_expanded;
  bool da_synthesized = false;
  long rt_gaps_filled = 0;
  long da_gaps_filled = 0;

  long size() const { return static_cast<long>(rt_prices.size()); }
  int steps_per_hour() const { return 60 / resolution_minutes; }
  std::int64_t spacing_seconds() const { return static_cast<std::int64_t>(resolution_minutes) * 60; }
  std::int64_t timestamp(long i) const { return rt_start + i * spacing_seconds(); }
  // Index into da_hourly for the hour containing rt step i.
  long hour_index(long i) const;
};

struct PriceStats {
  long count = 0;
  long negative_count = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

// Reads a price CSV. Accepted rows: "timestamp,price" or "timestamp,zone,price"
// (an optional header line is skipped). When a zone column is present, rows are
// filtered to `zone`. Rows are sorted and de-duplicated (last value wins);
// missing grid slots are forward-filled and counted. Files with more than 1%
// gaps, off-grid timestamps, or malformed rows are rejected.
SeriesFragment load_price_csv(const std::string& path, PriceKind kind, const std::string& zone,
                              int resolution_minutes);

// Same parser over an already-loaded text buffer (used by tests and callers
// that synthesize CSVs in memory).
SeriesFragment parse_price_csv(std::istream& in, const std::string& source_name, PriceKind kind,
                               const std::string& zone, int resolution_minutes);

// Canonical CSV emitter: "timestamp,zone,price" with UTC timestamps and
// round-trip-exact prices.
void write_price_csv(const SeriesFragment& frag, std::ostream& out);
void write_price_csv(const SeriesFragment& frag, const std::string& path);

// Trims both fragments to their overlapping time range and expands the hourly
// day-ahead stream across real-time steps.
PriceSeries align_series(const SeriesFragment& rt, const SeriesFragment& da);

// For markets without a day-ahead product: hourly day-ahead proxy from the
// trailing 24-hour mean of real-time prices (expanding window over the first
// day). The result is flagged via PriceSeries::da_synthesized after align.
SeriesFragment synthesize_dayahead(const SeriesFragment& rt);

PriceStats price_stats(const PriceSeries& series);

// Bundle file: validated aligned series as a single JSON document.
void save_bundle(const PriceSeries& series, const std::string& path);
PriceSeries load_bundle(const std::string& path);

// Contiguous slice [begin, end) of the real-time axis as absolute indices for
// a given UTC time range; throws DataError when the range misses the series.
struct IndexRange {
  long begin = 0;
  long end = 0;
  long size() const { return end - begin; }
};
IndexRange index_range(const PriceSeries& series, std::int64_t t_begin, std::int64_t t_end);

}  // namespace gridarb
