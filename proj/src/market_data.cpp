#include "gridarb/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gridarb/errors.hpp"
#include "gridarb/timeparse.hpp"

#include <json.hpp>

namespace gridarb {

namespace {

std::string dtos(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct RawRow {
  std::int64_t ts;
  double price;
};

void split_csv_line(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::size_t begin = 0;
  while (true) {
    std::size_t pos = line.find(',', begin);
    if (pos == std::string::npos) {
      out.push_back(line.substr(begin));
      return;
    }
    out.push_back(line.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

bool parse_price(const std::string& field, double& out) {
  const char* b = field.data();
  const char* e = b + field.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  const char* stop = e;
  while (stop > b && (stop[-1] == ' ' || stop[-1] == '\t' || stop[-1] == '\r')) --stop;
  auto res = std::from_chars(b, stop, out);
  return res.ec == std::errc() && res.ptr == stop && std::isfinite(out);
}

}  // namespace

long PriceSeries::hour_index(long i) const {
  const std::int64_t hour_epoch = (timestamp(i) / 3600) * 3600;
  return static_cast<long>((hour_epoch - da_start) / 3600);
}

SeriesFragment parse_price_csv(std::istream& in, const std::string& source_name, PriceKind kind,
                               const std::string& zone, int resolution_minutes) {
  const int res = (kind == PriceKind::dayahead) ? 60 : resolution_minutes;
  if (res <= 0 || 60 % res != 0)
    throw ConfigError("resolution must be a positive divisor of 60, got " + std::to_string(res));

  std::vector<RawRow> rows;
  std::string line;
  std::vector<std::string> fields;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    split_csv_line(line, fields);
    if (fields.size() != 2 && fields.size() != 3)
      throw DataError(source_name + ": parse error at line " + std::to_string(line_no) +
                      ": expected 2 or 3 columns, got " + std::to_string(fields.size()));

    auto ts = parse_iso8601_utc(fields[0]);
    if (!ts) {
      // A single non-timestamp first row is treated as a header.
      if (rows.empty() && line_no <= 1) continue;
      throw DataError(source_name + ": parse error at line " + std::to_string(line_no) +
                      ": bad timestamp '" + fields[0] + "'");
    }
    if (fields.size() == 3 && !zone.empty()) {
      if (fields[1] != zone) continue;
    }
    double price;
    if (!parse_price(fields.back(), price))
      throw DataError(source_name + ": parse error at line " + std::to_string(line_no) +
                      ": bad price '" + fields.back() + "'");
    rows.push_back({*ts, price});
  }
  if (rows.empty()) throw DataError(source_name + ": no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawRow& a, const RawRow& b) { return a.ts < b.ts; });
  // De-duplicate; a re-published timestamp overrides the earlier value.
  std::vector<RawRow> dedup;
  dedup.reserve(rows.size());
  for (const RawRow& r : rows) {
    if (!dedup.empty() && dedup.back().ts == r.ts)
      dedup.back().price = r.price;
    else
      dedup.push_back(r);
  }

  SeriesFragment frag;
  frag.zone = zone;
  frag.resolution_minutes = res;
  frag.start = dedup.front().ts;
  const std::int64_t spacing = frag.spacing_seconds();

  frag.prices.reserve(dedup.size());
  std::int64_t expected = frag.start;
  for (const RawRow& r : dedup) {
    if ((r.ts - frag.start) % spacing != 0)
      throw DataError(source_name + ": alignment error: timestamp " + format_iso8601_utc(r.ts) +
                      " is off the " + std::to_string(res) + "-minute grid");
    while (expected < r.ts) {
      frag.prices.push_back(frag.prices.back());  // forward-fill
      ++frag.gaps_filled;
      expected += spacing;
    }
    frag.prices.push_back(r.price);
    expected += spacing;
  }

  if (frag.gaps_filled * 100 > frag.size())
    throw DataError(source_name + ": " + std::to_string(frag.gaps_filled) +
                    " gap slots exceed 1% of " + std::to_string(frag.size()) + " rows");
  return frag;
}

SeriesFragment load_price_csv(const std::string& path, PriceKind kind, const std::string& zone,
                              int resolution_minutes) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  return parse_price_csv(in, path, kind, zone, resolution_minutes);
}

void write_price_csv(const SeriesFragment& frag, std::ostream& out) {
  out << "timestamp,zone,price\n";
  for (long i = 0; i < frag.size(); ++i)
    out << format_iso8601_utc(frag.timestamp(i)) << ',' << frag.zone << ',' << dtos(frag.prices[i])
        << '\n';
}

void write_price_csv(const SeriesFragment& frag, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_price_csv(frag, out);
}

PriceSeries align_series(const SeriesFragment& rt, const SeriesFragment& da) {
  if (da.resolution_minutes != 60)
    throw DataError("day-ahead fragment must be hourly, got " +
                    std::to_string(da.resolution_minutes) + " minutes");
  if (60 % rt.resolution_minutes != 0)
    throw DataError("real-time resolution must divide 60");
  if (da.start % 3600 != 0)
    throw DataError("day-ahead timestamps must be hour-aligned");

  const std::int64_t da_end = da.start + da.size() * 3600;  // exclusive
  // Keep rt steps whose containing hour has a day-ahead value.
  long first = -1, last = -1;
  for (long i = 0; i < rt.size(); ++i) {
    const std::int64_t hour = (rt.timestamp(i) / 3600) * 3600;
    if (hour >= da.start && hour < da_end) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) throw DataError("empty overlap between real-time and day-ahead ranges");

  PriceSeries s;
  s.zone = rt.zone.empty() ? da.zone : rt.zone;
  s.resolution_minutes = rt.resolution_minutes;
  s.rt_start = rt.timestamp(first);
  s.rt_prices.assign(rt.prices.begin() + first, rt.prices.begin() + last + 1);
  s.rt_gaps_filled = rt.gaps_filled;
  s.da_gaps_filled = da.gaps_filled;

  const std::int64_t first_hour = (s.rt_start / 3600) * 3600;
  const std::int64_t last_hour = (s.timestamp(s.size() - 1) / 3600) * 3600;
  const long da_lo = static_cast<long>((first_hour - da.start) / 3600);
  const long da_hi = static_cast<long>((last_hour - da.start) / 3600);
  s.da_start = first_hour;
  s.da_hourly.assign(da.prices.begin() + da_lo, da.prices.begin() + da_hi + 1);

  s.da_expanded.resize(s.rt_prices.size());
  for (long i = 0; i < s.size(); ++i) s.da_expanded[i] = s.da_hourly[s.hour_index(i)];
  return s;
}

SeriesFragment synthesize_dayahead(const SeriesFragment& rt) {
  const int spm = 60 / rt.resolution_minutes;
  // Hourly means over complete hours of the real-time stream.
  const std::int64_t first_hour = ((rt.start + 3599) / 3600) * 3600;
  const long offset = static_cast<long>((first_hour - rt.start) / rt.spacing_seconds());
  const long hours = (rt.size() - offset) / spm;
  if (hours <= 0) throw DataError("real-time series too short to synthesize a day-ahead proxy");

  std::vector<double> hourly(hours);
  for (long h = 0; h < hours; ++h) {
    double sum = 0;
    for (int k = 0; k < spm; ++k) sum += rt.prices[offset + h * spm + k];
    hourly[h] = sum / spm;
  }

  SeriesFragment da;
  da.zone = rt.zone;
  da.resolution_minutes = 60;
  da.start = first_hour;
  da.prices.resize(hours);
  // Trailing 24-hour mean; expanding window while fewer than 24 hours exist.
  double window_sum = 0;
  for (long h = 0; h < hours; ++h) {
    if (h == 0) {
      da.prices[0] = hourly[0];
    } else {
      const long w = std::min<long>(h, 24);
      if (h <= 24) {
        window_sum += hourly[h - 1];
      } else {
        window_sum += hourly[h - 1] - hourly[h - 25];
      }
      da.prices[h] = window_sum / w;
    }
  }
  return da;
}

PriceStats price_stats(const PriceSeries& series) {
  if (series.rt_prices.empty()) throw DataError("price_stats: empty series");
  PriceStats st;
  st.count = series.size();
  st.min = st.max = series.rt_prices[0];
  double sum = 0;
  for (double p : series.rt_prices) {
    if (p < 0) ++st.negative_count;
    st.min = std::min(st.min, p);
    st.max = std::max(st.max, p);
    sum += p;
  }
  st.mean = sum / st.count;
  double ss = 0;
  for (double p : series.rt_prices) ss += (p - st.mean) * (p - st.mean);
  st.std_dev = std::sqrt(ss / st.count);
  return st;
}

void save_bundle(const PriceSeries& s, const std::string& path) {
  nlohmann::json j;
  j["schema"] = 1;
  j["zone"] = s.zone;
  j["resolution_minutes"] = s.resolution_minutes;
  j["rt_start"] = s.rt_start;
  j["rt_prices"] = s.rt_prices;
  j["da_start"] = s.da_start;
  j["da_hourly"] = s.da_hourly;
  j["da_synthesized"] = s.da_synthesized;
  j["rt_gaps_filled"] = s.rt_gaps_filled;
  j["da_gaps_filled"] = s.da_gaps_filled;
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << j.dump() << '\n';
}

PriceSeries load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad bundle: " + e.what());
  }
  PriceSeries s;
  try {
    s.zone = j.at("zone").get<std::string>();
    s.resolution_minutes = j.at("resolution_minutes").get<int>();
    s.rt_start = j.at("rt_start").get<std::int64_t>();
    s.rt_prices = j.at("rt_prices").get<std::vector<double>>();
    s.da_start = j.at("da_start").get<std::int64_t>();
    s.da_hourly = j.at("da_hourly").get<std::vector<double>>();
    s.da_synthesized = j.at("da_synthesized").get<bool>();
    s.rt_gaps_filled = j.at("rt_gaps_filled").get<long>();
    s.da_gaps_filled = j.at("da_gaps_filled").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad bundle: " + e.what());
  }
  if (s.resolution_minutes <= 0 || 60 % s.resolution_minutes != 0)
    throw DataError(path + ": bad bundle resolution");
  s.da_expanded.resize(s.rt_prices.size());
  for (long i = 0; i < s.size(); ++i) {
    const long h = s.hour_index(i);
    if (h < 0 || h >= static_cast<long>(s.da_hourly.size()))
      throw DataError(path + ": bundle day-ahead range does not cover real-time range");
    s.da_expanded[i] = s.da_hourly[h];
  }
  return s;
}

IndexRange index_range(const PriceSeries& s, std::int64_t t_begin, std::int64_t t_end) {
  if (t_end <= t_begin) throw DataError("index_range: empty time range");
  const std::int64_t spacing = s.spacing_seconds();
  const std::int64_t last = s.timestamp(s.size() - 1);
  std::int64_t b = std::max(t_begin, s.rt_start);
  // Round begin up onto the grid.
  b = s.rt_start + ((b - s.rt_start + spacing - 1) / spacing) * spacing;
  std::int64_t e = std::min(t_end, last + spacing);
  if (b >= e)
    throw DataError("time range [" + format_iso8601_utc(t_begin) + ", " +
                    format_iso8601_utc(t_end) + ") does not intersect series");
  IndexRange r;
  r.begin = static_cast<long>((b - s.rt_start) / spacing);
  r.end = static_cast<long>((e - s.rt_start + spacing - 1) / spacing);
  return r;
}

}  // namespace gridarb
