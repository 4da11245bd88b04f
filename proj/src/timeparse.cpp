#include "gridarb/timeparse.hpp"

#include <array>
#include <cstdio>

namespace gridarb {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

bool read_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
  if (pos + len > s.size()) return false;
  unsigned v = 0;
  for (std::size_t i = 0; i < len; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::optional<std::int64_t> parse_iso8601_utc(std::string_view s) {
  // Trim surrounding spaces.
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);

  unsigned yr, mo, dy, hh, mm, ss = 0;
  if (!read_uint(s, 0, 4, yr) || s.size() < 16) return std::nullopt;
  if (s[4] != '-' || !read_uint(s, 5, 2, mo)) return std::nullopt;
  if (s[7] != '-' || !read_uint(s, 8, 2, dy)) return std::nullopt;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  if (!read_uint(s, 11, 2, hh)) return std::nullopt;
  if (s[13] != ':' || !read_uint(s, 14, 2, mm)) return std::nullopt;

  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!read_uint(s, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) return std::nullopt;

  if (mo < 1 || mo > 12 || dy < 1 || dy > 31 || hh > 23 || mm > 59 || ss > 60) return std::nullopt;

  return days_from_civil(yr, mo, dy) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601_utc(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60));
  return buf;
}

std::string format_year_month(std::int64_t t) {
  std::int64_t days = t / 86400;
  if (t % 86400 < 0) --days;
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04lld-%02u", static_cast<long long>(y), m);
  return buf;
}

}  // namespace gridarb
