#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace gridarb {

// UTC timestamps as seconds since the Unix epoch. Accepted input forms:
//   2019-06-01T13:05:00Z   2019-06-01 13:05:00   2019-06-01T13:05
// Seconds are optional, a trailing 'Z' is optional, 'T' or ' ' separates
// date and time. Anything else is rejected.
std::optional<std::int64_t> parse_iso8601_utc(std::string_view s);

// Canonical form: YYYY-MM-DDTHH:MM:SSZ
std::string format_iso8601_utc(std::int64_t epoch_seconds);

// Year-month key "YYYY-MM" for monthly aggregation.
std::string format_year_month(std::int64_t epoch_seconds);

}  // namespace gridarb
