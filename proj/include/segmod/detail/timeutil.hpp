#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace segmod::detail {

// Proleptic Gregorian day count (1970-01-01 = day 0).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), m, d};
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// 0 = Monday ... 6 = Sunday. Day 0 (1970-01-01) was a Thursday.
inline int weekday_from_days(std::int64_t days) {
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

// RFC 3339 timestamp -> unix seconds. Accepts 'Z' or a numeric offset and an
// optional fractional-second part (truncated). Returns nullopt on any
// deviation from the grammar.
std::optional<std::int64_t> parse_rfc3339(const std::string& text);

// "UTC", "Z", or fixed offsets of the form [+-]HH:MM / [+-]HHMM.
std::optional<int> parse_utc_offset_seconds(const std::string& text);

}  // namespace segmod::detail
