#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "segmod/errors.hpp"

namespace segmod {

enum class DayOfWeek { mon, tue, wed, thu, fri, sat, sun };
enum class DeviceClass { desktop, mobile, tablet, bot, unknown };

const char* to_string(DayOfWeek d);
const char* to_string(DeviceClass c);
std::optional<DayOfWeek> day_of_week_from_string(const std::string& s);
std::optional<DeviceClass> device_class_from_string(const std::string& s);

struct ReferrerInfo {
  std::string referring_url;
  std::string referring_domain;           // registered domain, lowercased
  std::vector<std::string> search_terms;  // lowercased; empty unless a search engine matched
};

struct GeoInfo {
  std::string country;
  std::string state;
  std::string city;
};

struct DeviceInfo {
  std::string user_agent_raw;
  std::string browser = "unknown";
  std::string os = "unknown";
  DeviceClass device_class = DeviceClass::unknown;
};

// One enriched log interaction.
struct AccessEvent {
  std::string user_id;
  std::int64_t timestamp = 0;  // unix seconds
  std::string url;
  std::optional<ReferrerInfo> referrer;
  std::optional<GeoInfo> geo;
  DeviceInfo device;
  DayOfWeek day_of_week = DayOfWeek::mon;  // derived from timestamp under the configured timezone
  int hour_of_day = 0;
};

// Fixed-offset timezone used for all time-context derivation.
struct Timezone {
  int offset_seconds = 0;

  static Timezone utc() { return {}; }
  // Accepts "UTC", "Z", "+HH:MM", "-HHMM". Throws InvalidConfig otherwise.
  static Timezone parse(const std::string& spec);
};

DayOfWeek day_of_week_of(std::int64_t timestamp, Timezone tz);
int hour_of_day_of(std::int64_t timestamp, Timezone tz);
// "YYYY-MM" token of the local civil date.
std::string year_month_of(std::int64_t timestamp, Timezone tz);

// Sorted, non-overlapping IPv4 ranges. Stand-in for an external geo service.
class GeoTable {
 public:
  struct Entry {
    std::uint32_t start;
    std::uint32_t end;  // inclusive
    GeoInfo info;
  };

  GeoTable() = default;
  explicit GeoTable(std::vector<Entry> entries);  // sorts, rejects overlap

  // CSV rows: start_ip,end_ip,country,state,city
  static GeoTable from_csv(std::istream& in);
  static GeoTable from_csv_file(const std::string& path);

  std::optional<GeoInfo> lookup(std::uint32_t ip) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

std::uint32_t parse_ipv4(const std::string& ip);  // throws InvalidIp

// Binary search over the range table. Throws InvalidIp for unparseable input.
std::optional<GeoInfo> resolve_geo(const std::string& ip, const GeoTable& table);

// Ordered substring patterns, first match wins.
class DeviceRules {
 public:
  struct Rule {
    std::string pattern;  // matched case-insensitively
    std::string browser;
    std::string os;
    DeviceClass device_class;
  };

  DeviceRules() = default;
  explicit DeviceRules(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  // CSV rows: pattern,browser,os,device_class
  static DeviceRules from_csv(std::istream& in);
  static DeviceRules from_csv_file(const std::string& path);

  DeviceInfo apply(const std::string& user_agent) const;

 private:
  std::vector<Rule> rules_;
};

// Per-engine query parameter keys.
class SearchEngineRules {
 public:
  struct Rule {
    std::string domain;       // registered domain, lowercased
    std::string query_param;  // e.g. "q"
  };

  SearchEngineRules() = default;
  explicit SearchEngineRules(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  // CSV rows: domain,query_param
  static SearchEngineRules from_csv(std::istream& in);
  static SearchEngineRules from_csv_file(const std::string& path);

  const Rule* find(const std::string& registered_domain) const;

 private:
  std::vector<Rule> rules_;
};

struct UrlParts {
  std::string scheme;
  std::string host;  // lowercased
  std::string path;
  std::string query;
};

std::optional<UrlParts> parse_url(const std::string& url);

// Last two host labels ("www.google.com" -> "google.com"); lowercased.
std::string registered_domain(const std::string& host);

// Scheme and host lowercased, port/userinfo/fragment dropped; anything
// unparseable passes through unchanged. The page join key.
std::string canonical_url(const std::string& url);

// Unparseable URLs yield domain "unknown" and no terms.
ReferrerInfo parse_referrer(const std::string& url, const SearchEngineRules& engines);

// Parses one JSON-lines record (fields user_id, ts, url, referrer?, ip?, ua?)
// and enriches it. Throws MalformedRecord on an unparseable line or a missing
// or empty user_id/ts/url; callers may skip-and-count. An ip that fails to
// parse or falls outside the table yields an absent geo, not an error.
AccessEvent parse_event(const std::string& line, const GeoTable& geo, const DeviceRules& devices,
                        const SearchEngineRules& engines, Timezone tz = Timezone::utc());

}  // namespace segmod
