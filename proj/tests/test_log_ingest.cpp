#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <ctime>
#include <sstream>

#include "segmod/log_ingest.hpp"
#include "segmod/rng.hpp"

using namespace segmod;

namespace {

GeoTable toy_geo() {
  return GeoTable({{parse_ipv4("10.0.0.0"), parse_ipv4("10.0.0.255"), {"US", "NY", "NYC"}}});
}

DeviceRules toy_devices() {
  std::istringstream csv(
      "Chrome Mobile,chrome,android,mobile\n"
      "chrome,chrome,windows,desktop\n"
      "googlebot,unknown,unknown,bot\n");
  return DeviceRules::from_csv(csv);
}

SearchEngineRules toy_engines() {
  std::istringstream csv(
      "google.com,q\n"
      "bing.com,q\n");
  return SearchEngineRules::from_csv(csv);
}

}  // namespace

TEST_CASE("parse_event derives the time context") {
  const std::string line =
      R"({"user_id":"u1","ts":"2024-01-01T13:05:00Z","url":"https://site.example.com/a/1"})";
  const AccessEvent ev = parse_event(line, toy_geo(), toy_devices(), toy_engines());
  CHECK(ev.user_id == "u1");
  CHECK(ev.day_of_week == DayOfWeek::mon);  // 2024-01-01 was a Monday
  CHECK(ev.hour_of_day == 13);
  CHECK(!ev.referrer.has_value());
  CHECK(!ev.geo.has_value());
  CHECK(ev.device.device_class == DeviceClass::unknown);
}

TEST_CASE("parse_event honors the configured timezone") {
  const std::string line =
      R"({"user_id":"u1","ts":"2024-01-01T23:30:00Z","url":"https://site.example.com/a/1"})";
  const AccessEvent ev =
      parse_event(line, toy_geo(), toy_devices(), toy_engines(), Timezone::parse("+02:00"));
  CHECK(ev.hour_of_day == 1);
  CHECK(ev.day_of_week == DayOfWeek::tue);
}

TEST_CASE("parse_event rejects structurally broken records") {
  const GeoTable geo = toy_geo();
  const DeviceRules dev = toy_devices();
  const SearchEngineRules eng = toy_engines();
  CHECK_THROWS_AS(parse_event("not json", geo, dev, eng), MalformedRecord);
  CHECK_THROWS_AS(parse_event(R"({"user_id":"","ts":"2024-01-01T00:00:00Z","url":"u"})", geo, dev, eng),
                  MalformedRecord);
  CHECK_THROWS_AS(parse_event(R"({"user_id":"u1","url":"u"})", geo, dev, eng), MalformedRecord);
  CHECK_THROWS_AS(parse_event(R"({"user_id":"u1","ts":"yesterday","url":"u"})", geo, dev, eng),
                  MalformedRecord);
  CHECK_THROWS_AS(parse_event(R"({"user_id":"u1","ts":"2024-01-01T00:00:00Z"})", geo, dev, eng),
                  MalformedRecord);
}

TEST_CASE("parse_event enriches geo, device and referrer when present") {
  const std::string line =
      R"({"user_id":"u1","ts":"2024-03-05T08:00:00Z","url":"https://News.Example.com/A/1",)"
      R"("ip":"10.0.0.7","ua":"Mozilla Chrome Mobile Safari","referrer":"https://www.google.com/search?q=best+pasta"})";
  const AccessEvent ev = parse_event(line, toy_geo(), toy_devices(), toy_engines());
  REQUIRE(ev.geo.has_value());
  CHECK(ev.geo->country == "US");
  CHECK(ev.device.browser == "chrome");
  CHECK(ev.device.device_class == DeviceClass::mobile);
  REQUIRE(ev.referrer.has_value());
  CHECK(ev.referrer->referring_domain == "google.com");
  CHECK(ev.referrer->search_terms == std::vector<std::string>{"best", "pasta"});
}

TEST_CASE("parse_event treats a bad ip as an absent enrichment") {
  const std::string line =
      R"({"user_id":"u1","ts":"2024-03-05T08:00:00Z","url":"https://a.example.com/","ip":"999.1.2.3"})";
  const AccessEvent ev = parse_event(line, toy_geo(), toy_devices(), toy_engines());
  CHECK(!ev.geo.has_value());
}

TEST_CASE("parse_event is deterministic") {
  const std::string line =
      R"({"user_id":"u1","ts":"2024-03-05T08:00:00Z","url":"https://a.example.com/x","ip":"10.0.0.9"})";
  const AccessEvent a = parse_event(line, toy_geo(), toy_devices(), toy_engines());
  const AccessEvent b = parse_event(line, toy_geo(), toy_devices(), toy_engines());
  CHECK(a.user_id == b.user_id);
  CHECK(a.timestamp == b.timestamp);
  CHECK(a.url == b.url);
  CHECK(a.hour_of_day == b.hour_of_day);
  CHECK(a.geo.has_value() == b.geo.has_value());
}

TEST_CASE("resolve_geo matches the examples") {
  const GeoTable table = toy_geo();
  const auto hit = resolve_geo("10.0.0.5", table);
  REQUIRE(hit.has_value());
  CHECK(hit->country == "US");
  CHECK(hit->state == "NY");
  CHECK(hit->city == "NYC");
  CHECK(!resolve_geo("11.0.0.1", table).has_value());
  CHECK_THROWS_AS(resolve_geo("not-an-ip", table), InvalidIp);
  CHECK_THROWS_AS(resolve_geo("1.2.3.4.5", table), InvalidIp);
  CHECK_THROWS_AS(resolve_geo("1.2.3.300", table), InvalidIp);
}

TEST_CASE("resolve_geo equals a linear scan on random tables") {
  Rng rng(20240101);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n_ranges = 1 + rng.below(100);
    std::vector<GeoTable::Entry> entries;
    std::uint32_t cursor = 0;
    for (std::size_t i = 0; i < n_ranges; ++i) {
      cursor += 1 + static_cast<std::uint32_t>(rng.below(5000));
      const std::uint32_t start = cursor;
      cursor += static_cast<std::uint32_t>(rng.below(4000));
      entries.push_back({start, cursor, {"c" + std::to_string(i), "s", "t"}});
    }
    const GeoTable table(entries);

    for (int q = 0; q < 200; ++q) {
      const std::uint32_t ip = static_cast<std::uint32_t>(rng.below(cursor + 10000));
      std::optional<GeoInfo> expected;
      for (const auto& e : entries)
        if (ip >= e.start && ip <= e.end) expected = e.info;
      const auto got = table.lookup(ip);
      CHECK(got.has_value() == expected.has_value());
      if (got && expected) CHECK(got->country == expected->country);
    }
  }
}

TEST_CASE("GeoTable rejects overlapping or inverted ranges") {
  CHECK_THROWS_AS(GeoTable({{10, 20, {"a", "b", "c"}}, {15, 30, {"d", "e", "f"}}}), InvalidConfig);
  CHECK_THROWS_AS(GeoTable({{20, 10, {"a", "b", "c"}}}), InvalidConfig);
}

TEST_CASE("time derivation matches the C library calendar") {
  Rng rng(7);
  const int offsets[] = {0, 3600, -5 * 3600, 5 * 3600 + 1800, -11 * 3600};
  for (int trial = 0; trial < 500; ++trial) {
    const std::int64_t ts = static_cast<std::int64_t>(rng.below(4102444800ull));  // 1970..2100
    const Timezone tz{offsets[rng.below(5)]};
    const time_t local = static_cast<time_t>(ts + tz.offset_seconds);
    std::tm tm_utc{};
    gmtime_r(&local, &tm_utc);
    const int expected_dow = (tm_utc.tm_wday + 6) % 7;  // tm_wday: 0 = Sunday
    CHECK(static_cast<int>(day_of_week_of(ts, tz)) == expected_dow);
    CHECK(hour_of_day_of(ts, tz) == tm_utc.tm_hour);
    char ym[16];
    std::snprintf(ym, sizeof ym, "%04d-%02d", tm_utc.tm_year + 1900, tm_utc.tm_mon + 1);
    CHECK(year_month_of(ts, tz) == ym);
  }
}

TEST_CASE("parse_referrer extracts engine search terms") {
  const SearchEngineRules engines = toy_engines();

  const ReferrerInfo google = parse_referrer("https://www.google.com/search?q=best+pasta", engines);
  CHECK(google.referring_domain == "google.com");
  CHECK(google.search_terms == std::vector<std::string>{"best", "pasta"});

  const ReferrerInfo plain = parse_referrer("https://example.org/page", engines);
  CHECK(plain.referring_domain == "example.org");
  CHECK(plain.search_terms.empty());

  const ReferrerInfo bing = parse_referrer("https://www.bing.com/search?q=SVM", engines);
  CHECK(bing.referring_domain == "bing.com");
  CHECK(bing.search_terms == std::vector<std::string>{"svm"});

  const ReferrerInfo junk = parse_referrer("::::", engines);
  CHECK(junk.referring_domain == "unknown");
  CHECK(junk.search_terms.empty());

  const ReferrerInfo encoded = parse_referrer("https://google.com/search?q=hello%20world+again", engines);
  CHECK(encoded.search_terms == std::vector<std::string>{"hello", "world", "again"});
}

TEST_CASE("device rules apply in order, first match wins") {
  const DeviceRules rules = toy_devices();
  const DeviceInfo mobile = rules.apply("Mozilla/5.0 Chrome Mobile Safari");
  CHECK(mobile.browser == "chrome");
  CHECK(mobile.device_class == DeviceClass::mobile);
  const DeviceInfo desktop = rules.apply("Mozilla/5.0 CHROME");
  CHECK(desktop.device_class == DeviceClass::desktop);
  const DeviceInfo unknown = rules.apply("curl/8.0");
  CHECK(unknown.browser == "unknown");
  CHECK(unknown.device_class == DeviceClass::unknown);
}

TEST_CASE("timezone parsing") {
  CHECK(Timezone::parse("UTC").offset_seconds == 0);
  CHECK(Timezone::parse("+02:00").offset_seconds == 7200);
  CHECK(Timezone::parse("-0530").offset_seconds == -(5 * 3600 + 1800));
  CHECK_THROWS_AS(Timezone::parse("Mars/Olympus"), InvalidConfig);
}
