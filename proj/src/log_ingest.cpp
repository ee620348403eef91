#include "segmod/log_ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segmod/detail/strings.hpp"
#include "segmod/detail/timeutil.hpp"

namespace segmod {

using detail::split;
using detail::to_lower;
using detail::trim;
using json = nlohmann::json;

const char* to_string(DayOfWeek d) {
  static const char* names[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
  return names[static_cast<int>(d)];
}

const char* to_string(DeviceClass c) {
  static const char* names[] = {"desktop", "mobile", "tablet", "bot", "unknown"};
  return names[static_cast<int>(c)];
}

std::optional<DayOfWeek> day_of_week_from_string(const std::string& s) {
  for (int i = 0; i < 7; ++i)
    if (s == to_string(static_cast<DayOfWeek>(i))) return static_cast<DayOfWeek>(i);
  return std::nullopt;
}

std::optional<DeviceClass> device_class_from_string(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (s == to_string(static_cast<DeviceClass>(i))) return static_cast<DeviceClass>(i);
  return std::nullopt;
}

namespace detail {

std::optional<std::int64_t> parse_rfc3339(const std::string& text) {
  // YYYY-MM-DDThh:mm:ss[.frac](Z|[+-]hh:mm)
  if (text.size() < 20) return std::nullopt;
  const auto digits = [&](std::size_t pos, std::size_t n, int& out) {
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (i >= text.size() || text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int y, mo, d, h, mi, s;
  if (!digits(0, 4, y) || text[4] != '-' || !digits(5, 2, mo) || text[7] != '-' || !digits(8, 2, d))
    return std::nullopt;
  if ((text[10] != 'T' && text[10] != 't' && text[10] != ' ')) return std::nullopt;
  if (!digits(11, 2, h) || text[13] != ':' || !digits(14, 2, mi) || text[16] != ':' || !digits(17, 2, s))
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t frac = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      ++pos;
      ++frac;
    }
    if (frac == 0) return std::nullopt;
  }
  if (pos >= text.size()) return std::nullopt;
  int offset = 0;
  if (text[pos] == 'Z' || text[pos] == 'z') {
    if (pos + 1 != text.size()) return std::nullopt;
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '+' ? 1 : -1;
    int oh, om;
    if (!digits(pos + 1, 2, oh)) return std::nullopt;
    std::size_t mpos = pos + 3;
    if (mpos < text.size() && text[mpos] == ':') ++mpos;
    if (!digits(mpos, 2, om) || mpos + 2 != text.size()) return std::nullopt;
    if (oh > 23 || om > 59) return std::nullopt;
    offset = sign * (oh * 3600 + om * 60);
  } else {
    return std::nullopt;
  }
  const std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return days * 86400 + h * 3600 + mi * 60 + s - offset;
}

std::optional<int> parse_utc_offset_seconds(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (text == "UTC" || text == "utc" || text == "Z" || text == "z") return 0;
  if (text[0] != '+' && text[0] != '-') return std::nullopt;
  const int sign = text[0] == '+' ? 1 : -1;
  std::string rest = text.substr(1);
  rest.erase(std::remove(rest.begin(), rest.end(), ':'), rest.end());
  if (rest.size() != 4 || !std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  const int hh = (rest[0] - '0') * 10 + (rest[1] - '0');
  const int mm = (rest[2] - '0') * 10 + (rest[3] - '0');
  if (hh > 23 || mm > 59) return std::nullopt;
  return sign * (hh * 3600 + mm * 60);
}

}  // namespace detail

Timezone Timezone::parse(const std::string& spec) {
  const auto off = detail::parse_utc_offset_seconds(spec);
  if (!off) throw InvalidConfig("unrecognized timezone spec: " + spec);
  return Timezone{*off};
}

DayOfWeek day_of_week_of(std::int64_t timestamp, Timezone tz) {
  const std::int64_t local = timestamp + tz.offset_seconds;
  return static_cast<DayOfWeek>(detail::weekday_from_days(detail::floor_div(local, 86400)));
}

int hour_of_day_of(std::int64_t timestamp, Timezone tz) {
  const std::int64_t local = timestamp + tz.offset_seconds;
  return static_cast<int>(((local % 86400 + 86400) % 86400) / 3600);
}

std::string year_month_of(std::int64_t timestamp, Timezone tz) {
  const std::int64_t local = timestamp + tz.offset_seconds;
  const auto date = detail::civil_from_days(detail::floor_div(local, 86400));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", date.year, date.month);
  return buf;
}

GeoTable::GeoTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].end < entries_[i].start)
      throw InvalidConfig("geo table: range end precedes start");
    if (i > 0 && entries_[i].start <= entries_[i - 1].end)
      throw InvalidConfig("geo table: overlapping ranges");
  }
}

GeoTable GeoTable::from_csv(std::istream& in) {
  std::vector<Entry> entries;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 5) throw InvalidConfig("geo table row needs 5 columns: " + std::string(t));
    entries.push_back({parse_ipv4(std::string(trim(cols[0]))), parse_ipv4(std::string(trim(cols[1]))),
                       GeoInfo{std::string(trim(cols[2])), std::string(trim(cols[3])), std::string(trim(cols[4]))}});
  }
  return GeoTable(std::move(entries));
}

GeoTable GeoTable::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open geo table: " + path);
  return from_csv(in);
}

std::optional<GeoInfo> GeoTable::lookup(std::uint32_t ip) const {
  // last entry with start <= ip
  auto it = std::upper_bound(entries_.begin(), entries_.end(), ip,
                             [](std::uint32_t v, const Entry& e) { return v < e.start; });
  if (it == entries_.begin()) return std::nullopt;
  --it;
  if (ip <= it->end) return it->info;
  return std::nullopt;
}

std::uint32_t parse_ipv4(const std::string& ip) {
  const auto parts = split(ip, '.');
  if (parts.size() != 4) throw InvalidIp("not a dotted quad: " + ip);
  std::uint32_t out = 0;
  for (const auto& p : parts) {
    if (p.empty() || p.size() > 3 ||
        !std::all_of(p.begin(), p.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw InvalidIp("bad octet in: " + ip);
    const int v = std::atoi(p.c_str());
    if (v > 255) throw InvalidIp("octet out of range in: " + ip);
    out = (out << 8) | static_cast<std::uint32_t>(v);
  }
  return out;
}

std::optional<GeoInfo> resolve_geo(const std::string& ip, const GeoTable& table) {
  return table.lookup(parse_ipv4(ip));
}

DeviceRules DeviceRules::from_csv(std::istream& in) {
  std::vector<Rule> rules;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 4) throw InvalidConfig("device rule row needs 4 columns: " + std::string(t));
    const auto cls = device_class_from_string(std::string(trim(cols[3])));
    if (!cls) throw InvalidConfig("unknown device class: " + std::string(trim(cols[3])));
    rules.push_back({to_lower(trim(cols[0])), std::string(trim(cols[1])), std::string(trim(cols[2])), *cls});
  }
  return DeviceRules(std::move(rules));
}

DeviceRules DeviceRules::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open device rules: " + path);
  return from_csv(in);
}

DeviceInfo DeviceRules::apply(const std::string& user_agent) const {
  DeviceInfo info;
  info.user_agent_raw = user_agent;
  if (user_agent.empty()) return info;
  const std::string ua = to_lower(user_agent);
  for (const auto& r : rules_) {
    if (ua.find(r.pattern) != std::string::npos) {
      info.browser = r.browser;
      info.os = r.os;
      info.device_class = r.device_class;
      return info;
    }
  }
  return info;
}

SearchEngineRules SearchEngineRules::from_csv(std::istream& in) {
  std::vector<Rule> rules;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 2) throw InvalidConfig("search engine rule row needs 2 columns: " + std::string(t));
    rules.push_back({to_lower(trim(cols[0])), std::string(trim(cols[1]))});
  }
  return SearchEngineRules(std::move(rules));
}

SearchEngineRules SearchEngineRules::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open search engine rules: " + path);
  return from_csv(in);
}

const SearchEngineRules::Rule* SearchEngineRules::find(const std::string& reg_domain) const {
  for (const auto& r : rules_)
    if (r.domain == reg_domain) return &r;
  return nullptr;
}

std::optional<UrlParts> parse_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos || scheme_end == 0) return std::nullopt;
  UrlParts parts;
  parts.scheme = to_lower(url.substr(0, scheme_end));
  std::size_t host_start = scheme_end + 3;
  std::size_t host_end = url.find_first_of("/?#", host_start);
  if (host_end == std::string::npos) host_end = url.size();
  std::string host = url.substr(host_start, host_end - host_start);
  const std::size_t at = host.rfind('@');
  if (at != std::string::npos) host = host.substr(at + 1);
  const std::size_t colon = host.find(':');
  if (colon != std::string::npos) host = host.substr(0, colon);
  if (host.empty()) return std::nullopt;
  parts.host = to_lower(host);
  std::size_t pos = host_end;
  if (pos < url.size() && url[pos] == '/') {
    std::size_t path_end = url.find_first_of("?#", pos);
    if (path_end == std::string::npos) path_end = url.size();
    parts.path = url.substr(pos, path_end - pos);
    pos = path_end;
  }
  if (pos < url.size() && url[pos] == '?') {
    std::size_t query_end = url.find('#', pos);
    if (query_end == std::string::npos) query_end = url.size();
    parts.query = url.substr(pos + 1, query_end - pos - 1);
  }
  return parts;
}

std::string registered_domain(const std::string& host) {
  const std::string h = to_lower(host);
  const std::size_t last = h.rfind('.');
  if (last == std::string::npos || last == 0) return h;
  const std::size_t prev = h.rfind('.', last - 1);
  if (prev == std::string::npos) return h;
  return h.substr(prev + 1);
}

std::string canonical_url(const std::string& url) {
  const auto parts = parse_url(url);
  if (!parts) return url;
  std::string out = parts->scheme + "://" + parts->host + parts->path;
  if (!parts->query.empty()) out += "?" + parts->query;
  return out;
}

namespace {

// application/x-www-form-urlencoded value decoding
std::string decode_form_value(const std::string& value) {
  std::string out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const char c = value[i];
    if (c == '+') {
      out += ' ';
    } else if (c == '%' && i + 2 < value.size() && std::isxdigit(static_cast<unsigned char>(value[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(value[i + 2]))) {
      const auto hex = [](char h) {
        if (h >= '0' && h <= '9') return h - '0';
        if (h >= 'a' && h <= 'f') return h - 'a' + 10;
        return h - 'A' + 10;
      };
      out += static_cast<char>(hex(value[i + 1]) * 16 + hex(value[i + 2]));
      i += 2;
    } else {
      out += c;
    }
  }
  return out;
}

std::optional<std::string> query_param(const std::string& query, const std::string& key) {
  for (const auto& kv : split(query, '&')) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) continue;
    if (kv.substr(0, eq) == key) return kv.substr(eq + 1);
  }
  return std::nullopt;
}

}  // namespace

ReferrerInfo parse_referrer(const std::string& url, const SearchEngineRules& engines) {
  ReferrerInfo info;
  info.referring_url = url;
  const auto parts = parse_url(url);
  if (!parts) {
    info.referring_domain = "unknown";
    return info;
  }
  info.referring_domain = registered_domain(parts->host);
  const auto* rule = engines.find(info.referring_domain);
  if (rule == nullptr) return info;
  const auto value = query_param(parts->query, rule->query_param);
  if (!value) return info;
  const std::string decoded = decode_form_value(*value);
  std::string term;
  for (char c : decoded + " ") {
    if (c == ' ' || c == '\t') {
      if (!term.empty()) info.search_terms.push_back(to_lower(term));
      term.clear();
    } else {
      term += c;
    }
  }
  return info;
}

AccessEvent parse_event(const std::string& line, const GeoTable& geo, const DeviceRules& devices,
                        const SearchEngineRules& engines, Timezone tz) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedRecord("unparseable log line");

  AccessEvent ev;
  if (!j.contains("user_id") || !j["user_id"].is_string()) throw MalformedRecord("missing user_id");
  ev.user_id = j["user_id"].get<std::string>();
  if (ev.user_id.empty()) throw MalformedRecord("empty user_id");

  if (!j.contains("ts") || !j["ts"].is_string()) throw MalformedRecord("missing ts");
  const auto ts = detail::parse_rfc3339(j["ts"].get<std::string>());
  if (!ts) throw MalformedRecord("unparseable ts: " + j["ts"].get<std::string>());
  ev.timestamp = *ts;

  if (!j.contains("url") || !j["url"].is_string()) throw MalformedRecord("missing url");
  ev.url = j["url"].get<std::string>();
  if (ev.url.empty()) throw MalformedRecord("empty url");

  if (j.contains("referrer") && j["referrer"].is_string() && !j["referrer"].get<std::string>().empty())
    ev.referrer = parse_referrer(j["referrer"].get<std::string>(), engines);

  if (j.contains("ip") && j["ip"].is_string()) {
    try {
      ev.geo = resolve_geo(j["ip"].get<std::string>(), geo);
    } catch (const InvalidIp&) {
      // lenient at the record level: a bad address enriches nothing
    }
  }

  if (j.contains("ua") && j["ua"].is_string()) ev.device = devices.apply(j["ua"].get<std::string>());

  ev.day_of_week = day_of_week_of(ev.timestamp, tz);
  ev.hour_of_day = hour_of_day_of(ev.timestamp, tz);
  return ev;
}

}  // namespace segmod
