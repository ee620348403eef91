#include "segmod/user_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segmod/detail/strings.hpp"

namespace segmod {

using detail::to_lower;
using json = nlohmann::json;

const char* to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

std::optional<Gender> gender_from_string(const std::string& s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  return std::nullopt;
}

namespace {

void validate(const UserProfile& p) {
  if (p.user_id.empty()) throw InvalidProfile("profile with empty user_id");
  if (p.age && (*p.age < 0 || *p.age > 120)) throw InvalidProfile("age out of [0,120] for " + p.user_id);
  if (p.income && *p.income < 0) throw InvalidProfile("negative income for " + p.user_id);
}

}  // namespace

UserProfile profile_from_json(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidProfile("unparseable profile record");
  UserProfile p;
  if (!j.contains("user_id") || !j["user_id"].is_string()) throw InvalidProfile("profile missing user_id");
  p.user_id = j["user_id"].get<std::string>();
  if (j.contains("gender")) {
    const auto g = gender_from_string(j["gender"].get<std::string>());
    if (!g) throw InvalidProfile("unknown gender value for " + p.user_id);
    p.gender = g;
  }
  if (j.contains("age")) p.age = j["age"].get<int>();
  if (j.contains("income")) p.income = j["income"].get<std::int64_t>();
  if (j.contains("job_title")) p.job_title = j["job_title"].get<std::string>();
  validate(p);
  return p;
}

std::string profile_to_json(const UserProfile& p) {
  json j = json::object();
  j["user_id"] = p.user_id;
  if (p.gender) j["gender"] = to_string(*p.gender);
  if (p.age) j["age"] = *p.age;
  if (p.income) j["income"] = *p.income;
  if (p.job_title) j["job_title"] = *p.job_title;
  return j.dump();
}

Visit make_visit(AccessEvent event, const PageRecord* page, const Stoplist& stoplist, Timezone tz) {
  Visit v;
  v.page = page;
  v.tokens = extract_visit_tokens(event, page, stoplist, tz);
  v.event = std::move(event);
  return v;
}

UserId UserStore::intern(const std::string& external_id) {
  const auto it = id_of_.find(external_id);
  if (it != id_of_.end()) return it->second;
  const UserId id = static_cast<UserId>(users_.size());
  id_of_.emplace(external_id, id);
  users_.emplace_back();
  users_.back().profile.user_id = external_id;
  return id;
}

void UserStore::index_token(Field f, const std::string& token, UserId id) {
  UserSet& list = postings_[static_cast<std::size_t>(f)][token];
  const auto it = std::lower_bound(list.begin(), list.end(), id);
  if (it == list.end() || *it != id) list.insert(it, id);
}

void UserStore::unindex_token(Field f, const std::string& token, UserId id) {
  auto& by_token = postings_[static_cast<std::size_t>(f)];
  const auto map_it = by_token.find(token);
  if (map_it == by_token.end()) return;
  UserSet& list = map_it->second;
  const auto it = std::lower_bound(list.begin(), list.end(), id);
  if (it != list.end() && *it == id) list.erase(it);
  if (list.empty()) by_token.erase(map_it);
}

void UserStore::numeric_insert(Field f, double value, UserId id) {
  auto& col = numeric_[static_cast<std::size_t>(f)];
  const auto entry = std::make_pair(value, id);
  const auto it = std::lower_bound(col.begin(), col.end(), entry);
  if (it == col.end() || *it != entry) col.insert(it, entry);
}

void UserStore::numeric_erase(Field f, double value, UserId id) {
  auto& col = numeric_[static_cast<std::size_t>(f)];
  const auto entry = std::make_pair(value, id);
  const auto it = std::lower_bound(col.begin(), col.end(), entry);
  if (it != col.end() && *it == entry) col.erase(it);
}

void UserStore::add_visit(const AccessEvent& event, const PageRecord* page) {
  if (event.user_id.empty()) throw MalformedRecord("event with empty user_id");
  const UserId id = intern(event.user_id);
  Visit visit = make_visit(event, page, stoplist_, tz_);

  for (const auto& [field, token] : visit.tokens)
    if (field != Field::hour_of_day) index_token(field, token, id);
  numeric_insert(Field::hour_of_day, event.hour_of_day, id);

  auto& visits = users_[id].visits;
  const auto pos = std::upper_bound(visits.begin(), visits.end(), visit.event.timestamp,
                                    [](std::int64_t ts, const Visit& v) { return ts < v.event.timestamp; });
  visits.insert(pos, std::move(visit));
}

void UserStore::set_profile(const UserProfile& profile) {
  validate(profile);
  const UserId id = intern(profile.user_id);
  UserProfile& old = users_[id].profile;

  if (old.gender) unindex_token(Field::gender, to_string(*old.gender), id);
  if (old.job_title) unindex_token(Field::job_title, to_lower(*old.job_title), id);
  if (old.age) numeric_erase(Field::age, *old.age, id);
  if (old.income) numeric_erase(Field::income, static_cast<double>(*old.income), id);

  old = profile;

  if (old.gender) index_token(Field::gender, to_string(*old.gender), id);
  if (old.job_title) index_token(Field::job_title, to_lower(*old.job_title), id);
  if (old.age) numeric_insert(Field::age, *old.age, id);
  if (old.income) numeric_insert(Field::income, static_cast<double>(*old.income), id);
}

UserSet UserStore::postings(Field field, const std::string& token) const {
  if (is_numeric(field)) throw UnknownField(std::string("postings on numeric field ") + to_string(field));
  const auto& by_token = postings_[static_cast<std::size_t>(field)];
  const auto it = by_token.find(token);
  return it == by_token.end() ? UserSet{} : it->second;
}

UserSet UserStore::postings(const std::string& field, const std::string& token) const {
  const auto f = field_from_string(field);
  if (!f) throw UnknownField("unknown field: " + field);
  return postings(*f, token);
}

UserSet UserStore::range(Field field, double lo, double hi) const {
  if (!is_numeric(field)) throw UnknownField(std::string("range on categorical field ") + to_string(field));
  const auto it = numeric_.find(static_cast<std::size_t>(field));
  if (it == numeric_.end()) return {};
  const auto& col = it->second;
  const auto first = std::lower_bound(col.begin(), col.end(), std::make_pair(lo, UserId{0}));
  auto last = first;
  while (last != col.end() && last->first <= hi) ++last;
  UserSet out;
  out.reserve(static_cast<std::size_t>(last - first));
  for (auto p = first; p != last; ++p) out.push_back(p->second);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

UserSet UserStore::range(const std::string& field, double lo, double hi) const {
  const auto f = field_from_string(field);
  if (!f) throw UnknownField("unknown field: " + field);
  return range(*f, lo, hi);
}

std::optional<UserId> UserStore::find_user(const std::string& external_id) const {
  const auto it = id_of_.find(external_id);
  if (it == id_of_.end()) return std::nullopt;
  return it->second;
}

UserSet UserStore::all_users() const {
  UserSet out(users_.size());
  for (UserId i = 0; i < users_.size(); ++i) out[i] = i;
  return out;
}

void StoreBundle::add_event(const AccessEvent& event) {
  users->add_visit(event, pages->get_page(canonical_url(event.url)));
}

std::string event_to_json(const AccessEvent& ev) {
  json j = json::object();
  j["user_id"] = ev.user_id;
  j["ts"] = ev.timestamp;
  j["url"] = ev.url;
  if (ev.referrer) {
    json r = json::object();
    r["url"] = ev.referrer->referring_url;
    r["domain"] = ev.referrer->referring_domain;
    if (!ev.referrer->search_terms.empty()) r["terms"] = ev.referrer->search_terms;
    j["referrer"] = r;
  }
  if (ev.geo) j["geo"] = {{"country", ev.geo->country}, {"state", ev.geo->state}, {"city", ev.geo->city}};
  if (!ev.device.user_agent_raw.empty()) {
    j["device"] = {{"ua", ev.device.user_agent_raw},
                   {"browser", ev.device.browser},
                   {"os", ev.device.os},
                   {"class", to_string(ev.device.device_class)}};
  }
  j["dow"] = to_string(ev.day_of_week);
  j["hour"] = ev.hour_of_day;
  return j.dump();
}

AccessEvent event_from_json(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw CorruptSnapshot("unparseable event record");
  AccessEvent ev;
  try {
    ev.user_id = j.at("user_id").get<std::string>();
    ev.timestamp = j.at("ts").get<std::int64_t>();
    ev.url = j.at("url").get<std::string>();
    if (j.contains("referrer")) {
      ReferrerInfo r;
      r.referring_url = j["referrer"].at("url").get<std::string>();
      r.referring_domain = j["referrer"].at("domain").get<std::string>();
      if (j["referrer"].contains("terms")) r.search_terms = j["referrer"]["terms"].get<std::vector<std::string>>();
      ev.referrer = std::move(r);
    }
    if (j.contains("geo"))
      ev.geo = GeoInfo{j["geo"].at("country").get<std::string>(), j["geo"].at("state").get<std::string>(),
                       j["geo"].at("city").get<std::string>()};
    if (j.contains("device")) {
      ev.device.user_agent_raw = j["device"].at("ua").get<std::string>();
      ev.device.browser = j["device"].at("browser").get<std::string>();
      ev.device.os = j["device"].at("os").get<std::string>();
      const auto cls = device_class_from_string(j["device"].at("class").get<std::string>());
      ev.device.device_class = cls.value_or(DeviceClass::unknown);
    }
    const auto dow = day_of_week_from_string(j.at("dow").get<std::string>());
    if (!dow) throw CorruptSnapshot("bad day_of_week in event record");
    ev.day_of_week = *dow;
    ev.hour_of_day = j.at("hour").get<int>();
  } catch (const json::exception& e) {
    throw CorruptSnapshot(std::string("bad event record: ") + e.what());
  }
  return ev;
}

namespace {

constexpr const char* kSnapshotMagic = "SEGMODSNAP";
constexpr int kSnapshotVersion = 1;

std::string snapshot_payload(const ContentStore& pages, const UserStore& users) {
  std::ostringstream out;
  out << "tz " << users.timezone().offset_seconds << '\n';

  const auto sorted = pages.sorted_pages();
  out << "pages " << sorted.size() << '\n';
  for (const PageRecord* p : sorted) out << page_to_json(*p) << '\n';

  out << "users " << users.user_count() << '\n';
  for (UserId id = 0; id < users.user_count(); ++id) {
    const UserRecord& rec = users.user(id);
    out << profile_to_json(rec.profile) << '\n';
    out << "visits " << rec.visits.size() << '\n';
    for (const Visit& v : rec.visits) out << event_to_json(v.event) << '\n';
  }

  std::unordered_set<std::string> stopwords(users.stoplist().begin(), users.stoplist().end());
  std::vector<std::string> sorted_stops(stopwords.begin(), stopwords.end());
  std::sort(sorted_stops.begin(), sorted_stops.end());
  out << "stoplist " << sorted_stops.size() << '\n';
  for (const auto& w : sorted_stops) out << w << '\n';
  return out.str();
}

}  // namespace

void save_snapshot(const std::string& path, const ContentStore& pages, const UserStore& users) {
  const std::string payload = snapshot_payload(pages, users);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write snapshot: " + path);
  out << kSnapshotMagic << ' ' << kSnapshotVersion << ' ' << payload.size() << ' '
      << detail::hex64(detail::fnv1a64(payload)) << '\n'
      << payload;
}

StoreBundle load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptSnapshot("cannot open snapshot: " + path);

  std::string header;
  if (!std::getline(in, header)) throw CorruptSnapshot("empty snapshot file");
  std::istringstream hs(header);
  std::string magic, checksum;
  int version = 0;
  std::size_t payload_size = 0;
  if (!(hs >> magic >> version >> payload_size >> checksum) || magic != kSnapshotMagic)
    throw CorruptSnapshot("bad snapshot header");
  if (version != kSnapshotVersion)
    throw CorruptSnapshot("unsupported snapshot version " + std::to_string(version));

  std::string payload(payload_size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_size));
  if (static_cast<std::size_t>(in.gcount()) != payload_size || detail::hex64(detail::fnv1a64(payload)) != checksum)
    throw CorruptSnapshot("snapshot checksum mismatch");

  std::istringstream body(payload);
  std::string keyword, line;
  std::int64_t tz_offset = 0;
  std::size_t count = 0;

  const auto expect = [&](const char* kw) {
    if (!(body >> keyword >> count) || keyword != kw) throw CorruptSnapshot(std::string("missing section ") + kw);
    std::getline(body, line);  // consume end of section line
  };

  if (!(body >> keyword >> tz_offset) || keyword != "tz") throw CorruptSnapshot("missing tz");
  std::getline(body, line);

  StoreBundle bundle;
  bundle.pages = std::make_unique<ContentStore>();

  expect("pages");
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(body, line)) throw CorruptSnapshot("truncated pages section");
    bundle.pages->upsert_page(page_from_json(line));
  }

  expect("users");
  const std::size_t n_users = count;
  std::vector<UserProfile> profiles;
  std::vector<AccessEvent> events;
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!std::getline(body, line)) throw CorruptSnapshot("truncated users section");
    try {
      profiles.push_back(profile_from_json(line));
    } catch (const InvalidProfile& e) {
      throw CorruptSnapshot(std::string("bad profile in snapshot: ") + e.what());
    }
    expect("visits");
    for (std::size_t v = 0; v < count; ++v) {
      if (!std::getline(body, line)) throw CorruptSnapshot("truncated visits section");
      events.push_back(event_from_json(line));
    }
  }

  expect("stoplist");
  Stoplist stops;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(body, line)) throw CorruptSnapshot("truncated stoplist section");
    stops.insert(line);
  }

  bundle.users = std::make_unique<UserStore>(std::move(stops), Timezone{static_cast<int>(tz_offset)});
  // Interning profiles first reproduces the original id order; visits rejoin
  // against the reloaded page store.
  for (const auto& p : profiles) bundle.users->set_profile(p);
  for (const auto& ev : events) bundle.add_event(ev);
  return bundle;
}

}  // namespace segmod
