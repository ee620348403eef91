#include "segmod/fields.hpp"

#include <array>

#include "segmod/detail/strings.hpp"

namespace segmod {

using detail::to_lower;

namespace {

constexpr std::array<const char*, kFieldCount> kFieldNames = {
    "domain",        "sub_domain",    "page_url",      "meta_tags",
    "page_title",    "page_content",  "named_entities", "ref_search_term",
    "ref_domain",    "ref_url",       "country",       "state",
    "city",          "date",          "day_of_week",   "hour_of_day",
    "user_agent",    "author",        "publish_month", "topics",
    "keywords",      "people",        "organizations", "countries_mentioned",
    "page_type",     "category",      "gender",        "age",
    "income",        "job_title",
};

constexpr std::array<FeatureGroup, kNamespaceCount> kGroups = {
    FeatureGroup::context,   // domain
    FeatureGroup::context,   // sub_domain
    FeatureGroup::context,   // page_url
    FeatureGroup::metadata,  // meta_tags
    FeatureGroup::text,      // page_title
    FeatureGroup::text,      // page_content
    FeatureGroup::entities,  // named_entities
    FeatureGroup::context,   // ref_search_term
    FeatureGroup::context,   // ref_domain
    FeatureGroup::context,   // ref_url
    FeatureGroup::context,   // country
    FeatureGroup::context,   // state
    FeatureGroup::context,   // city
    FeatureGroup::context,   // date
    FeatureGroup::context,   // day_of_week
    FeatureGroup::context,   // hour_of_day
    FeatureGroup::context,   // user_agent
    FeatureGroup::metadata,  // author
    FeatureGroup::metadata,  // publish_month
    FeatureGroup::metadata,  // topics
    FeatureGroup::metadata,  // keywords
    FeatureGroup::metadata,  // people
    FeatureGroup::metadata,  // organizations
    FeatureGroup::metadata,  // countries_mentioned
    FeatureGroup::metadata,  // page_type
    FeatureGroup::metadata,  // category
};

}  // namespace

const char* to_string(Field f) { return kFieldNames[static_cast<std::size_t>(f)]; }

const char* to_string(FeatureGroup g) {
  static const char* names[] = {"context", "text", "entities", "metadata"};
  return names[static_cast<int>(g)];
}

std::optional<Field> field_from_string(const std::string& name) {
  const std::string lowered = to_lower(name);
  for (std::size_t i = 0; i < kFieldCount; ++i)
    if (lowered == kFieldNames[i]) return static_cast<Field>(i);
  return std::nullopt;
}

bool is_namespace(Field f) { return static_cast<std::size_t>(f) < kNamespaceCount; }

bool is_numeric(Field f) { return f == Field::hour_of_day || f == Field::age || f == Field::income; }

bool is_demographic(Field f) {
  return f == Field::gender || f == Field::age || f == Field::income || f == Field::job_title;
}

FeatureGroup group_of(Field f) { return kGroups[static_cast<std::size_t>(f)]; }

namespace {

void emit(std::vector<std::pair<Field, std::string>>& out, Field f, const std::string& token) {
  if (!token.empty()) out.emplace_back(f, to_lower(token));
}

void emit_each(std::vector<std::pair<Field, std::string>>& out, Field f, const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) emit(out, f, t);
}

}  // namespace

std::vector<std::pair<Field, std::string>> extract_visit_tokens(const AccessEvent& event,
                                                                const PageRecord* page,
                                                                const Stoplist& stoplist, Timezone tz) {
  std::vector<std::pair<Field, std::string>> out;

  const std::string canon = canonical_url(event.url);
  if (const auto parts = parse_url(canon)) {
    const std::string reg = registered_domain(parts->host);
    emit(out, Field::domain, reg);
    if (parts->host != reg) emit(out, Field::sub_domain, parts->host);
  }
  emit(out, Field::page_url, canon);

  if (event.referrer) {
    emit_each(out, Field::ref_search_term, event.referrer->search_terms);
    emit(out, Field::ref_domain, event.referrer->referring_domain);
    emit(out, Field::ref_url, event.referrer->referring_url);
  }

  if (event.geo) {
    emit(out, Field::country, event.geo->country);
    emit(out, Field::state, event.geo->state);
    emit(out, Field::city, event.geo->city);
  }

  emit(out, Field::date, year_month_of(event.timestamp, tz));
  emit(out, Field::day_of_week, to_string(event.day_of_week));
  char hour[4];
  std::snprintf(hour, sizeof hour, "h%02d", event.hour_of_day);
  out.emplace_back(Field::hour_of_day, hour);

  if (event.device.browser != "unknown") emit(out, Field::user_agent, event.device.browser);
  if (event.device.os != "unknown") emit(out, Field::user_agent, event.device.os);
  if (event.device.device_class != DeviceClass::unknown)
    emit(out, Field::user_agent, to_string(event.device.device_class));

  if (page != nullptr) {
    emit_each(out, Field::meta_tags, page->meta_tags);
    emit_each(out, Field::page_title, tokenize(page->title, stoplist));
    emit_each(out, Field::page_content, tokenize(page->content_text, stoplist));
    emit_each(out, Field::named_entities, page->named_entities);
    const auto& m = page->metadata;
    if (m.author) emit(out, Field::author, *m.author);
    if (m.publish_date && m.publish_date->size() >= 7)
      emit(out, Field::publish_month, m.publish_date->substr(0, 7));
    emit_each(out, Field::topics, m.topics);
    emit_each(out, Field::keywords, m.keywords);
    emit_each(out, Field::people, m.people);
    emit_each(out, Field::organizations, m.organizations);
    emit_each(out, Field::countries_mentioned, m.countries);
    if (m.page_type) emit(out, Field::page_type, *m.page_type);
    emit_each(out, Field::category, page->categories);
  }

  return out;
}

}  // namespace segmod
