#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segmod/content_store.hpp"
#include "segmod/log_ingest.hpp"

namespace segmod {

// The queryable field vocabulary. The leading block (through `category`) are
// the visit-level feature namespaces, in canonical feature-space order; the
// trailing four are registration fields, queryable but never features.
enum class Field : std::uint8_t {
  domain,
  sub_domain,
  page_url,
  meta_tags,
  page_title,
  page_content,
  named_entities,
  ref_search_term,
  ref_domain,
  ref_url,
  country,
  state,
  city,
  date,
  day_of_week,
  hour_of_day,
  user_agent,
  author,
  publish_month,
  topics,
  keywords,
  people,
  organizations,
  countries_mentioned,
  page_type,
  category,
  gender,
  age,
  income,
  job_title,
};

constexpr std::size_t kNamespaceCount = 26;
constexpr std::size_t kFieldCount = 30;

enum class FeatureGroup : std::uint8_t { context, text, entities, metadata };

const char* to_string(Field f);
const char* to_string(FeatureGroup g);
std::optional<Field> field_from_string(const std::string& name);  // case-insensitive

// Visit-level feature namespace (everything except the registration fields).
bool is_namespace(Field f);
// Supports range queries: hour_of_day, age, income.
bool is_numeric(Field f);
bool is_demographic(Field f);
FeatureGroup group_of(Field f);  // namespaces only

// Every (namespace, token) occurrence of one visit, in a fixed order with
// multiplicity. All tokens are lowercased here; hour becomes "h00".."h23" and
// the visit date a "YYYY-MM" token. Absent inputs contribute nothing.
std::vector<std::pair<Field, std::string>> extract_visit_tokens(const AccessEvent& event,
                                                                const PageRecord* page,
                                                                const Stoplist& stoplist, Timezone tz);

}  // namespace segmod
