#include "segmod/content_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segmod/detail/strings.hpp"
#include "segmod/log_ingest.hpp"

namespace segmod {

using detail::to_lower;
using json = nlohmann::json;

Stoplist load_stoplist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open stoplist: " + path);
  Stoplist out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (!t.empty()) out.insert(to_lower(t));
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text, const Stoplist& stoplist) {
  std::vector<std::string> tokens;
  std::string cur;
  const auto flush = [&] {
    if (cur.size() >= 2 && stoplist.find(cur) == stoplist.end()) tokens.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur += c;
    } else if (c >= 'A' && c <= 'Z') {
      cur += static_cast<char>(c - 'A' + 'a');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Gazetteer::Gazetteer(const std::vector<std::string>& names) {
  for (const auto& name : names) {
    const auto tokens = tokenize(name);
    if (tokens.empty()) continue;
    names_.insert(detail::join(tokens, " "));
    max_len_ = std::max(max_len_, tokens.size());
  }
}

Gazetteer Gazetteer::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open gazetteer: " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (!t.empty()) names.emplace_back(t);
  }
  return Gazetteer(names);
}

bool Gazetteer::contains_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t len) const {
  std::string key;
  for (std::size_t i = begin; i < begin + len; ++i) {
    if (i > begin) key += ' ';
    key += tokens[i];
  }
  return names_.find(key) != names_.end();
}

std::vector<std::string> match_gazetteer(const std::vector<std::string>& tokens, const Gazetteer& g) {
  std::vector<std::string> matches;
  if (g.empty()) return matches;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t longest = 0;
    const std::size_t cap = std::min(g.max_len(), tokens.size() - i);
    for (std::size_t len = cap; len >= 1; --len) {
      if (g.contains_tokens(tokens, i, len)) {
        longest = len;
        break;
      }
    }
    if (longest == 0) {
      ++i;
      continue;
    }
    std::string name;
    for (std::size_t k = 0; k < longest; ++k) {
      if (k) name += ' ';
      name += tokens[i + k];
    }
    matches.push_back(std::move(name));
    i += longest;
  }
  return matches;
}

void ContentStore::upsert_page(PageRecord record) {
  if (record.url.empty()) throw InvalidRecord("page record with empty url");
  pages_[canonical_url(record.url)] = std::move(record);
}

const PageRecord* ContentStore::get_page(const std::string& url) const {
  const auto it = pages_.find(canonical_url(url));
  return it == pages_.end() ? nullptr : &it->second;
}

std::vector<const PageRecord*> ContentStore::sorted_pages() const {
  std::vector<std::pair<std::string, const PageRecord*>> keyed;
  keyed.reserve(pages_.size());
  for (const auto& [key, rec] : pages_) keyed.emplace_back(key, &rec);
  std::sort(keyed.begin(), keyed.end());
  std::vector<const PageRecord*> out;
  out.reserve(keyed.size());
  for (const auto& [key, rec] : keyed) out.push_back(rec);
  return out;
}

namespace {

json metadata_to_json(const PageMetadata& m) {
  json j = json::object();
  if (m.author) j["author"] = *m.author;
  if (m.publish_date) j["publish_date"] = *m.publish_date;
  if (!m.topics.empty()) j["topics"] = m.topics;
  if (!m.keywords.empty()) j["keywords"] = m.keywords;
  if (!m.people.empty()) j["people"] = m.people;
  if (!m.organizations.empty()) j["organizations"] = m.organizations;
  if (!m.countries.empty()) j["countries"] = m.countries;
  if (m.page_type) j["page_type"] = *m.page_type;
  return j;
}

PageMetadata metadata_from_json(const json& j) {
  PageMetadata m;
  if (j.contains("author")) m.author = j["author"].get<std::string>();
  if (j.contains("publish_date")) m.publish_date = j["publish_date"].get<std::string>();
  if (j.contains("topics")) m.topics = j["topics"].get<std::vector<std::string>>();
  if (j.contains("keywords")) m.keywords = j["keywords"].get<std::vector<std::string>>();
  if (j.contains("people")) m.people = j["people"].get<std::vector<std::string>>();
  if (j.contains("organizations")) m.organizations = j["organizations"].get<std::vector<std::string>>();
  if (j.contains("countries")) m.countries = j["countries"].get<std::vector<std::string>>();
  if (j.contains("page_type")) m.page_type = j["page_type"].get<std::string>();
  return m;
}

}  // namespace

std::string page_to_json(const PageRecord& r) {
  json j = json::object();
  j["url"] = r.url;
  if (!r.title.empty()) j["title"] = r.title;
  if (!r.meta_tags.empty()) j["meta_tags"] = r.meta_tags;
  if (!r.content_text.empty()) j["content"] = r.content_text;
  if (!r.named_entities.empty()) j["named_entities"] = r.named_entities;
  const json meta = metadata_to_json(r.metadata);
  if (!meta.empty()) j["metadata"] = meta;
  if (!r.categories.empty()) j["categories"] = r.categories;
  return j.dump();
}

PageRecord page_from_json(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidRecord("unparseable page record");
  PageRecord r;
  if (!j.contains("url") || !j["url"].is_string()) throw InvalidRecord("page record missing url");
  r.url = j["url"].get<std::string>();
  if (r.url.empty()) throw InvalidRecord("page record with empty url");
  if (j.contains("title")) r.title = j["title"].get<std::string>();
  if (j.contains("meta_tags")) r.meta_tags = j["meta_tags"].get<std::vector<std::string>>();
  if (j.contains("content")) r.content_text = j["content"].get<std::string>();
  if (j.contains("named_entities")) r.named_entities = j["named_entities"].get<std::vector<std::string>>();
  if (j.contains("metadata")) r.metadata = metadata_from_json(j["metadata"]);
  if (j.contains("categories")) r.categories = j["categories"].get<std::vector<std::string>>();
  return r;
}

void ContentStore::save_jsonl(std::ostream& out) const {
  for (const PageRecord* p : sorted_pages()) out << page_to_json(*p) << '\n';
}

ContentStore ContentStore::load_jsonl(std::istream& in) {
  ContentStore store;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    store.upsert_page(page_from_json(line));
  }
  return store;
}

ContentStore ContentStore::load_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open page corpus: " + path);
  return load_jsonl(in);
}

}  // namespace segmod
