#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "segmod/errors.hpp"

namespace segmod {

struct PageMetadata {
  std::optional<std::string> author;
  std::optional<std::string> publish_date;  // ISO date, "YYYY-MM-DD"
  std::vector<std::string> topics;
  std::vector<std::string> keywords;
  std::vector<std::string> people;
  std::vector<std::string> organizations;
  std::vector<std::string> countries;
  std::optional<std::string> page_type;
};

// Content and semantics of one page. Any feature may be missing; absent is
// distinct from empty.
struct PageRecord {
  std::string url;
  std::string title;
  std::vector<std::string> meta_tags;
  std::string content_text;
  std::vector<std::string> named_entities;
  PageMetadata metadata;
  std::vector<std::string> categories;
};

using Stoplist = std::unordered_set<std::string>;

Stoplist load_stoplist(const std::string& path);  // one word per line

// Lowercased alphanumeric runs in document order; stopwords and tokens
// shorter than two characters are dropped.
std::vector<std::string> tokenize(const std::string& text, const Stoplist& stoplist = {});

// Case-insensitive multi-token entity names.
class Gazetteer {
 public:
  Gazetteer() = default;
  explicit Gazetteer(const std::vector<std::string>& names);
  static Gazetteer from_file(const std::string& path);  // one name per line

  bool empty() const { return names_.empty(); }
  std::size_t max_len() const { return max_len_; }
  bool contains_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t len) const;

 private:
  std::unordered_set<std::string> names_;  // tokenized, joined by single spaces
  std::size_t max_len_ = 0;
};

// Greedy left-to-right scan; at each position the longest gazetteer name
// wins and the scan resumes after it. Matches are reported once per
// occurrence, as space-joined lowercase names.
std::vector<std::string> match_gazetteer(const std::vector<std::string>& tokens, const Gazetteer& g);

class ContentStore {
 public:
  // Last write wins; keys lowercase scheme and host, nothing else. Throws
  // InvalidRecord on an empty url.
  void upsert_page(PageRecord record);
  const PageRecord* get_page(const std::string& url) const;
  std::size_t size() const { return pages_.size(); }

  // Deterministic traversal (ascending url).
  std::vector<const PageRecord*> sorted_pages() const;

  // JSON lines, one PageRecord per line.
  void save_jsonl(std::ostream& out) const;
  static ContentStore load_jsonl(std::istream& in);
  static ContentStore load_jsonl_file(const std::string& path);

 private:
  std::unordered_map<std::string, PageRecord> pages_;
};

std::string page_to_json(const PageRecord& record);
PageRecord page_from_json(const std::string& line);  // throws InvalidRecord

}  // namespace segmod
