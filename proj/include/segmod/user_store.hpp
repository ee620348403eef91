#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "segmod/content_store.hpp"
#include "segmod/fields.hpp"
#include "segmod/log_ingest.hpp"
#include "segmod/types.hpp"

namespace segmod {

enum class Gender { male, female };

const char* to_string(Gender g);
std::optional<Gender> gender_from_string(const std::string& s);

struct UserProfile {
  std::string user_id;
  std::optional<Gender> gender;
  std::optional<int> age;             // years, [0, 120]
  std::optional<std::int64_t> income;  // currency units per year, >= 0
  std::optional<std::string> job_title;

  bool is_registered() const { return gender || age || income || job_title; }
};

UserProfile profile_from_json(const std::string& line);  // throws InvalidProfile
std::string profile_to_json(const UserProfile& p);

struct Visit {
  AccessEvent event;
  const PageRecord* page = nullptr;  // owned by the content store
  // (namespace, token) occurrences, extracted when the visit was added.
  std::vector<std::pair<Field, std::string>> tokens;
};

Visit make_visit(AccessEvent event, const PageRecord* page, const Stoplist& stoplist, Timezone tz);

struct UserRecord {
  UserProfile profile;        // user_id always set; demographics optional
  std::vector<Visit> visits;  // timestamp ascending
};

// Per-user visit histories plus the inverted index that makes users
// searchable by demographics and visits. Postings are user-level: one entry
// per user per (field, token) regardless of visit count.
class UserStore {
 public:
  UserStore() = default;
  UserStore(Stoplist stoplist, Timezone tz) : stoplist_(std::move(stoplist)), tz_(tz) {}

  void add_visit(const AccessEvent& event, const PageRecord* page);
  void set_profile(const UserProfile& profile);  // throws InvalidProfile

  // Sorted internal ids of users carrying the token (visit fields: in at
  // least one visit). Throws UnknownField for names outside the vocabulary
  // or numeric fields.
  UserSet postings(Field field, const std::string& token) const;
  UserSet postings(const std::string& field, const std::string& token) const;

  // Users with a value in [lo, hi] on a numeric field; binary search over the
  // value column. Throws UnknownField for non-numeric fields.
  UserSet range(Field field, double lo, double hi) const;
  UserSet range(const std::string& field, double lo, double hi) const;

  std::size_t user_count() const { return users_.size(); }
  const UserRecord& user(UserId id) const { return users_[id]; }
  const std::vector<UserRecord>& users() const { return users_; }
  const std::string& external_id(UserId id) const { return users_[id].profile.user_id; }
  std::optional<UserId> find_user(const std::string& external_id) const;
  UserSet all_users() const;

  const Stoplist& stoplist() const { return stoplist_; }
  Timezone timezone() const { return tz_; }

 private:
  UserId intern(const std::string& external_id);
  void index_token(Field f, const std::string& token, UserId id);
  void unindex_token(Field f, const std::string& token, UserId id);
  void numeric_insert(Field f, double value, UserId id);
  void numeric_erase(Field f, double value, UserId id);

  Stoplist stoplist_;
  Timezone tz_;
  std::vector<UserRecord> users_;
  std::unordered_map<std::string, UserId> id_of_;
  std::array<std::map<std::string, UserSet>, kFieldCount> postings_;
  // sorted by (value, user id); hour_of_day, age, income
  std::unordered_map<std::size_t, std::vector<std::pair<double, UserId>>> numeric_;
};

// Content and user stores travel together: visits point into the page store.
// Move-only so those pointers stay valid.
struct StoreBundle {
  std::unique_ptr<ContentStore> pages;
  std::unique_ptr<UserStore> users;

  void add_event(const AccessEvent& event);  // joins against pages
};

// Single-file, versioned, checksummed container for a StoreBundle.
void save_snapshot(const std::string& path, const ContentStore& pages, const UserStore& users);
StoreBundle load_snapshot(const std::string& path);  // throws CorruptSnapshot

std::string event_to_json(const AccessEvent& event);
AccessEvent event_from_json(const std::string& line);  // throws CorruptSnapshot

}  // namespace segmod
