#pragma once

// Shared fixtures: deterministic random stores and the brute-force oracles
// the module tests compare against. Everything here stays independent of the
// index/vectorizer code paths it is used to check.

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "segmod/content_store.hpp"
#include "segmod/detail/strings.hpp"
#include "segmod/log_ingest.hpp"
#include "segmod/rng.hpp"
#include "segmod/segment_dsl.hpp"
#include "segmod/user_store.hpp"

namespace segmod::testing {

inline AccessEvent make_event(const std::string& user_id, std::int64_t ts, const std::string& url,
                              Timezone tz = Timezone::utc()) {
  AccessEvent ev;
  ev.user_id = user_id;
  ev.timestamp = ts;
  ev.url = url;
  ev.day_of_week = day_of_week_of(ts, tz);
  ev.hour_of_day = hour_of_day_of(ts, tz);
  return ev;
}

struct RandomStoreOptions {
  int n_users = 40;
  int max_visits = 6;
  int n_pages = 25;
  double profile_coverage = 0.7;
  double page_hit_rate = 0.8;  // chance a visit lands on a known page
};

// Small synthetic bundle with mixed-coverage profiles, pages and context.
inline StoreBundle random_store(Rng& rng, const RandomStoreOptions& opts = {}) {
  static const std::vector<std::string> kTopics = {"style", "sports", "politics", "travel"};
  static const std::vector<std::string> kWords = {"cat",  "dog",  "svm",   "news",  "vote",
                                                  "goal", "silk", "plane", "stock", "rain"};
  static const std::vector<std::string> kCountries = {"us", "de", "jp"};
  static const std::vector<std::string> kJobs = {"editor", "engineer", "teacher"};

  StoreBundle bundle;
  bundle.pages = std::make_unique<ContentStore>();
  bundle.users = std::make_unique<UserStore>(Stoplist{}, Timezone::utc());

  for (int p = 0; p < opts.n_pages; ++p) {
    PageRecord page;
    page.url = "https://site.example.com/p/" + std::to_string(p);
    page.title = kWords[rng.below(kWords.size())] + " " + kWords[rng.below(kWords.size())];
    page.content_text = kWords[rng.below(kWords.size())] + " " + kWords[rng.below(kWords.size())] + " " +
                        kWords[rng.below(kWords.size())];
    if (rng.below(2)) page.named_entities = {"acme corp"};
    if (rng.below(2)) page.metadata.topics = {kTopics[rng.below(kTopics.size())]};
    if (rng.below(3) == 0) page.categories = {kTopics[rng.below(kTopics.size())]};
    bundle.pages->upsert_page(page);
  }

  for (int u = 0; u < opts.n_users; ++u) {
    const std::string uid = "user" + std::to_string(u);
    if (rng.next_double() < opts.profile_coverage) {
      UserProfile profile;
      profile.user_id = uid;
      if (rng.below(2)) profile.gender = rng.below(2) ? Gender::female : Gender::male;
      if (rng.below(2)) profile.age = static_cast<int>(18 + rng.below(60));
      if (rng.below(2)) profile.income = static_cast<std::int64_t>(1000 * (10 + rng.below(150)));
      if (rng.below(3) == 0) profile.job_title = kJobs[rng.below(kJobs.size())];
      bundle.users->set_profile(profile);
    }
    const int n_visits = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_visits)));
    for (int v = 0; v < n_visits; ++v) {
      const bool known_page = rng.next_double() < opts.page_hit_rate;
      const std::string url = known_page
                                  ? "https://site.example.com/p/" + std::to_string(rng.below(opts.n_pages))
                                  : "https://other.example.org/x/" + std::to_string(rng.below(50));
      AccessEvent ev =
          make_event(uid, 1704067200 + static_cast<std::int64_t>(rng.below(90ull * 86400)), url);
      if (rng.below(2)) {
        GeoInfo geo;
        geo.country = kCountries[rng.below(kCountries.size())];
        geo.state = "st" + std::to_string(rng.below(4));
        geo.city = "ct" + std::to_string(rng.below(6));
        ev.geo = geo;
      }
      if (rng.below(3) == 0) {
        ReferrerInfo ref;
        ref.referring_url = "https://www.google.com/search?q=" + kWords[rng.below(kWords.size())];
        ref.referring_domain = "google.com";
        ref.search_terms = {kWords[rng.below(kWords.size())]};
        ev.referrer = ref;
      }
      bundle.add_event(ev);
    }
  }
  return bundle;
}

// Reference semantics for one user, straight off the UserRecord.
inline bool user_matches(const SegmentQuery& q, const UserRecord& user) {
  switch (q.kind) {
    case SegmentQuery::Kind::eq: {
      if (q.field == Field::gender)
        return user.profile.gender && std::string(to_string(*user.profile.gender)) == q.token;
      if (q.field == Field::job_title) {
        if (!user.profile.job_title) return false;
        return detail::to_lower(*user.profile.job_title) == q.token;
      }
      for (const Visit& v : user.visits)
        for (const auto& [f, tok] : v.tokens)
          if (f == q.field && tok == q.token) return true;
      return false;
    }
    case SegmentQuery::Kind::ge:
    case SegmentQuery::Kind::le:
    case SegmentQuery::Kind::range: {
      double lo = q.kind == SegmentQuery::Kind::ge ? q.value
                  : q.kind == SegmentQuery::Kind::range ? q.lo
                                                        : -std::numeric_limits<double>::infinity();
      double hi = q.kind == SegmentQuery::Kind::le ? q.value
                  : q.kind == SegmentQuery::Kind::range ? q.hi
                                                        : std::numeric_limits<double>::infinity();
      if (q.field == Field::age)
        return user.profile.age && *user.profile.age >= lo && *user.profile.age <= hi;
      if (q.field == Field::income)
        return user.profile.income && static_cast<double>(*user.profile.income) >= lo &&
               static_cast<double>(*user.profile.income) <= hi;
      for (const Visit& v : user.visits)
        if (v.event.hour_of_day >= lo && v.event.hour_of_day <= hi) return true;
      return false;
    }
    case SegmentQuery::Kind::not_:
      return !user_matches(q.children.front(), user);
    case SegmentQuery::Kind::and_: {
      for (const auto& c : q.children)
        if (!user_matches(c, user)) return false;
      return true;
    }
    case SegmentQuery::Kind::or_: {
      for (const auto& c : q.children)
        if (user_matches(c, user)) return true;
      return false;
    }
  }
  return false;
}

inline UserSet filter_users(const SegmentQuery& q, const UserStore& store) {
  UserSet out;
  for (UserId id = 0; id < store.user_count(); ++id)
    if (user_matches(q, store.user(id))) out.push_back(id);
  return out;
}

// Random predicate ASTs over fields present in the random stores.
inline SegmentQuery random_query(Rng& rng, int depth) {
  if (depth <= 0 || rng.below(3) == 0) {
    switch (rng.below(7)) {
      case 0:
        return SegmentQuery::eq(Field::gender, rng.below(2) ? "female" : "male");
      case 1:
        return SegmentQuery::range(Field::age, 20 + static_cast<double>(rng.below(20)),
                                   40 + static_cast<double>(rng.below(40)));
      case 2:
        return SegmentQuery::ge(Field::income, 1000.0 * static_cast<double>(10 + rng.below(100)));
      case 3: {
        static const char* topics[] = {"style", "sports", "politics", "travel"};
        return SegmentQuery::eq(rng.below(2) ? Field::topics : Field::category, topics[rng.below(4)]);
      }
      case 4: {
        static const char* words[] = {"cat", "dog", "svm", "news", "vote", "goal"};
        return SegmentQuery::eq(Field::page_content, words[rng.below(6)]);
      }
      case 5:
        return SegmentQuery::range(Field::hour_of_day, static_cast<double>(rng.below(12)),
                                   static_cast<double>(12 + rng.below(12)));
      default:
        return SegmentQuery::eq(Field::country, rng.below(2) ? "us" : "de");
    }
  }
  switch (rng.below(3)) {
    case 0:
      return SegmentQuery::negate(random_query(rng, depth - 1));
    case 1:
      return SegmentQuery::all_of({random_query(rng, depth - 1), random_query(rng, depth - 1)});
    default:
      return SegmentQuery::any_of({random_query(rng, depth - 1), random_query(rng, depth - 1)});
  }
}

}  // namespace segmod::testing
