#include "segmod/syngen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segmod/detail/strings.hpp"
#include "segmod/detail/timeutil.hpp"
#include "segmod/rng.hpp"
#include "segmod/segment_dsl.hpp"

namespace segmod {

using json = nlohmann::json;

GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig cfg;
  cfg.namespaces = {
      {Field::page_content, 300, 12, 10, 0.8},
      {Field::named_entities, 80, 3, 5, 0.6},
      {Field::topics, 40, 2, 4, 0.5},
      {Field::hour_of_day, 24, 1, 6, 0.4},
      {Field::country, 30, 1, 5, 0.5},
  };
  return cfg;
}

std::string synthetic_token(Field f, int index) {
  char buf[32];
  switch (f) {
    case Field::page_content:
      std::snprintf(buf, sizeof buf, "content%04d", index);
      break;
    case Field::page_title:
      std::snprintf(buf, sizeof buf, "title%04d", index);
      break;
    case Field::named_entities:
      std::snprintf(buf, sizeof buf, "entity%04d", index);
      break;
    case Field::topics:
      std::snprintf(buf, sizeof buf, "topic%04d", index);
      break;
    case Field::keywords:
      std::snprintf(buf, sizeof buf, "keyword%04d", index);
      break;
    case Field::meta_tags:
      std::snprintf(buf, sizeof buf, "tag%04d", index);
      break;
    case Field::category:
      std::snprintf(buf, sizeof buf, "cat%04d", index);
      break;
    case Field::hour_of_day:
      std::snprintf(buf, sizeof buf, "h%02d", index);
      break;
    case Field::country:
      std::snprintf(buf, sizeof buf, "c%03d", index);
      break;
    default:
      throw InvalidConfig(std::string("namespace not supported by the generator: ") + to_string(f));
  }
  return buf;
}

namespace {

// which predicate shape is planted
struct PlantedPredicate {
  enum class Kind { gender_eq, age_range, income_ge } kind;
  Gender gender = Gender::female;
  int age_lo = 0, age_hi = 0;
  std::int64_t income_min = 0;
};

PlantedPredicate parse_planted(const std::string& text) {
  const SegmentQuery q = parse_query(text);
  PlantedPredicate p{PlantedPredicate::Kind::gender_eq};
  if (q.kind == SegmentQuery::Kind::eq && q.field == Field::gender) {
    const auto g = gender_from_string(q.token);
    if (!g) throw InvalidConfig("planted gender predicate needs male or female");
    p.kind = PlantedPredicate::Kind::gender_eq;
    p.gender = *g;
    return p;
  }
  if (q.kind == SegmentQuery::Kind::range && q.field == Field::age) {
    p.kind = PlantedPredicate::Kind::age_range;
    p.age_lo = static_cast<int>(q.lo);
    p.age_hi = static_cast<int>(q.hi);
    if (p.age_lo < 0 || p.age_hi > 120 || p.age_lo > p.age_hi || (p.age_lo == 0 && p.age_hi == 120))
      throw InvalidConfig("planted age range must be a proper sub-range of [0,120]");
    return p;
  }
  if (q.kind == SegmentQuery::Kind::ge && q.field == Field::income) {
    p.kind = PlantedPredicate::Kind::income_ge;
    p.income_min = static_cast<std::int64_t>(q.value);
    if (p.income_min < 1) throw InvalidConfig("planted income threshold must be >= 1");
    return p;
  }
  throw InvalidConfig("generator supports a single gender=/age in/income>= predicate, got: " + text);
}

struct ClassDists {
  std::vector<double> cdf_pos;
  std::vector<double> cdf_neg;
};

ClassDists build_dists(const NamespaceSpec& ns) {
  ClassDists d;
  d.cdf_pos.reserve(ns.vocab_size);
  d.cdf_neg.reserve(ns.vocab_size);
  double acc_p = 0, acc_n = 0;
  for (int j = 0; j < ns.vocab_size; ++j) {
    acc_p += j < ns.n_discriminative ? 1.0 + ns.gap : 1.0;
    acc_n += j < ns.n_discriminative ? 1.0 - ns.gap : 1.0;
    d.cdf_pos.push_back(acc_p);
    d.cdf_neg.push_back(acc_n);
  }
  return d;
}

void validate(const GeneratorConfig& cfg) {
  if (cfg.n_users < 1) throw InvalidConfig("n_users must be >= 1");
  if (cfg.visits_min < 1 || cfg.visits_max < cfg.visits_min)
    throw InvalidConfig("visit range must satisfy 1 <= min <= max");
  if (cfg.positive_prior <= 0 || cfg.positive_prior >= 1) throw InvalidConfig("positive_prior must be in (0,1)");
  if (cfg.registration_coverage < 0 || cfg.registration_coverage > 1)
    throw InvalidConfig("registration_coverage must be in [0,1]");
  for (const auto& ns : cfg.namespaces) {
    synthetic_token(ns.field, 0);  // rejects unsupported namespaces
    if (ns.vocab_size < 1) throw InvalidConfig("vocab_size must be >= 1");
    if (ns.n_discriminative < 0 || ns.n_discriminative > ns.vocab_size)
      throw InvalidConfig("n_discriminative must be in [0, vocab_size]");
    if (ns.gap < 0 || (ns.gap >= 1 && ns.n_discriminative > 0))
      throw InvalidConfig("gap must be in [0,1)");
    if (ns.field == Field::hour_of_day && (ns.vocab_size != 24 || ns.tokens_per_visit != 1))
      throw InvalidConfig("hour_of_day namespace is fixed to vocab 24, one token per visit");
    if (ns.field == Field::country && (ns.vocab_size > 250 || ns.tokens_per_visit != 1))
      throw InvalidConfig("country namespace allows at most 250 codes, one per visit");
    if (ns.tokens_per_visit < 1) throw InvalidConfig("tokens_per_visit must be >= 1");
  }
}

constexpr std::int64_t kBaseTimestamp = 1704067200;  // 2024-01-01T00:00:00Z

std::string rfc3339_utc(std::int64_t ts) {
  const auto date = detail::civil_from_days(detail::floor_div(ts, 86400));
  const std::int64_t sod = ((ts % 86400) + 86400) % 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", date.year, date.month, date.day,
                static_cast<long long>(sod / 3600), static_cast<long long>((sod / 60) % 60),
                static_cast<long long>(sod % 60));
  return buf;
}

}  // namespace

SyntheticCorpus generate(const GeneratorConfig& cfg) {
  validate(cfg);
  const PlantedPredicate predicate = parse_planted(cfg.segment_predicate);

  std::vector<ClassDists> dists;
  dists.reserve(cfg.namespaces.size());
  const NamespaceSpec* country_ns = nullptr;
  for (const auto& ns : cfg.namespaces) {
    dists.push_back(build_dists(ns));
    if (ns.field == Field::country) country_ns = &ns;
  }

  Rng rng(cfg.seed);
  SyntheticCorpus corpus;
  std::ostringstream logs, pages, registrations, labels_csv;
  labels_csv << "user_id,label\n";

  struct VisitDraw {
    std::int64_t ts = 0;
    int country = -1;
    std::vector<std::vector<int>> page_tokens;  // parallel to cfg.namespaces
  };

  long long page_counter = 0;
  for (int u = 0; u < cfg.n_users; ++u) {
    char uid[16];
    std::snprintf(uid, sizeof uid, "u%06d", u);
    const bool positive = rng.next_double() < cfg.positive_prior;

    UserProfile profile;
    profile.user_id = uid;
    switch (predicate.kind) {
      case PlantedPredicate::Kind::gender_eq: {
        const Gender other = predicate.gender == Gender::female ? Gender::male : Gender::female;
        profile.gender = positive ? predicate.gender : other;
        profile.age = static_cast<int>(18 + rng.below(63));
        profile.income = static_cast<std::int64_t>(1000 * (10 + rng.below(191)));
        break;
      }
      case PlantedPredicate::Kind::age_range: {
        const int span = predicate.age_hi - predicate.age_lo + 1;
        if (positive) {
          profile.age = predicate.age_lo + static_cast<int>(rng.below(span));
        } else {
          int a = static_cast<int>(rng.below(121 - span));
          if (a >= predicate.age_lo) a += span;
          profile.age = a;
        }
        profile.gender = rng.below(2) ? Gender::female : Gender::male;
        profile.income = static_cast<std::int64_t>(1000 * (10 + rng.below(191)));
        break;
      }
      case PlantedPredicate::Kind::income_ge: {
        profile.income = positive ? predicate.income_min + static_cast<std::int64_t>(rng.below(100000))
                                  : static_cast<std::int64_t>(rng.below(predicate.income_min));
        profile.gender = rng.below(2) ? Gender::female : Gender::male;
        profile.age = static_cast<int>(18 + rng.below(63));
        break;
      }
    }

    const int n_visits = static_cast<int>(cfg.visits_min + rng.below(cfg.visits_max - cfg.visits_min + 1));
    std::vector<VisitDraw> visits(static_cast<std::size_t>(n_visits));
    for (auto& visit : visits) {
      const std::int64_t day = static_cast<std::int64_t>(rng.below(364));
      int hour = -1;
      visit.page_tokens.resize(cfg.namespaces.size());
      for (std::size_t s = 0; s < cfg.namespaces.size(); ++s) {
        const auto& ns = cfg.namespaces[s];
        const auto& cdf = positive ? dists[s].cdf_pos : dists[s].cdf_neg;
        for (int k = 0; k < ns.tokens_per_visit; ++k) {
          const int tok = static_cast<int>(rng.discrete_cdf(cdf));
          if (ns.field == Field::hour_of_day)
            hour = tok;
          else if (ns.field == Field::country)
            visit.country = tok;
          else
            visit.page_tokens[s].push_back(tok);
        }
      }
      if (hour < 0) hour = static_cast<int>(rng.below(24));
      visit.ts = kBaseTimestamp + day * 86400 + hour * 3600 + static_cast<std::int64_t>(rng.below(60)) * 60 +
                 static_cast<std::int64_t>(rng.below(60));
    }
    std::stable_sort(visits.begin(), visits.end(),
                     [](const VisitDraw& a, const VisitDraw& b) { return a.ts < b.ts; });

    for (const auto& visit : visits) {
      char url[64];
      std::snprintf(url, sizeof url, "https://news.example.com/a/%07lld", page_counter++);

      json page = json::object();
      page["url"] = url;
      json meta = json::object();
      for (std::size_t s = 0; s < cfg.namespaces.size(); ++s) {
        const auto& ns = cfg.namespaces[s];
        if (visit.page_tokens[s].empty()) continue;
        std::vector<std::string> names;
        names.reserve(visit.page_tokens[s].size());
        for (const int tok : visit.page_tokens[s]) names.push_back(synthetic_token(ns.field, tok));
        switch (ns.field) {
          case Field::page_content:
            page["content"] = detail::join(names, " ");
            break;
          case Field::page_title:
            page["title"] = detail::join(names, " ");
            break;
          case Field::named_entities:
            page["named_entities"] = names;
            break;
          case Field::topics:
            meta["topics"] = names;
            break;
          case Field::keywords:
            meta["keywords"] = names;
            break;
          case Field::meta_tags:
            page["meta_tags"] = names;
            break;
          case Field::category:
            page["categories"] = names;
            break;
          default:
            break;
        }
      }
      if (!meta.empty()) page["metadata"] = meta;
      pages << page.dump() << '\n';

      json log = json::object();
      log["user_id"] = uid;
      log["ts"] = rfc3339_utc(visit.ts);
      log["url"] = url;
      if (visit.country >= 0) {
        char ip[20];
        std::snprintf(ip, sizeof ip, "10.0.%d.%d", visit.country, static_cast<int>(rng.below(256)));
        log["ip"] = ip;
      }
      logs << log.dump() << '\n';
    }

    if (rng.next_double() < cfg.registration_coverage) registrations << profile_to_json(profile) << '\n';
    labels_csv << uid << ',' << (positive ? "+1" : "-1") << '\n';
    corpus.labels.emplace_back(uid, positive ? +1 : -1);
  }

  if (country_ns != nullptr) {
    std::ostringstream geo;
    for (int c = 0; c < country_ns->vocab_size; ++c) {
      char s[16], t[16];
      std::snprintf(s, sizeof s, "s%03d", c);
      std::snprintf(t, sizeof t, "t%03d", c);
      geo << "10.0." << c << ".0,10.0." << c << ".255," << synthetic_token(Field::country, c) << ',' << s << ','
          << t << '\n';
    }
    corpus.geo_csv = geo.str();
  }

  corpus.log_jsonl = logs.str();
  corpus.pages_jsonl = pages.str();
  corpus.registrations_jsonl = registrations.str();
  corpus.labels_csv = labels_csv.str();
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + name + " under " + dir);
    out << content;
  };
  write("logs.jsonl", corpus.log_jsonl);
  write("pages.jsonl", corpus.pages_jsonl);
  write("registrations.jsonl", corpus.registrations_jsonl);
  write("labels.csv", corpus.labels_csv);
  if (!corpus.geo_csv.empty()) write("geotable.csv", corpus.geo_csv);

  std::ostringstream conf;
  conf << "logs = " << (fs::path(dir) / "logs.jsonl").string() << '\n'
       << "pages = " << (fs::path(dir) / "pages.jsonl").string() << '\n'
       << "registrations = " << (fs::path(dir) / "registrations.jsonl").string() << '\n';
  if (!corpus.geo_csv.empty()) conf << "geo_table = " << (fs::path(dir) / "geotable.csv").string() << '\n';
  conf << "workspace = " << (fs::path(dir) / "workspace").string() << '\n';
  write("segmod.conf", conf.str());
}

std::vector<std::pair<std::string, int>> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open labels: " + path);
  std::vector<std::pair<std::string, int>> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (first && t == "user_id,label") {
      first = false;
      continue;
    }
    first = false;
    const auto cols = detail::split(t, ',');
    if (cols.size() != 2) throw InvalidConfig("bad labels row: " + std::string(t));
    out.emplace_back(cols[0], cols[1] == "+1" || cols[1] == "1" ? +1 : -1);
  }
  return out;
}

BayesOracle::BayesOracle(const GeneratorConfig& cfg) {
  validate(cfg);
  log_prior_odds_ = std::log(cfg.positive_prior / (1.0 - cfg.positive_prior));
  for (const auto& ns : cfg.namespaces) {
    NsModel model;
    const double z_pos = ns.vocab_size + ns.n_discriminative * ns.gap;
    const double z_neg = ns.vocab_size - ns.n_discriminative * ns.gap;
    for (int j = 0; j < ns.vocab_size; ++j) {
      const bool planted = j < ns.n_discriminative;
      const double p_pos = (planted ? 1.0 + ns.gap : 1.0) / z_pos;
      const double p_neg = (planted ? 1.0 - ns.gap : 1.0) / z_neg;
      const std::string token = synthetic_token(ns.field, j);
      model.log_probs.emplace(token, std::make_pair(std::log(p_pos), std::log(p_neg)));
      if (planted) model.planted.push_back(token);
    }
    models_.emplace(ns.field, std::move(model));
  }
}

double BayesOracle::score_tokens(const std::vector<std::pair<Field, std::string>>& tokens) const {
  double llr = 0;
  for (const auto& [field, token] : tokens) {
    const auto model = models_.find(field);
    if (model == models_.end()) continue;  // class-independent namespace
    const auto it = model->second.log_probs.find(token);
    if (it == model->second.log_probs.end())
      throw UnknownToken("token outside the generator vocabulary: " + token);
    llr += it->second.first - it->second.second;
  }
  return llr + log_prior_odds_;
}

double BayesOracle::score_user(const UserRecord& user) const {
  std::vector<std::pair<Field, std::string>> all;
  for (const Visit& v : user.visits) all.insert(all.end(), v.tokens.begin(), v.tokens.end());
  return score_tokens(all);
}

const std::vector<std::string>& BayesOracle::planted_tokens(Field f) const {
  const auto it = models_.find(f);
  if (it == models_.end()) throw UnknownToken(std::string("namespace not planted: ") + to_string(f));
  return it->second.planted;
}

double BayesOracle::pairwise_auc(const std::vector<std::pair<double, int>>& scored) {
  double wins = 0;
  std::size_t pairs = 0;
  for (const auto& [sp, lp] : scored) {
    if (lp <= 0) continue;
    for (const auto& [sn, ln] : scored) {
      if (ln > 0) continue;
      ++pairs;
      if (sp > sn)
        wins += 1;
      else if (sp == sn)
        wins += 0.5;
    }
  }
  if (pairs == 0) throw SingleClass("pairwise AUC needs both classes");
  return wins / static_cast<double>(pairs);
}

double BayesOracle::auc_on(const UserStore& store, const std::vector<std::pair<std::string, int>>& labels) const {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(labels.size());
  for (const auto& [uid, label] : labels) {
    const auto id = store.find_user(uid);
    if (!id) continue;
    scored.emplace_back(score_user(store.user(*id)), label);
  }
  return pairwise_auc(scored);
}

}  // namespace segmod
