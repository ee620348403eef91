#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "segmod/evaluator.hpp"
#include "segmod/pipeline.hpp"
#include "segmod/syngen.hpp"

using namespace segmod;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig cfg = GeneratorConfig::defaults();
  cfg.n_users = 60;
  cfg.visits_min = 3;
  cfg.visits_max = 10;
  cfg.seed = 21;
  return cfg;
}

StoreBundle ingest_corpus(const SyntheticCorpus& corpus) {
  StoreBundle bundle;
  bundle.pages = std::make_unique<ContentStore>();
  bundle.users = std::make_unique<UserStore>();

  std::istringstream pages_in(corpus.pages_jsonl);
  std::string line;
  while (std::getline(pages_in, line))
    if (!line.empty()) bundle.pages->upsert_page(page_from_json(line));

  std::istringstream reg_in(corpus.registrations_jsonl);
  while (std::getline(reg_in, line))
    if (!line.empty()) bundle.users->set_profile(profile_from_json(line));

  GeoTable geo;
  if (!corpus.geo_csv.empty()) {
    std::istringstream geo_in(corpus.geo_csv);
    geo = GeoTable::from_csv(geo_in);
  }
  DeviceRules devices;
  SearchEngineRules engines;
  std::istringstream logs_in(corpus.log_jsonl);
  while (std::getline(logs_in, line))
    if (!line.empty()) bundle.add_event(parse_event(line, geo, devices, engines));
  return bundle;
}

}  // namespace

TEST_CASE("generation is byte-deterministic for a fixed seed") {
  const GeneratorConfig cfg = small_config();
  const SyntheticCorpus a = generate(cfg);
  const SyntheticCorpus b = generate(cfg);
  CHECK(a.log_jsonl == b.log_jsonl);
  CHECK(a.pages_jsonl == b.pages_jsonl);
  CHECK(a.registrations_jsonl == b.registrations_jsonl);
  CHECK(a.labels_csv == b.labels_csv);
  CHECK(a.geo_csv == b.geo_csv);

  GeneratorConfig other = cfg;
  other.seed = 22;
  CHECK(generate(other).log_jsonl != a.log_jsonl);
}

TEST_CASE("full coverage registers every user") {
  GeneratorConfig cfg = small_config();
  cfg.registration_coverage = 1.0;
  const SyntheticCorpus corpus = generate(cfg);
  CHECK(static_cast<int>(std::count(corpus.registrations_jsonl.begin(), corpus.registrations_jsonl.end(), '\n')) ==
        cfg.n_users);
  CHECK(corpus.labels.size() == static_cast<std::size_t>(cfg.n_users));

  cfg.registration_coverage = 0.0;
  CHECK(generate(cfg).registrations_jsonl.empty());
}

TEST_CASE("demographics agree with the planted predicate and labels") {
  for (const char* predicate : {"gender = female", "age in [21,30]", "income >= 100000"}) {
    GeneratorConfig cfg = small_config();
    cfg.segment_predicate = predicate;
    const SyntheticCorpus corpus = generate(cfg);
    const StoreBundle bundle = ingest_corpus(corpus);
    const UserSet segment = evaluate(parse_query(predicate), *bundle.users);
    for (const auto& [uid, label] : corpus.labels) {
      const auto id = bundle.users->find_user(uid);
      REQUIRE(id.has_value());
      CHECK(std::binary_search(segment.begin(), segment.end(), *id) == (label > 0));
    }
  }
  GeneratorConfig bad = small_config();
  bad.segment_predicate = "country = us";
  CHECK_THROWS_AS(generate(bad), InvalidConfig);
}

TEST_CASE("empirical token frequencies stay within 3 sigma of the multinomials") {
  GeneratorConfig cfg;
  cfg.n_users = 400;
  cfg.visits_min = 25;
  cfg.visits_max = 25;
  cfg.seed = 5;
  cfg.namespaces = {{Field::page_content, 20, 10, 4, 0.6}};
  const SyntheticCorpus corpus = generate(cfg);
  const StoreBundle bundle = ingest_corpus(corpus);

  std::map<int, std::map<std::string, long long>> counts;  // label -> token -> count
  std::map<int, long long> totals;
  std::map<std::string, int> label_of(corpus.labels.begin(), corpus.labels.end());
  for (const UserRecord& user : bundle.users->users()) {
    const int label = label_of.at(user.profile.user_id);
    for (const Visit& v : user.visits)
      for (const auto& [f, tok] : v.tokens)
        if (f == Field::page_content) {
          counts[label][tok] += 1;
          totals[label] += 1;
        }
  }

  const auto& spec = cfg.namespaces[0];
  for (const int label : {+1, -1}) {
    const double z = label > 0 ? spec.vocab_size + spec.n_discriminative * spec.gap
                               : spec.vocab_size - spec.n_discriminative * spec.gap;
    const double n = static_cast<double>(totals[label]);
    REQUIRE(n > 30000);  // 3-sigma bounds assume a large sample
    for (int j = 0; j < spec.vocab_size; ++j) {
      const bool planted = j < spec.n_discriminative;
      const double p = (planted ? (label > 0 ? 1.0 + spec.gap : 1.0 - spec.gap) : 1.0) / z;
      const double sigma = std::sqrt(p * (1 - p) * n);
      const double observed = static_cast<double>(counts[label][synthetic_token(Field::page_content, j)]);
      CHECK(std::abs(observed - p * n) <= 3 * sigma + 1);
    }
  }
}

TEST_CASE("oracle scores follow the likelihood-ratio identities") {
  GeneratorConfig cfg = small_config();
  cfg.positive_prior = 0.25;
  const BayesOracle oracle(cfg);

  // an empty token set carries no evidence
  CHECK(oracle.score_tokens({}) == doctest::Approx(std::log(0.25 / 0.75)));

  // in a gapless namespace every token is equally likely under both classes
  GeneratorConfig flat = cfg;
  flat.namespaces = {{Field::page_content, 40, 5, 0, 0.0}};
  const BayesOracle flat_oracle(flat);
  CHECK(flat_oracle.score_tokens({{Field::page_content, synthetic_token(Field::page_content, 3)}}) ==
        doctest::Approx(std::log(0.25 / 0.75)));

  // a non-planted token is mild evidence against the positive class: exactly
  // the normalizer ratio log(Z- / Z+)
  const auto& spec = cfg.namespaces[0];  // page_content
  const double z_ratio = std::log((spec.vocab_size - spec.n_discriminative * spec.gap) /
                                  (spec.vocab_size + spec.n_discriminative * spec.gap));
  const std::string neutral = synthetic_token(Field::page_content, 200);  // past the planted block
  CHECK(oracle.score_tokens({{Field::page_content, neutral}}) ==
        doctest::Approx(oracle.log_prior_odds() + z_ratio));

  // unplanted namespaces contribute nothing, unknown tokens are rejected
  CHECK(oracle.score_tokens({{Field::domain, "example.com"}}) == doctest::Approx(std::log(0.25 / 0.75)));
  CHECK_THROWS_AS(oracle.score_tokens({{Field::page_content, "never-generated"}}), UnknownToken);

  const std::string planted = synthetic_token(Field::page_content, 0);
  CHECK(oracle.score_tokens({{Field::page_content, planted}}) > oracle.log_prior_odds());
}

TEST_CASE("a gapless config is indistinguishable and scores auc near half") {
  GeneratorConfig cfg;
  cfg.n_users = 300;
  cfg.visits_min = 5;
  cfg.visits_max = 15;
  cfg.seed = 77;
  cfg.namespaces = {{Field::page_content, 50, 8, 0, 0.0}};  // d = 0
  const SyntheticCorpus corpus = generate(cfg);
  const StoreBundle bundle = ingest_corpus(corpus);
  const BayesOracle oracle(cfg);
  const double auc_value = oracle.auc_on(*bundle.users, corpus.labels);
  CHECK(auc_value == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("oracle auc agrees with the evaluator auc on the same scores") {
  GeneratorConfig cfg = small_config();
  const SyntheticCorpus corpus = generate(cfg);
  const StoreBundle bundle = ingest_corpus(corpus);
  const BayesOracle oracle(cfg);

  RankedPredictions preds;
  std::vector<std::pair<double, int>> scored;
  for (const auto& [uid, label] : corpus.labels) {
    const double s = oracle.score_user(bundle.users->user(*bundle.users->find_user(uid)));
    preds.push_back({s, label});
    scored.emplace_back(s, label);
  }
  CHECK(std::abs(auc(preds) - BayesOracle::pairwise_auc(scored)) < 1e-9);
}

TEST_CASE("written corpora ingest through the pipeline") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "segmod_syngen_test").string();
  GeneratorConfig cfg = small_config();
  cfg.n_users = 30;
  write_corpus(generate(cfg), dir);

  PipelineConfig pipeline = PipelineConfig::from_file(dir + "/segmod.conf");
  const IngestStats stats = run_ingest(pipeline);
  CHECK(stats.users == 30);
  CHECK(stats.malformed == 0);
  CHECK(stats.profiles == 30);
  CHECK(stats.events > 0);
  CHECK(fs::exists(pipeline.snapshot_path()));

  const auto labels = load_labels(dir + "/labels.csv");
  CHECK(labels.size() == 30);
  fs::remove_all(dir);
}
