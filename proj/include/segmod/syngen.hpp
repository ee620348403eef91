#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segmod/fields.hpp"
#include "segmod/user_store.hpp"

namespace segmod {

// One planted namespace: two class-conditional multinomials over a vocabulary
// of vocab_size tokens, differing on the first n_discriminative of them.
// Planted tokens carry probability mass (1+gap)/Z in the positive class and
// (1-gap)/Z in the negative class.
struct NamespaceSpec {
  Field field = Field::page_content;
  int vocab_size = 100;
  int tokens_per_visit = 10;
  int n_discriminative = 10;
  double gap = 0.8;  // [0, 1)
};

struct GeneratorConfig {
  int n_users = 1000;
  int visits_min = 5;
  int visits_max = 30;
  double positive_prior = 0.5;
  // single predicate on gender (=), age (in [lo,hi]) or income (>=);
  // demographics are drawn consistent with the drawn class label
  std::string segment_predicate = "gender = female";
  std::vector<NamespaceSpec> namespaces;
  double registration_coverage = 1.0;
  std::uint64_t seed = 1;

  static GeneratorConfig defaults();
};

struct SyntheticCorpus {
  std::string log_jsonl;
  std::string pages_jsonl;
  std::string registrations_jsonl;
  std::string labels_csv;  // "user_id,label" rows, +1 / -1
  std::string geo_csv;     // empty unless a country namespace is planted
  std::vector<std::pair<std::string, int>> labels;
};

// Fully seeded; emits exactly the ingest formats. Throws InvalidConfig.
SyntheticCorpus generate(const GeneratorConfig& cfg);

// logs.jsonl, pages.jsonl, registrations.jsonl, labels.csv, geotable.csv and
// a ready-to-run segmod.conf under dir.
void write_corpus(const SyntheticCorpus& corpus, const std::string& dir);

std::vector<std::pair<std::string, int>> load_labels(const std::string& path);

// The generative model's own posterior-odds scorer; the reference ceiling for
// anything learned from the corpus.
class BayesOracle {
 public:
  explicit BayesOracle(const GeneratorConfig& cfg);

  // Log posterior odds of the positive class given extracted (namespace,
  // token) occurrences. Tokens in unplanted namespaces are class-independent
  // and contribute nothing; a token inside a planted namespace but outside
  // its vocabulary throws UnknownToken.
  double score_tokens(const std::vector<std::pair<Field, std::string>>& tokens) const;
  double score_user(const UserRecord& user) const;

  double log_prior_odds() const { return log_prior_odds_; }
  const std::vector<std::string>& planted_tokens(Field f) const;

  // The generator's own AUC (all-pairs count, half credit for ties).
  static double pairwise_auc(const std::vector<std::pair<double, int>>& scored);
  double auc_on(const UserStore& store, const std::vector<std::pair<std::string, int>>& labels) const;

 private:
  double log_prior_odds_ = 0;
  struct NsModel {
    std::unordered_map<std::string, std::pair<double, double>> log_probs;  // token -> (log p+, log p-)
    std::vector<std::string> planted;
  };
  std::map<Field, NsModel> models_;
};

// Token spelling shared by the generator and the oracle.
std::string synthetic_token(Field f, int index);

}  // namespace segmod
