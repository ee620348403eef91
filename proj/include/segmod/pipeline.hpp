#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segmod/content_store.hpp"
#include "segmod/evaluator.hpp"
#include "segmod/explainer.hpp"
#include "segmod/log_ingest.hpp"
#include "segmod/svm.hpp"
#include "segmod/syngen.hpp"
#include "segmod/user_store.hpp"
#include "segmod/vectorizer.hpp"

namespace segmod {

// Flat key = value config file; command-line flags override.
struct PipelineConfig {
  // inputs ("" = absent)
  std::string logs;
  std::string pages;
  std::string registrations;
  std::string geo_table;
  std::string device_rules;
  std::string engine_rules;
  std::string stoplist;
  std::string gazetteer;
  std::string workspace = "workspace";
  std::string timezone = "UTC";
  // vectorizer
  std::string mask = "all";
  int min_token_count = 1;
  // trainer
  SvmConfig svm;
  double neg_ratio = 1;
  int min_visits = 1;
  // evaluation
  int k_folds = 5;
  // one seed drives sampling, the solver and fold assignment
  std::uint64_t seed = 1;

  static PipelineConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);  // throws InvalidConfig

  std::string snapshot_path() const;
  std::string feature_space_path() const;
  FeatureSetMask mask_value() const;  // throws InvalidConfig on a bad name
};

// Rule files and derived settings loaded once per run.
struct IngestContext {
  GeoTable geo;
  DeviceRules devices;
  SearchEngineRules engines;
  Timezone tz;
  Stoplist stoplist;
  Gazetteer gazetteer;

  static IngestContext from_config(const PipelineConfig& cfg);
};

struct IngestStats {
  std::size_t pages = 0;
  std::size_t profiles = 0;
  std::size_t events = 0;
  std::size_t malformed = 0;  // skipped log lines
  std::size_t users = 0;
};

// pages + registrations + access logs -> checksummed snapshot in the workspace
IngestStats run_ingest(const PipelineConfig& cfg);

struct TrainArtifacts {
  FeatureSpace space;
  TrainingSet training_set;
  SvmModel model;
};

// snapshot -> feature space (persisted) -> sampled training set -> model
TrainArtifacts run_train(const PipelineConfig& cfg, const std::string& query_text);

EvalReport run_eval(const PipelineConfig& cfg, const std::string& query_text);

std::vector<AblationCell> run_ablation_cells(const PipelineConfig& cfg, const std::string& query_text,
                                             const std::vector<std::string>& mask_names,
                                             const std::vector<int>& min_visits_list);

// Rebuilds the positive-class centroid from the model's provenance and ranks
// the top-k contributors.
TagCloud run_explain(const PipelineConfig& cfg, const std::string& model_path, int k);

// Rolling per-user centroid scorer behind the `score` subcommand. The final
// score for a user equals batch-scoring the centroid of the same events.
class StreamScorer {
 public:
  StreamScorer(SvmModel model, FeatureSpace space, const ContentStore* pages, IngestContext ctx);

  // One raw log line in, (user_id, score of the updated centroid) out.
  // Throws MalformedRecord on bad lines; the caller may skip-and-count.
  std::pair<std::string, double> push_line(const std::string& line);
  std::pair<std::string, double> push_event(const AccessEvent& event);

  const SvmModel& model() const { return model_; }
  const FeatureSpace& space() const { return space_; }
  const IngestContext& context() const { return ctx_; }
  const ContentStore* pages() const { return pages_; }
  FeatureSetMask mask() const { return mask_; }

 private:
  struct UserState {
    std::map<VecIndex, Scalar> sum;
    std::size_t count = 0;
  };

  SvmModel model_;
  FeatureSpace space_;
  const ContentStore* pages_;
  IngestContext ctx_;
  FeatureSetMask mask_;
  std::map<std::string, UserState> states_;
};

}  // namespace segmod
