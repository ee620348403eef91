#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segmod/segment_dsl.hpp"
#include "segmod/types.hpp"
#include "segmod/user_store.hpp"
#include "segmod/vectorizer.hpp"

namespace segmod {

struct SvmConfig {
  double lambda = 1e-2;         // L2 regularization, > 0
  int epochs = 50;              // max passes over the training set
  std::uint64_t seed = 0;       // example-order shuffling
  double tolerance = 1e-6;      // stop when one epoch improves the objective less than this; 0 = run all epochs
  double class_weight_pos = 1;  // multiplier on positive-class hinge terms
};

struct TrainingExample {
  std::string user_id;
  SparseVec x;
  int label;  // +1 / -1
};

struct TrainingProvenance {
  std::string query_text;
  std::uint64_t sample_seed = 0;
  double neg_ratio = 1;
  int min_visits = 1;
  std::string mask = "all";
};

struct TrainingSet {
  std::vector<TrainingExample> examples;
  TrainingProvenance provenance;
  VecIndex dim = 0;

  std::size_t count_label(int label) const;
};

struct SvmModel {
  DenseVec w;
  double b = 0;
  std::string feature_space_id;
  SvmConfig config;
  TrainingProvenance provenance;
  // training metadata
  double objective = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Positives are every segment user with at least min_visits visits; negatives
// a seeded uniform sample (without replacement) of the remaining eligible
// users, ceil(neg_ratio * |pos|) of them when available. Vectors are user
// centroids under the mask. Throws EmptySegment / NoNegativesAvailable.
TrainingSet assemble_training_set(const SegmentQuery& query, const UserStore& store, const FeatureSpace& space,
                                  FeatureSetMask mask, double neg_ratio, int min_visits, std::uint64_t seed);

// Soft-margin linear SVM on
//   J(w,b) = lambda/2 |w|^2 + 1/n sum_i c_i max(0, 1 - y_i (w.x_i + b)),
// c_i = class_weight_pos on positives. Deterministic given the config seed.
// Throws SingleClass / NonFiniteObjective.
SvmModel train(const TrainingSet& ts, const SvmConfig& cfg);

// The training objective at (w, b); shared by the trainer and its tests.
double svm_objective(const DenseVec& w, double b, const TrainingSet& ts, const SvmConfig& cfg);

double score(const SvmModel& m, const SparseVec& x);  // w.x + b; throws DimensionMismatch
int classify(const SvmModel& m, const SparseVec& x);  // sign(score), ties -> -1

// Versioned JSON model file; round trip reproduces scores bit-identically.
void save_model(const SvmModel& m, const std::string& path);
SvmModel load_model(const std::string& path);  // throws CorruptModel / VersionMismatch

// Normalized mean of the positive examples; the explainer's reference point.
SparseVec positive_centroid(const TrainingSet& ts);

}  // namespace segmod
