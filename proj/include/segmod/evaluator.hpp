#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segmod/svm.hpp"
#include "segmod/types.hpp"
#include "segmod/user_store.hpp"
#include "segmod/vectorizer.hpp"

namespace segmod {

struct RankedPrediction {
  double score;
  int label;  // +1 / -1
};

using RankedPredictions = std::vector<RankedPrediction>;  // vector order = stable input order

// Break-even point: precision at rank P (P = positive count) under a
// descending stable sort by score; at that rank precision equals recall.
// Throws NoPositives.
double bep(const RankedPredictions& preds);

struct RocPoint {
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) .. (1,1), both coordinates non-decreasing
  double auc;                    // P(random positive outscores random negative), ties count 1/2
};

// Threshold sweep over distinct scores, descending. Throws SingleClass.
RocCurve roc(const RankedPredictions& preds);
double auc(const RankedPredictions& preds);

struct FoldMetrics {
  double bep;
  double auc;
  std::size_t n_pos;
  std::size_t n_neg;
};

struct EvalReport {
  double pooled_bep = 0;
  double pooled_auc = 0;
  RocCurve pooled_curve;
  std::vector<FoldMetrics> folds;
  double mean_fold_bep = 0;
  double mean_fold_auc = 0;
  int k = 0;
  std::uint64_t seed = 0;
};

// Stratified k-fold: per-class counts across folds differ by at most one,
// fold assignment seeded. Each fold is scored by a model trained on the
// others; pooled held-out scores drive the headline metrics. Throws
// TooFewExamples when either class has fewer than k members.
EvalReport cross_validate(const TrainingSet& ts, int k, const SvmConfig& cfg, std::uint64_t seed);

struct AblationSpec {
  std::string query_text;
  std::vector<FeatureSetMask> masks = {FeatureSetMask::presets().begin(), FeatureSetMask::presets().end()};
  std::vector<int> min_visits = {1};
  int k = 5;
  std::uint64_t seed = 1;
  // shared run settings
  SvmConfig svm;
  double neg_ratio = 1;
  int min_token_count = 1;
};

struct AblationCell {
  FeatureSetMask mask;
  int min_visits;
  double bep;
  double auc;
};

// One cross-validation per (mask, min_visits) cell, shared seed. Rows come
// out in (mask, min_visits) order.
std::vector<AblationCell> run_ablation(const AblationSpec& spec, const UserStore& store);

std::string report_to_json(const EvalReport& report);
std::string roc_to_csv(const RocCurve& curve);                         // "fpr,tpr" rows
std::string ablation_to_csv(const std::vector<AblationCell>& cells);   // "mask,min_visits,bep,auc" rows

}  // namespace segmod
