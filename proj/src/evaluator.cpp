#include "segmod/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segmod/rng.hpp"
#include "segmod/segment_dsl.hpp"

namespace segmod {

using json = nlohmann::json;

namespace {

std::vector<std::size_t> rank_order_desc(const RankedPredictions& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

}  // namespace

double bep(const RankedPredictions& preds) {
  std::size_t n_pos = 0;
  for (const auto& p : preds) n_pos += p.label > 0;
  if (n_pos == 0) throw NoPositives("BEP needs at least one positive");
  const auto order = rank_order_desc(preds);
  std::size_t tp = 0;
  for (std::size_t r = 0; r < n_pos; ++r) tp += preds[order[r]].label > 0;
  return static_cast<double>(tp) / static_cast<double>(n_pos);
}

RocCurve roc(const RankedPredictions& preds) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& p : preds) (p.label > 0 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) throw SingleClass("ROC needs both classes");

  const auto order = rank_order_desc(preds);

  RocCurve out;
  out.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = preds[order[i]].score;
    // consume the whole tie group before emitting a point
    while (i < order.size() && preds[order[i]].score == threshold) {
      (preds[order[i]].label > 0 ? tp : fp) += 1;
      ++i;
    }
    out.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  if (out.points.back().fpr != 1.0 || out.points.back().tpr != 1.0) out.points.push_back({1.0, 1.0});

  // rank-sum AUC with average ranks over ties == pairwise with half credit
  std::vector<std::size_t> asc(order.rbegin(), order.rend());
  double pos_rank_sum = 0;
  std::size_t r = 0;
  while (r < asc.size()) {
    std::size_t group_end = r;
    const double s = preds[asc[r]].score;
    while (group_end < asc.size() && preds[asc[group_end]].score == s) ++group_end;
    const double avg_rank = (static_cast<double>(r + 1) + static_cast<double>(group_end)) / 2.0;
    for (std::size_t g = r; g < group_end; ++g)
      if (preds[asc[g]].label > 0) pos_rank_sum += avg_rank;
    r = group_end;
  }
  const double p = static_cast<double>(n_pos), q = static_cast<double>(n_neg);
  out.auc = (pos_rank_sum - p * (p + 1) / 2.0) / (p * q);
  return out;
}

double auc(const RankedPredictions& preds) { return roc(preds).auc; }

EvalReport cross_validate(const TrainingSet& ts, int k, const SvmConfig& cfg, std::uint64_t seed) {
  if (k < 2) throw InvalidConfig("cross-validation needs k >= 2");
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < ts.examples.size(); ++i)
    (ts.examples[i].label > 0 ? pos_idx : neg_idx).push_back(i);
  if (pos_idx.size() < static_cast<std::size_t>(k) || neg_idx.size() < static_cast<std::size_t>(k))
    throw TooFewExamples("each class needs at least k members for k-fold cross-validation");

  // stratified: shuffle within class, deal round-robin
  std::vector<int> fold_of(ts.examples.size());
  Rng rng(seed);
  rng.shuffle(pos_idx);
  rng.shuffle(neg_idx);
  for (std::size_t i = 0; i < pos_idx.size(); ++i) fold_of[pos_idx[i]] = static_cast<int>(i % k);
  for (std::size_t i = 0; i < neg_idx.size(); ++i) fold_of[neg_idx[i]] = static_cast<int>(i % k);

  EvalReport report;
  report.k = k;
  report.seed = seed;
  RankedPredictions pooled;
  pooled.reserve(ts.examples.size());

  for (int fold = 0; fold < k; ++fold) {
    TrainingSet fold_train;
    fold_train.dim = ts.dim;
    fold_train.provenance = ts.provenance;
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < ts.examples.size(); ++i) {
      if (fold_of[i] == fold)
        held_out.push_back(i);
      else
        fold_train.examples.push_back(ts.examples[i]);
    }
    const SvmModel model = train(fold_train, cfg);

    RankedPredictions fold_preds;
    fold_preds.reserve(held_out.size());
    for (const std::size_t i : held_out)
      fold_preds.push_back({score(model, ts.examples[i].x), ts.examples[i].label});

    FoldMetrics fm;
    fm.bep = bep(fold_preds);
    fm.auc = auc(fold_preds);
    fm.n_pos = 0;
    fm.n_neg = 0;
    for (const auto& p : fold_preds) (p.label > 0 ? fm.n_pos : fm.n_neg) += 1;
    report.folds.push_back(fm);
    pooled.insert(pooled.end(), fold_preds.begin(), fold_preds.end());
  }

  report.pooled_bep = bep(pooled);
  report.pooled_curve = roc(pooled);
  report.pooled_auc = report.pooled_curve.auc;
  for (const auto& f : report.folds) {
    report.mean_fold_bep += f.bep;
    report.mean_fold_auc += f.auc;
  }
  report.mean_fold_bep /= static_cast<double>(k);
  report.mean_fold_auc /= static_cast<double>(k);
  return report;
}

std::vector<AblationCell> run_ablation(const AblationSpec& spec, const UserStore& store) {
  if (spec.masks.empty() || spec.min_visits.empty()) throw InvalidConfig("ablation needs masks and min_visits");
  const SegmentQuery query = parse_query(spec.query_text);

  std::vector<AblationCell> cells;
  cells.reserve(spec.masks.size() * spec.min_visits.size());
  for (const FeatureSetMask mask : spec.masks) {
    const FeatureSpace space = FeatureSpace::build(store, mask, spec.min_token_count);
    for (const int mv : spec.min_visits) {
      const TrainingSet ts = assemble_training_set(query, store, space, mask, spec.neg_ratio, mv, spec.seed);
      const EvalReport report = cross_validate(ts, spec.k, spec.svm, spec.seed);
      cells.push_back({mask, mv, report.pooled_bep, report.pooled_auc});
    }
  }
  return cells;
}

std::string report_to_json(const EvalReport& report) {
  json j = json::object();
  j["k"] = report.k;
  j["seed"] = report.seed;
  j["pooled"] = {{"bep", report.pooled_bep}, {"auc", report.pooled_auc}};
  j["mean_fold"] = {{"bep", report.mean_fold_bep}, {"auc", report.mean_fold_auc}};
  json folds = json::array();
  for (const auto& f : report.folds)
    folds.push_back({{"bep", f.bep}, {"auc", f.auc}, {"n_pos", f.n_pos}, {"n_neg", f.n_neg}});
  j["folds"] = folds;
  json points = json::array();
  for (const auto& p : report.pooled_curve.points) points.push_back({p.fpr, p.tpr});
  j["roc"] = points;
  return j.dump(2);
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_scalar(p.fpr) + "," + format_scalar(p.tpr) + "\n";
  return out;
}

std::string ablation_to_csv(const std::vector<AblationCell>& cells) {
  std::string out = "mask,min_visits,bep,auc\n";
  for (const auto& c : cells)
    out += c.mask.to_string() + "," + std::to_string(c.min_visits) + "," + format_scalar(c.bep) + "," +
           format_scalar(c.auc) + "\n";
  return out;
}

}  // namespace segmod
