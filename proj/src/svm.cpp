#include "segmod/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "segmod/rng.hpp"

namespace segmod {

using json = nlohmann::json;

std::size_t TrainingSet::count_label(int label) const {
  std::size_t n = 0;
  for (const auto& e : examples) n += e.label == label;
  return n;
}

TrainingSet assemble_training_set(const SegmentQuery& query, const UserStore& store, const FeatureSpace& space,
                                  FeatureSetMask mask, double neg_ratio, int min_visits, std::uint64_t seed) {
  if (neg_ratio <= 0) throw InvalidConfig("neg_ratio must be positive");
  if (min_visits < 1) throw InvalidConfig("min_visits must be >= 1");

  const UserSet segment = evaluate(query, store);
  const auto eligible = [&](UserId id) {
    return store.user(id).visits.size() >= static_cast<std::size_t>(min_visits);
  };

  UserSet positives;
  for (UserId id : segment)
    if (eligible(id)) positives.push_back(id);
  if (positives.empty()) throw EmptySegment("segment is empty after the min_visits filter");

  UserSet candidates;
  for (UserId id : set_difference(store.all_users(), segment))
    if (eligible(id)) candidates.push_back(id);
  if (candidates.empty()) throw NoNegativesAvailable("no non-segment users pass the min_visits filter");

  const std::size_t want =
      std::min(static_cast<std::size_t>(std::ceil(neg_ratio * static_cast<double>(positives.size()))),
               candidates.size());
  Rng rng(seed);
  // partial Fisher-Yates: the first `want` slots end up a uniform sample
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  UserSet negatives(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(want));
  std::sort(negatives.begin(), negatives.end());

  TrainingSet ts;
  ts.dim = space.dim();
  ts.provenance = {describe(query), seed, neg_ratio, min_visits, mask.to_string()};
  ts.examples.reserve(positives.size() + negatives.size());
  for (UserId id : positives)
    ts.examples.push_back({store.external_id(id), vectorize_user(store.user(id), space, mask), +1});
  for (UserId id : negatives)
    ts.examples.push_back({store.external_id(id), vectorize_user(store.user(id), space, mask), -1});
  return ts;
}

namespace {

double hinge_sum(const std::vector<double>& scores, const TrainingSet& ts, double b, double cw_pos) {
  double sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& e = ts.examples[i];
    const double margin = e.label * (scores[i] + b);
    if (margin < 1) sum += (e.label > 0 ? cw_pos : 1.0) * (1 - margin);
  }
  return sum;
}

// Exact minimizer of sum_i c_i max(0, 1 - y_i (s_i + b)) over b: the slope of
// this piecewise-linear convex function starts at -sum(c_+) and gains c_i at
// breakpoint y_i - s_i... for positives at b = 1 - s_i, for negatives at
// b = -1 - s_i; the first kink with nonnegative slope is a minimizer.
double refit_bias(const std::vector<double>& scores, const TrainingSet& ts, double cw_pos, double fallback) {
  std::vector<std::pair<double, double>> kinks;  // (breakpoint, weight)
  double slope = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& e = ts.examples[i];
    const double c = e.label > 0 ? cw_pos : 1.0;
    if (c == 0) continue;
    if (e.label > 0) {
      slope -= c;
      kinks.emplace_back(1 - scores[i], c);
    } else {
      kinks.emplace_back(-1 - scores[i], c);
    }
  }
  if (kinks.empty()) return fallback;
  std::sort(kinks.begin(), kinks.end());
  for (const auto& [bp, c] : kinks) {
    slope += c;
    if (slope >= 0) return bp;
  }
  return fallback;
}

}  // namespace

namespace {

// Dual coordinate descent (max-violating-pair SMO) polish. The unregularized
// bias induces the equality constraint sum(y_i alpha_i) = 0, so updates move
// pairs. Worth its O(n * nnz) per-iteration price only at desk scale, where
// the subgradient phase alone cannot reach grid-level objective precision.
constexpr std::size_t kPolishMaxExamples = 256;

std::pair<DenseVec, double> dual_polish(const TrainingSet& ts, const SvmConfig& cfg, double fallback_b) {
  const std::size_t n = ts.examples.size();
  const double scale = 1.0 / (cfg.lambda * static_cast<double>(n));
  std::vector<double> box(n), alpha(n, 0.0), f(n, 0.0), sq(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = ts.examples[i];
    y[i] = e.label;
    box[i] = (e.label > 0 ? cfg.class_weight_pos : 1.0) * scale;
    sq[i] = e.x.squaredNorm();
  }

  DenseVec w = DenseVec::Zero(ts.dim);
  const std::size_t max_iters = std::max<std::size_t>(20000, 2000 * n);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_up = -1, i_low = -1;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = y[k] - f[k];
      const bool can_up = y[k] > 0 ? alpha[k] < box[k] : alpha[k] > 0;
      const bool can_low = y[k] > 0 ? alpha[k] > 0 : alpha[k] < box[k];
      if (can_up && v > up_best) {
        up_best = v;
        i_up = static_cast<std::ptrdiff_t>(k);
      }
      if (can_low && v < low_best) {
        low_best = v;
        i_low = static_cast<std::ptrdiff_t>(k);
      }
    }
    if (i_up < 0 || i_low < 0 || up_best - low_best < 1e-10) break;

    const std::size_t i = static_cast<std::size_t>(i_up), j = static_cast<std::size_t>(i_low);
    const SparseVec& xi = ts.examples[i].x;
    const SparseVec& xj = ts.examples[j].x;
    const double curvature = sq[i] + sq[j] - 2.0 * xi.dot(xj);
    double t = curvature > 1e-300 ? (up_best - low_best) / curvature
                                  : std::numeric_limits<double>::infinity();
    const double cap_i = y[i] > 0 ? box[i] - alpha[i] : alpha[i];
    const double cap_j = y[j] > 0 ? alpha[j] : box[j] - alpha[j];
    t = std::min(t, std::min(cap_i, cap_j));
    if (!(t > 0)) break;

    alpha[i] = std::clamp(alpha[i] + y[i] * t, 0.0, box[i]);
    alpha[j] = std::clamp(alpha[j] - y[j] * t, 0.0, box[j]);
    for (SparseVec::InnerIterator it(xi); it; ++it) w[it.index()] += t * it.value();
    for (SparseVec::InnerIterator it(xj); it; ++it) w[it.index()] -= t * it.value();
    for (std::size_t k = 0; k < n; ++k) f[k] += t * (xi.dot(ts.examples[k].x) - xj.dot(ts.examples[k].x));
  }

  return {w, refit_bias(f, ts, cfg.class_weight_pos, fallback_b)};
}

}  // namespace

double svm_objective(const DenseVec& w, double b, const TrainingSet& ts, const SvmConfig& cfg) {
  double loss = 0;
  for (const auto& e : ts.examples) {
    const double margin = e.label * (e.x.dot(w) + b);
    if (margin < 1) loss += (e.label > 0 ? cfg.class_weight_pos : 1.0) * (1 - margin);
  }
  return 0.5 * cfg.lambda * w.squaredNorm() + loss / static_cast<double>(ts.examples.size());
}

SvmModel train(const TrainingSet& ts, const SvmConfig& cfg) {
  if (cfg.lambda <= 0) throw InvalidConfig("lambda must be positive");
  if (cfg.epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (cfg.tolerance < 0) throw InvalidConfig("tolerance must be >= 0");
  if (cfg.class_weight_pos < 0) throw InvalidConfig("class_weight_pos must be >= 0");
  const std::size_t n = ts.examples.size();
  const std::size_t n_pos = ts.count_label(+1);
  if (n_pos == 0 || n_pos == n) throw SingleClass("training set needs both classes");

  const VecIndex dim = ts.dim;
  for (const auto& e : ts.examples)
    if (e.x.size() != dim) throw DimensionMismatch("training example dimension differs from the set's");
  std::vector<double> x_sqnorm(n);
  double mean_weight = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x_sqnorm[i] = ts.examples[i].x.squaredNorm();
    mean_weight += ts.examples[i].label > 0 ? cfg.class_weight_pos : 1.0;
  }
  mean_weight /= static_cast<double>(n);
  // J(0, b*) <= mean_weight, so the optimum lives in this ball
  const double radius = std::sqrt(2.0 * std::max(mean_weight, 1e-12) / cfg.lambda);

  // w = scale * v, so shrinkage is O(1) and updates O(nnz)
  DenseVec v = DenseVec::Zero(dim);
  double scale = 1.0;
  double v_sqnorm = 0;
  double b = 0;

  DenseVec best_w = DenseVec::Zero(dim);
  double best_b = refit_bias(std::vector<double>(n, 0.0), ts, cfg.class_weight_pos, 0.0);
  double best_obj = svm_objective(best_w, best_b, ts, cfg);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  std::vector<double> scores(n);
  DenseVec w_epoch(dim);
  DenseVec w_running_sum = DenseVec::Zero(dim);
  std::uint64_t t = 0;
  // warmup keeps early steps near 1.0 instead of 1/lambda
  const double t0 = 1.0 / cfg.lambda;

  const auto consider = [&](const DenseVec& w_cand, double& b_inout) {
    for (std::size_t i = 0; i < n; ++i) scores[i] = ts.examples[i].x.dot(w_cand);
    const double b_cand = refit_bias(scores, ts, cfg.class_weight_pos, b_inout);
    const double obj = 0.5 * cfg.lambda * w_cand.squaredNorm() +
                       hinge_sum(scores, ts, b_cand, cfg.class_weight_pos) / static_cast<double>(n);
    if (!std::isfinite(obj)) throw NonFiniteObjective("objective diverged during training");
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w_cand;
      best_b = b_cand;
    }
    b_inout = b_cand;
    return obj;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (const std::size_t i : order) {
      ++t;
      const auto& e = ts.examples[i];
      const double eta = 1.0 / (cfg.lambda * (static_cast<double>(t) + t0));
      scale *= 1.0 - eta * cfg.lambda;  // = (t + t0 - 1)/(t + t0), never zero
      const double dot_vx = e.x.dot(v);
      const double margin = e.label * (scale * dot_vx + b);
      if (margin < 1) {
        const double c = e.label > 0 ? cfg.class_weight_pos : 1.0;
        const double alpha = eta * c * e.label / scale;
        for (SparseVec::InnerIterator it(e.x); it; ++it) v[it.index()] += alpha * it.value();
        v_sqnorm += 2 * alpha * dot_vx + alpha * alpha * x_sqnorm[i];
      }
      // project back onto the ball that provably contains the optimum
      const double w_norm = scale * std::sqrt(std::max(v_sqnorm, 0.0));
      if (w_norm > radius) scale *= radius / w_norm;
    }

    w_epoch = scale * v;
    // reset the factored representation so `scale` cannot underflow
    v = w_epoch;
    scale = 1.0;
    v_sqnorm = w_epoch.squaredNorm();

    const double before = best_obj;
    const double obj = consider(w_epoch, b);
    (void)obj;

    // averaged iterate smooths subgradient oscillation, a second candidate
    w_running_sum += w_epoch;
    double b_avg = b;
    consider(w_running_sum / static_cast<double>(epoch + 1), b_avg);

    const double improvement = before - best_obj;
    // tolerance 0 disables the early stop
    if (cfg.tolerance > 0 && epoch > 0 && improvement < cfg.tolerance) break;
  }

  if (n <= kPolishMaxExamples) {
    const auto [pw, pb] = dual_polish(ts, cfg, best_b);
    const double pj = svm_objective(pw, pb, ts, cfg);
    if (std::isfinite(pj) && pj < best_obj) {
      best_obj = pj;
      best_w = pw;
      best_b = pb;
    }
  }

  SvmModel model;
  model.w = std::move(best_w);
  model.b = best_b;
  model.config = cfg;
  model.provenance = ts.provenance;
  model.objective = best_obj;
  model.n_pos = n_pos;
  model.n_neg = n - n_pos;
  return model;
}

double score(const SvmModel& m, const SparseVec& x) {
  if (x.size() != m.w.size())
    throw DimensionMismatch("vector of dimension " + std::to_string(x.size()) + " scored against model of dimension " +
                            std::to_string(m.w.size()));
  return x.dot(m.w) + m.b;
}

int classify(const SvmModel& m, const SparseVec& x) { return score(m, x) > 0 ? +1 : -1; }

namespace {
constexpr int kModelVersion = 1;
}

void save_model(const SvmModel& m, const std::string& path) {
  json j = json::object();
  j["format"] = "segmod-svm";
  j["version"] = kModelVersion;
  j["feature_space_id"] = m.feature_space_id;
  j["dim"] = m.w.size();
  SparseVec sw = m.w.sparseView();
  j["w"] = to_wire(sw);
  j["b"] = m.b;
  j["config"] = {{"lambda", m.config.lambda},
                 {"epochs", m.config.epochs},
                 {"seed", m.config.seed},
                 {"tolerance", m.config.tolerance},
                 {"class_weight_pos", m.config.class_weight_pos}};
  j["provenance"] = {{"query", m.provenance.query_text},
                     {"sample_seed", m.provenance.sample_seed},
                     {"neg_ratio", m.provenance.neg_ratio},
                     {"min_visits", m.provenance.min_visits},
                     {"mask", m.provenance.mask}};
  j["meta"] = {{"objective", m.objective}, {"n_pos", m.n_pos}, {"n_neg", m.n_neg}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model: " + path);
  out << j.dump(2) << '\n';
}

SvmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptModel("cannot open model: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "segmod-svm")
    throw CorruptModel("not a segmod-svm model file: " + path);
  if (j.value("version", -1) != kModelVersion)
    throw VersionMismatch("unsupported model version in " + path);
  SvmModel m;
  try {
    m.feature_space_id = j.at("feature_space_id").get<std::string>();
    const auto dim = j.at("dim").get<VecIndex>();
    m.w = DenseVec(sparse_from_wire(dim, j.at("w").get<std::string>()));
    m.b = j.at("b").get<double>();
    const auto& c = j.at("config");
    m.config.lambda = c.at("lambda").get<double>();
    m.config.epochs = c.at("epochs").get<int>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.tolerance = c.at("tolerance").get<double>();
    m.config.class_weight_pos = c.at("class_weight_pos").get<double>();
    const auto& p = j.at("provenance");
    m.provenance.query_text = p.at("query").get<std::string>();
    m.provenance.sample_seed = p.at("sample_seed").get<std::uint64_t>();
    m.provenance.neg_ratio = p.at("neg_ratio").get<double>();
    m.provenance.min_visits = p.at("min_visits").get<int>();
    m.provenance.mask = p.at("mask").get<std::string>();
    const auto& meta = j.at("meta");
    m.objective = meta.at("objective").get<double>();
    m.n_pos = meta.at("n_pos").get<std::size_t>();
    m.n_neg = meta.at("n_neg").get<std::size_t>();
  } catch (const json::exception& e) {
    throw CorruptModel(std::string("bad model file: ") + e.what());
  }
  return m;
}

SparseVec positive_centroid(const TrainingSet& ts) {
  std::vector<SparseVec> pos;
  for (const auto& e : ts.examples)
    if (e.label > 0) pos.push_back(e.x);
  if (pos.empty()) throw SingleClass("training set has no positive examples");
  return user_centroid(pos);
}

}  // namespace segmod
