#include "segmod/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "segmod/detail/strings.hpp"
#include "segmod/segment_dsl.hpp"

namespace segmod {

namespace fs = std::filesystem;

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config: " + path);
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#' || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw InvalidConfig("config line " + std::to_string(lineno) + " is not key = value");
    cfg.set(std::string(detail::trim(t.substr(0, eq))), std::string(detail::trim(t.substr(eq + 1))));
  }
  return cfg;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto as_int = [&](int lo) {
    const long long v = std::stoll(value);
    if (v < lo) throw InvalidConfig(key + " must be >= " + std::to_string(lo));
    return static_cast<int>(v);
  };
  if (key == "logs")
    logs = value;
  else if (key == "pages")
    pages = value;
  else if (key == "registrations")
    registrations = value;
  else if (key == "geo_table")
    geo_table = value;
  else if (key == "device_rules")
    device_rules = value;
  else if (key == "engine_rules")
    engine_rules = value;
  else if (key == "stoplist")
    stoplist = value;
  else if (key == "gazetteer")
    gazetteer = value;
  else if (key == "workspace")
    workspace = value;
  else if (key == "timezone")
    timezone = value;
  else if (key == "mask")
    mask = value;
  else if (key == "min_token_count")
    min_token_count = as_int(1);
  else if (key == "lambda")
    svm.lambda = std::stod(value);
  else if (key == "epochs")
    svm.epochs = as_int(1);
  else if (key == "tolerance")
    svm.tolerance = std::stod(value);
  else if (key == "class_weight_pos")
    svm.class_weight_pos = std::stod(value);
  else if (key == "neg_ratio")
    neg_ratio = std::stod(value);
  else if (key == "min_visits")
    min_visits = as_int(1);
  else if (key == "k_folds")
    k_folds = as_int(2);
  else if (key == "seed")
    seed = std::stoull(value);
  else
    throw InvalidConfig("unknown config key: " + key);
}

std::string PipelineConfig::snapshot_path() const { return (fs::path(workspace) / "store.snap").string(); }

std::string PipelineConfig::feature_space_path() const {
  return (fs::path(workspace) / "feature_space.tsv").string();
}

FeatureSetMask PipelineConfig::mask_value() const {
  const auto m = FeatureSetMask::from_string(mask);
  if (!m) throw InvalidConfig("unknown feature mask: " + mask);
  return *m;
}

IngestContext IngestContext::from_config(const PipelineConfig& cfg) {
  IngestContext ctx;
  if (!cfg.geo_table.empty()) ctx.geo = GeoTable::from_csv_file(cfg.geo_table);
  if (!cfg.device_rules.empty()) ctx.devices = DeviceRules::from_csv_file(cfg.device_rules);
  if (!cfg.engine_rules.empty()) ctx.engines = SearchEngineRules::from_csv_file(cfg.engine_rules);
  if (!cfg.stoplist.empty()) ctx.stoplist = load_stoplist(cfg.stoplist);
  if (!cfg.gazetteer.empty()) ctx.gazetteer = Gazetteer::from_file(cfg.gazetteer);
  ctx.tz = Timezone::parse(cfg.timezone);
  return ctx;
}

IngestStats run_ingest(const PipelineConfig& cfg) {
  const IngestContext ctx = IngestContext::from_config(cfg);
  IngestStats stats;

  StoreBundle bundle;
  bundle.pages = std::make_unique<ContentStore>();
  bundle.users = std::make_unique<UserStore>(ctx.stoplist, ctx.tz);

  if (!cfg.pages.empty()) {
    std::ifstream in(cfg.pages);
    if (!in) throw InvalidConfig("cannot open page corpus: " + cfg.pages);
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      PageRecord page = page_from_json(line);
      if (!ctx.gazetteer.empty()) {
        // extend pre-annotated entities with gazetteer matches
        for (auto& match : match_gazetteer(tokenize(page.content_text, ctx.stoplist), ctx.gazetteer)) {
          const auto dup = std::find_if(page.named_entities.begin(), page.named_entities.end(),
                                        [&](const std::string& e) { return detail::to_lower(e) == match; });
          if (dup == page.named_entities.end()) page.named_entities.push_back(std::move(match));
        }
      }
      bundle.pages->upsert_page(std::move(page));
      ++stats.pages;
    }
  }

  if (!cfg.registrations.empty()) {
    std::ifstream in(cfg.registrations);
    if (!in) throw InvalidConfig("cannot open registrations: " + cfg.registrations);
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      bundle.users->set_profile(profile_from_json(line));
      ++stats.profiles;
    }
  }

  if (!cfg.logs.empty()) {
    std::ifstream in(cfg.logs);
    if (!in) throw InvalidConfig("cannot open access logs: " + cfg.logs);
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      try {
        const AccessEvent ev = parse_event(line, ctx.geo, ctx.devices, ctx.engines, ctx.tz);
        bundle.add_event(ev);
        ++stats.events;
      } catch (const MalformedRecord&) {
        ++stats.malformed;
      }
    }
  }

  stats.users = bundle.users->user_count();
  fs::create_directories(cfg.workspace);
  save_snapshot(cfg.snapshot_path(), *bundle.pages, *bundle.users);
  return stats;
}

TrainArtifacts run_train(const PipelineConfig& cfg, const std::string& query_text) {
  const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
  const SegmentQuery query = parse_query(query_text);
  const FeatureSetMask mask = cfg.mask_value();

  TrainArtifacts out{FeatureSpace::build(*bundle.users, mask, cfg.min_token_count), {}, {}};
  fs::create_directories(cfg.workspace);
  out.space.save_file(cfg.feature_space_path());

  out.training_set =
      assemble_training_set(query, *bundle.users, out.space, mask, cfg.neg_ratio, cfg.min_visits, cfg.seed);
  SvmConfig svm_cfg = cfg.svm;
  svm_cfg.seed = cfg.seed;
  out.model = train(out.training_set, svm_cfg);
  out.model.feature_space_id = out.space.id();
  return out;
}

EvalReport run_eval(const PipelineConfig& cfg, const std::string& query_text) {
  const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
  const SegmentQuery query = parse_query(query_text);
  const FeatureSetMask mask = cfg.mask_value();
  const FeatureSpace space = FeatureSpace::build(*bundle.users, mask, cfg.min_token_count);
  const TrainingSet ts =
      assemble_training_set(query, *bundle.users, space, mask, cfg.neg_ratio, cfg.min_visits, cfg.seed);
  SvmConfig svm_cfg = cfg.svm;
  svm_cfg.seed = cfg.seed;
  return cross_validate(ts, cfg.k_folds, svm_cfg, cfg.seed);
}

std::vector<AblationCell> run_ablation_cells(const PipelineConfig& cfg, const std::string& query_text,
                                             const std::vector<std::string>& mask_names,
                                             const std::vector<int>& min_visits_list) {
  const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
  AblationSpec spec;
  spec.query_text = query_text;
  if (!mask_names.empty()) {
    spec.masks.clear();
    for (const auto& name : mask_names) {
      const auto m = FeatureSetMask::from_string(name);
      if (!m) throw InvalidConfig("unknown feature mask: " + name);
      spec.masks.push_back(*m);
    }
  }
  if (!min_visits_list.empty()) spec.min_visits = min_visits_list;
  spec.k = cfg.k_folds;
  spec.seed = cfg.seed;
  spec.svm = cfg.svm;
  spec.svm.seed = cfg.seed;
  spec.neg_ratio = cfg.neg_ratio;
  spec.min_token_count = cfg.min_token_count;
  return run_ablation(spec, *bundle.users);
}

TagCloud run_explain(const PipelineConfig& cfg, const std::string& model_path, int k) {
  SvmModel model = load_model(model_path);
  const FeatureSpace space = FeatureSpace::load_file(cfg.feature_space_path());
  if (space.id() != model.feature_space_id)
    throw DimensionMismatch("feature space " + space.id() + " does not match the model's " +
                            model.feature_space_id);

  const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
  const SegmentQuery query = parse_query(model.provenance.query_text);
  const auto mask = FeatureSetMask::from_string(model.provenance.mask);
  if (!mask) throw CorruptModel("model carries an unknown mask: " + model.provenance.mask);
  const TrainingSet ts = assemble_training_set(query, *bundle.users, space, *mask, model.provenance.neg_ratio,
                                               model.provenance.min_visits, model.provenance.sample_seed);
  return tag_cloud(model, positive_centroid(ts), k, space);
}

StreamScorer::StreamScorer(SvmModel model, FeatureSpace space, const ContentStore* pages, IngestContext ctx)
    : model_(std::move(model)), space_(std::move(space)), pages_(pages), ctx_(std::move(ctx)) {
  if (space_.id() != model_.feature_space_id)
    throw DimensionMismatch("feature space " + space_.id() + " does not match the model's " +
                            model_.feature_space_id);
  const auto m = FeatureSetMask::from_string(model_.provenance.mask);
  if (!m) throw CorruptModel("model carries an unknown mask: " + model_.provenance.mask);
  mask_ = *m;
}

std::pair<std::string, double> StreamScorer::push_line(const std::string& line) {
  return push_event(parse_event(line, ctx_.geo, ctx_.devices, ctx_.engines, ctx_.tz));
}

std::pair<std::string, double> StreamScorer::push_event(const AccessEvent& event) {
  const PageRecord* page = pages_ == nullptr ? nullptr : pages_->get_page(canonical_url(event.url));
  const Visit visit = make_visit(event, page, ctx_.stoplist, ctx_.tz);
  const SparseVec v = vectorize_visit(visit, space_, mask_);

  UserState& state = states_[event.user_id];
  for (SparseVec::InnerIterator it(v); it; ++it) state.sum[it.index()] += it.value();
  state.count += 1;

  std::vector<std::pair<VecIndex, Scalar>> entries;
  entries.reserve(state.sum.size());
  const Scalar n = static_cast<Scalar>(state.count);
  for (const auto& [col, value] : state.sum) entries.emplace_back(col, value / n);
  const SparseVec centroid = l2_normalized(make_sparse(space_.dim(), std::move(entries)));
  return {event.user_id, score(model_, centroid)};
}

}  // namespace segmod
