#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "segmod/pipeline.hpp"
#include "segmod/segment_dsl.hpp"
#include "segmod/service.hpp"

namespace {

using namespace segmod;
using json = nlohmann::json;

// exit code namespace: 0 ok, 2 usage/config, 3 data, 4 modeling, 5 io
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;
constexpr int kExitIo = 5;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidConfig*>(&e) || dynamic_cast<const UnknownField*>(&e) ||
      dynamic_cast<const SyntaxError*>(&e) || dynamic_cast<const TypeMismatch*>(&e))
    return kExitConfig;
  if (dynamic_cast<const MalformedRecord*>(&e) || dynamic_cast<const InvalidRecord*>(&e) ||
      dynamic_cast<const InvalidProfile*>(&e) || dynamic_cast<const InvalidIp*>(&e) ||
      dynamic_cast<const CorruptSnapshot*>(&e) || dynamic_cast<const CorruptModel*>(&e) ||
      dynamic_cast<const VersionMismatch*>(&e) || dynamic_cast<const UnknownToken*>(&e))
    return kExitData;
  if (dynamic_cast<const Error*>(&e)) return kExitModel;
  return kExitIo;
}

void print_error(const std::exception& e) {
  json j = {{"error", typeid(e).name()}, {"message", e.what()}};
  std::cerr << j.dump() << '\n';
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

std::string read_query_arg(const std::string& query, const std::string& query_file) {
  if (!query.empty()) return query;
  if (!query_file.empty()) {
    std::ifstream in(query_file);
    if (!in) throw InvalidConfig("cannot open query file: " + query_file);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  throw InvalidConfig("a segment query is required (--query or --query-file)");
}

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mask;
  std::optional<int> min_visits;
  std::optional<double> neg_ratio;
  std::optional<int> k_folds;
  std::optional<int> min_token_count;

  PipelineConfig load() const {
    PipelineConfig cfg =
        config_path.empty() ? PipelineConfig{} : PipelineConfig::from_file(config_path);
    if (seed) cfg.seed = *seed;
    if (mask) cfg.mask = *mask;
    if (min_visits) cfg.min_visits = *min_visits;
    if (neg_ratio) cfg.neg_ratio = *neg_ratio;
    if (k_folds) cfg.k_folds = *k_folds;
    if (min_token_count) cfg.min_token_count = *min_token_count;
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "pipeline config file (key = value lines)");
  if (needs_config) c->required();
  cmd->add_option("--seed", opts.seed, "seed for sampling, the solver and fold assignment");
  cmd->add_option("--mask", opts.mask, "feature set: context|text|entities|metadata|all_content|all");
  cmd->add_option("--min-visits", opts.min_visits, "minimum visit count per training user");
  cmd->add_option("--neg-ratio", opts.neg_ratio, "negatives sampled per positive");
  cmd->add_option("--k-folds", opts.k_folds, "cross-validation folds");
  cmd->add_option("--min-token-count", opts.min_token_count, "dictionary visit-frequency cutoff");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segmod: user segment modeling from access logs, page content and registrations"};
  app.require_subcommand(1);

  // ingest
  CommonOpts ingest_opts;
  auto* cmd_ingest = app.add_subcommand("ingest", "parse inputs and build the store snapshot");
  add_common(cmd_ingest, ingest_opts);

  // query
  CommonOpts query_opts;
  std::string query_text, query_file;
  std::size_t sample_size = 10;
  auto* cmd_query = app.add_subcommand("query", "evaluate a segment query against the snapshot");
  add_common(cmd_query, query_opts);
  cmd_query->add_option("--query", query_text, "segment query text");
  cmd_query->add_option("--query-file", query_file, "file with the segment query");
  cmd_query->add_option("--sample", sample_size, "user ids to print");

  // train
  CommonOpts train_opts;
  std::string train_query, train_query_file, model_out = "model.json";
  auto* cmd_train = app.add_subcommand("train", "assemble a training set and fit the segment model");
  add_common(cmd_train, train_opts);
  cmd_train->add_option("--query", train_query, "segment query text");
  cmd_train->add_option("--query-file", train_query_file, "file with the segment query");
  cmd_train->add_option("--out", model_out, "model file path");

  // eval
  CommonOpts eval_opts;
  std::string eval_query, eval_query_file, report_out = "report.json", roc_out;
  auto* cmd_eval = app.add_subcommand("eval", "cross-validated BEP/ROC report for a segment");
  add_common(cmd_eval, eval_opts);
  cmd_eval->add_option("--query", eval_query, "segment query text");
  cmd_eval->add_option("--query-file", eval_query_file, "file with the segment query");
  cmd_eval->add_option("--out", report_out, "report JSON path");
  cmd_eval->add_option("--roc-out", roc_out, "ROC points CSV path");

  // ablate
  CommonOpts ablate_opts;
  std::string ablate_query, ablate_query_file, table_out = "ablation.csv";
  std::vector<std::string> ablate_masks;
  std::vector<int> ablate_min_visits;
  auto* cmd_ablate = app.add_subcommand("ablate", "feature-set x min-visits sweep");
  add_common(cmd_ablate, ablate_opts);
  cmd_ablate->add_option("--query", ablate_query, "segment query text");
  cmd_ablate->add_option("--query-file", ablate_query_file, "file with the segment query");
  cmd_ablate->add_option("--masks", ablate_masks, "masks to sweep (default: all six presets)")->delimiter(',');
  cmd_ablate->add_option("--min-visits-list", ablate_min_visits, "min-visit values to sweep")->delimiter(',');
  cmd_ablate->add_option("--out", table_out, "ablation CSV path");

  // explain
  CommonOpts explain_opts;
  std::string explain_model = "model.json", cloud_out, cloud_format = "text";
  int cloud_k = 20;
  auto* cmd_explain = app.add_subcommand("explain", "tag cloud for a trained segment model");
  add_common(cmd_explain, explain_opts);
  cmd_explain->add_option("--model", explain_model, "model file");
  cmd_explain->add_option("--k", cloud_k, "cloud size");
  cmd_explain->add_option("--format", cloud_format, "text|json|html");
  cmd_explain->add_option("--out", cloud_out, "output path (default: stdout)");

  // score
  CommonOpts score_opts;
  std::string score_model = "model.json";
  auto* cmd_score = app.add_subcommand("score", "stream events on stdin -> user_id,score lines on stdout");
  add_common(cmd_score, score_opts);
  cmd_score->add_option("--model", score_model, "model file");

  // serve
  CommonOpts serve_opts;
  std::vector<std::string> serve_models;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* cmd_serve = app.add_subcommand("serve", "HTTP scoring endpoint POST /v1/score");
  add_common(cmd_serve, serve_opts);
  cmd_serve->add_option("--model", serve_models, "model file(s); id = file stem")->required();
  cmd_serve->add_option("--host", serve_host, "bind address");
  cmd_serve->add_option("--port", serve_port, "bind port");

  // syngen
  std::string syn_out_dir = "synthetic";
  GeneratorConfig syn_cfg = GeneratorConfig::defaults();
  std::vector<std::string> syn_namespaces;
  auto* cmd_syngen = app.add_subcommand("syngen", "generate a synthetic corpus with planted segment structure");
  cmd_syngen->add_option("--out-dir", syn_out_dir, "output directory");
  cmd_syngen->add_option("--n-users", syn_cfg.n_users, "users to generate");
  cmd_syngen->add_option("--visits-min", syn_cfg.visits_min, "minimum visits per user");
  cmd_syngen->add_option("--visits-max", syn_cfg.visits_max, "maximum visits per user");
  cmd_syngen->add_option("--prior", syn_cfg.positive_prior, "positive class prior");
  cmd_syngen->add_option("--predicate", syn_cfg.segment_predicate, "planted demographic predicate");
  cmd_syngen->add_option("--coverage", syn_cfg.registration_coverage, "registration coverage fraction");
  cmd_syngen->add_option("--seed", syn_cfg.seed, "generator seed");
  cmd_syngen->add_option("--namespace", syn_namespaces,
                         "override planted namespaces, field:vocab:tokens_per_visit:discriminative:gap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_ingest->parsed()) {
      const IngestStats stats = run_ingest(ingest_opts.load());
      json j = {{"pages", stats.pages},
                {"profiles", stats.profiles},
                {"events", stats.events},
                {"malformed_skipped", stats.malformed},
                {"users", stats.users}};
      std::cout << j.dump() << '\n';
      return kExitOk;
    }

    if (cmd_query->parsed()) {
      const PipelineConfig cfg = query_opts.load();
      const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
      const SegmentQuery q = parse_query(read_query_arg(query_text, query_file));
      const UserSet result = evaluate(q, *bundle.users);
      json sample = json::array();
      for (std::size_t i = 0; i < result.size() && i < sample_size; ++i)
        sample.push_back(bundle.users->external_id(result[i]));
      json j = {{"query", describe(q)}, {"size", result.size()}, {"sample", sample}};
      std::cout << j.dump() << '\n';
      return kExitOk;
    }

    if (cmd_train->parsed()) {
      const PipelineConfig cfg = train_opts.load();
      const TrainArtifacts art = run_train(cfg, read_query_arg(train_query, train_query_file));
      save_model(art.model, model_out);
      json j = {{"model", model_out},
                {"feature_space", cfg.feature_space_path()},
                {"dim", art.space.dim()},
                {"n_pos", art.model.n_pos},
                {"n_neg", art.model.n_neg},
                {"objective", art.model.objective}};
      std::cout << j.dump() << '\n';
      return kExitOk;
    }

    if (cmd_eval->parsed()) {
      const PipelineConfig cfg = eval_opts.load();
      const EvalReport report = run_eval(cfg, read_query_arg(eval_query, eval_query_file));
      write_text_file(report_out, report_to_json(report));
      if (!roc_out.empty()) write_text_file(roc_out, roc_to_csv(report.pooled_curve));
      json j = {{"report", report_out}, {"bep", report.pooled_bep}, {"auc", report.pooled_auc}};
      std::cout << j.dump() << '\n';
      return kExitOk;
    }

    if (cmd_ablate->parsed()) {
      const PipelineConfig cfg = ablate_opts.load();
      const auto cells = run_ablation_cells(cfg, read_query_arg(ablate_query, ablate_query_file), ablate_masks,
                                            ablate_min_visits);
      write_text_file(table_out, ablation_to_csv(cells));
      json j = {{"table", table_out}, {"rows", cells.size()}};
      std::cout << j.dump() << '\n';
      return kExitOk;
    }

    if (cmd_explain->parsed()) {
      const PipelineConfig cfg = explain_opts.load();
      const TagCloud cloud = run_explain(cfg, explain_model, cloud_k);
      CloudFormat format = CloudFormat::text;
      if (cloud_format == "json")
        format = CloudFormat::json;
      else if (cloud_format == "html")
        format = CloudFormat::html;
      else if (cloud_format != "text")
        throw InvalidConfig("unknown cloud format: " + cloud_format);
      const std::string doc = render(cloud, format);
      if (cloud_out.empty())
        std::cout << doc << '\n';
      else
        write_text_file(cloud_out, doc);
      return kExitOk;
    }

    if (cmd_score->parsed()) {
      const PipelineConfig cfg = score_opts.load();
      const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
      StreamScorer scorer(load_model(score_model), FeatureSpace::load_file(cfg.feature_space_path()),
                          bundle.pages.get(), IngestContext::from_config(cfg));
      std::string line;
      std::size_t skipped = 0;
      while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        try {
          const auto [user_id, s] = scorer.push_line(line);
          std::cout << user_id << ',' << format_scalar(s) << '\n';
        } catch (const MalformedRecord&) {
          ++skipped;
        }
      }
      if (skipped > 0) std::cerr << json{{"malformed_skipped", skipped}}.dump() << '\n';
      return kExitOk;
    }

    if (cmd_serve->parsed()) {
      const PipelineConfig cfg = serve_opts.load();
      const StoreBundle bundle = load_snapshot(cfg.snapshot_path());
      ScoreService service(bundle.pages.get(), IngestContext::from_config(cfg));
      const FeatureSpace space = FeatureSpace::load_file(cfg.feature_space_path());
      for (const auto& path : serve_models) {
        const std::string id = std::filesystem::path(path).stem().string();
        service.add_model(id, load_model(path), space);
        std::cerr << json{{"model_id", id}, {"file", path}}.dump() << '\n';
      }
      std::cerr << json{{"listening", serve_host}, {"port", serve_port}}.dump() << '\n';
      if (!service.listen(serve_host, serve_port)) throw Error("cannot bind " + serve_host);
      return kExitOk;
    }

    if (cmd_syngen->parsed()) {
      if (!syn_namespaces.empty()) {
        syn_cfg.namespaces.clear();
        for (const auto& spec : syn_namespaces) {
          const auto parts = [&] {
            std::vector<std::string> out;
            std::string cur;
            for (char c : spec + ":") {
              if (c == ':') {
                out.push_back(cur);
                cur.clear();
              } else {
                cur += c;
              }
            }
            return out;
          }();
          if (parts.size() != 5) throw InvalidConfig("--namespace needs field:vocab:tpv:disc:gap, got " + spec);
          const auto field = field_from_string(parts[0]);
          if (!field) throw InvalidConfig("unknown namespace field: " + parts[0]);
          syn_cfg.namespaces.push_back(
              {*field, std::stoi(parts[1]), std::stoi(parts[2]), std::stoi(parts[3]), std::stod(parts[4])});
        }
      }
      const SyntheticCorpus corpus = generate(syn_cfg);
      write_corpus(corpus, syn_out_dir);
      json j = {{"dir", syn_out_dir},
                {"users", syn_cfg.n_users},
                {"events", std::count(corpus.log_jsonl.begin(), corpus.log_jsonl.end(), '\n')},
                {"config", (std::filesystem::path(syn_out_dir) / "segmod.conf").string()}};
      std::cout << j.dump() << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    print_error(e);
    return exit_code_for(e);
  }
  return kExitConfig;
}
