#include "segmod/service.hpp"

#include <map>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace segmod {

using json = nlohmann::json;

struct ScoreService::Impl {
  struct Entry {
    SvmModel model;
    FeatureSpace space;
    FeatureSetMask mask;
  };

  const ContentStore* pages;
  IngestContext ctx;
  std::map<std::string, Entry> models;
  httplib::Server server;

  std::pair<int, std::string> score_request(const std::string& body) const {
    json request = json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.is_object() || !request.contains("model_id") ||
        !request["model_id"].is_string() || !request.contains("events") || !request["events"].is_array())
      return {400, json{{"error", "body must be {model_id, events: [...]}"}}.dump()};

    const std::string model_id = request["model_id"].get<std::string>();
    const auto entry = models.find(model_id);
    if (entry == models.end()) return {404, json{{"error", "unknown model_id: " + model_id}}.dump()};
    const auto& [model, space, mask] = entry->second;

    // group usable events by user, first-seen order
    std::vector<std::string> order;
    std::map<std::string, std::vector<SparseVec>> by_user;
    for (const auto& raw : request["events"]) {
      try {
        const AccessEvent ev = parse_event(raw.is_string() ? raw.get<std::string>() : raw.dump(), ctx.geo,
                                           ctx.devices, ctx.engines, ctx.tz);
        const PageRecord* page = pages == nullptr ? nullptr : pages->get_page(canonical_url(ev.url));
        auto& vectors = by_user[ev.user_id];
        if (vectors.empty()) order.push_back(ev.user_id);
        vectors.push_back(vectorize_visit(make_visit(ev, page, ctx.stoplist, ctx.tz), space, mask));
      } catch (const MalformedRecord&) {
        // unusable event; the request fails only if nothing remains
      }
    }
    if (order.empty()) return {422, json{{"error", "no usable events in request"}}.dump()};

    json scores = json::array();
    for (const auto& user_id : order) {
      const SparseVec centroid = user_centroid(by_user[user_id]);
      const double s = score(model, centroid);
      scores.push_back({{"user_id", user_id}, {"score", s}, {"decision", s > 0 ? +1 : -1}});
    }
    return {200, json{{"model_id", model_id}, {"user_scores", scores}}.dump()};
  }

  void register_routes() {
    server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      const auto [status, body] = score_request(req.body);
      res.status = status;
      res.set_content(body, "application/json");
    });
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"status\":\"ok\"}", "application/json");
    });
  }
};

ScoreService::ScoreService(const ContentStore* pages, IngestContext ctx) : impl_(std::make_unique<Impl>()) {
  impl_->pages = pages;
  impl_->ctx = std::move(ctx);
}

ScoreService::~ScoreService() = default;
ScoreService::ScoreService(ScoreService&&) noexcept = default;
ScoreService& ScoreService::operator=(ScoreService&&) noexcept = default;

void ScoreService::add_model(const std::string& model_id, SvmModel model, FeatureSpace space) {
  const auto mask = FeatureSetMask::from_string(model.provenance.mask);
  if (!mask) throw CorruptModel("model carries an unknown mask: " + model.provenance.mask);
  if (space.id() != model.feature_space_id)
    throw DimensionMismatch("feature space " + space.id() + " does not match the model's " +
                            model.feature_space_id);
  impl_->models.emplace(model_id, Impl::Entry{std::move(model), std::move(space), *mask});
}

std::pair<int, std::string> ScoreService::handle_score(const std::string& request_body) const {
  return impl_->score_request(request_body);
}

bool ScoreService::listen(const std::string& host, int port) {
  impl_->register_routes();
  return impl_->server.listen(host, port);
}

int ScoreService::bind_any_port(const std::string& host) {
  impl_->register_routes();
  return impl_->server.bind_to_any_port(host);
}

bool ScoreService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ScoreService::stop() { impl_->server.stop(); }

}  // namespace segmod
