#pragma once

#include <memory>
#include <string>

#include "segmod/pipeline.hpp"

namespace segmod {

// Stateless-per-request scoring endpoint:
//
//   POST /v1/score  {"model_id": "...", "events": [<access-log records>]}
//   200  {"model_id": "...", "user_scores": [{"user_id","score","decision"}]}
//
// 400 malformed body, 404 unknown model_id, 422 when no event is usable.
class ScoreService {
 public:
  ScoreService(const ContentStore* pages, IngestContext ctx);
  ~ScoreService();
  ScoreService(ScoreService&&) noexcept;
  ScoreService& operator=(ScoreService&&) noexcept;

  void add_model(const std::string& model_id, SvmModel model, FeatureSpace space);

  // Request handling without a socket; returns (http status, response body).
  std::pair<int, std::string> handle_score(const std::string& request_body) const;

  // Blocks serving until stop(); thread-safe against concurrent requests.
  bool listen(const std::string& host, int port);
  // Two-step variant: grab an ephemeral port now, serve later.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace segmod
