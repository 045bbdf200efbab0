#include "memgate/gateway.hpp"

#include <httplib.h>

namespace memgate {

using json = nlohmann::json;

namespace {

json error_body(const std::string& message) { return json{{"error", {{"message", message}}}}; }

}  // namespace

Gateway::Gateway(GatewayConfig config) : config_(std::move(config)) {
  config_.controller.validate();
  config_.ame.validate();
  config_.costs.validate();

  if (config_.corpus.empty() && config_.corpus_path) config_.corpus = load_corpus(*config_.corpus_path);
  for (const auto& r : config_.corpus) {
    by_qid_.emplace(r.qid, r);
    qid_by_question_.emplace(r.question, r.qid);
  }

  if (config_.backend == BackendMode::scripted) {
    backends_ = make_scripted_backends(config_.corpus, config_.scripted, config_.embedder);
    if (!config_.controller.modeled_retrieval_latency)
      config_.controller.modeled_retrieval_latency = config_.scripted.retrieval_latency;
  } else {
    backends_ = make_remote_backends(config_.mc_endpoint, config_.oracle_endpoint, config_.embedder);
    backends_.oracle->health_check();
    if (config_.controller.mode != RunMode::oracle_only) backends_.mc->health_check();
    backends_.embedder->embed("health check");
  }

  const auto dim = backends_.embedder->dim();
  if (config_.snapshot_path && std::filesystem::exists(*config_.snapshot_path)) {
    store_ = MemoryStore::load_snapshot(*config_.snapshot_path, dim, config_.ame);
  } else {
    store_ = std::make_unique<MemoryStore>(dim, config_.ame);
  }
  if (config_.knowledge_path) store_->ingest(*config_.knowledge_path);

  const auto prompts = config_.prompts_dir ? PromptTemplates::load(*config_.prompts_dir) : PromptTemplates::defaults();
  controller_ = std::make_unique<Controller>(*backends_.embedder, *store_, backends_.mc.get(), *backends_.oracle,
                                             config_.controller, config_.costs, prompts);
  server_ = std::make_unique<httplib::Server>();
  install_routes();
}

Gateway::~Gateway() { stop(); }

std::pair<int, json> Gateway::handle_query_request(const std::string& body) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, error_body(std::string("invalid JSON: ") + e.what())};
  }
  if (!request.is_object()) return {400, error_body("request body must be a JSON object")};

  Query query;
  const auto question = request.find("question");
  if (question == request.end() || !question->is_string()) return {400, error_body("\"question\" must be a string")};
  query.question = question->get<std::string>();
  if (query.question.find_first_not_of(" \t\r\n") == std::string::npos)
    return {400, error_body("\"question\" must not be empty")};

  if (auto qid = request.find("qid"); qid != request.end() && !qid->is_null()) {
    if (!qid->is_string()) return {400, error_body("\"qid\" must be a string")};
    query.qid = qid->get<std::string>();
  } else if (auto it = qid_by_question_.find(query.question); it != qid_by_question_.end()) {
    query.qid = it->second;
  }
  const QueryRecord* known = nullptr;
  if (auto it = by_qid_.find(query.qid); it != by_qid_.end()) known = &it->second;

  if (auto options = request.find("options"); options != request.end() && !options->is_null()) {
    try {
      query.options = options->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      return {400, error_body("\"options\" must be an array of strings")};
    }
    if (query.options.size() > kMaxOptions) return {400, error_body("at most 10 options are supported")};
  } else if (known) {
    query.options = known->options;
  }
  if (known) {
    query.category = known->category;
    query.gold_label = known->gold_label;
  }

  const std::size_t t = next_t_++;
  ServedAnswer served;
  try {
    served = controller_->handle_query(t, query);
  } catch (const OracleFailure& e) {
    return {502, error_body(e.what())};
  } catch (const ModelError& e) {
    return {502, error_body(e.what())};
  } catch (const EmbeddingError& e) {
    return {e.kind() == EmbeddingError::Kind::empty_text ? 400 : 502, error_body(e.what())};
  }

  {
    std::lock_guard lock(totals_mutex_);
    ++totals_.requests;
    switch (served.source) {
      case AnswerSource::memory: ++totals_.memory_hits; break;
      case AnswerSource::oracle: ++totals_.oracle_calls; break;
      case AnswerSource::mc: ++totals_.mc_answers; break;
    }
    if (query.gold_label) {
      ++totals_.gold_known;
      const auto label = extract_label(served.answer, query.options.empty() ? kMaxOptions : query.options.size());
      totals_.correct += (label && *label == *query.gold_label) ? 1 : 0;
    }
  }

  json response = {{"answer", served.answer},
                   {"source", std::string(to_string(served.source))},
                   {"similarity", served.top_similarity ? json(*served.top_similarity) : json(nullptr)},
                   {"latency_seconds", served.latency_seconds},
                   {"wrote_back", served.wrote_back}};
  return {200, response};
}

GatewayTotals Gateway::totals() const {
  std::lock_guard lock(totals_mutex_);
  return totals_;
}

json Gateway::stats_json() const {
  const auto s = store_->stats();
  const auto t = totals();
  json j = {{"entry_count", s.entry_count},
            {"per_category", s.per_category},
            {"last_entry_id", s.last_entry_id},
            {"requests", t.requests},
            {"memory_hits", t.memory_hits},
            {"oracle_calls", t.oracle_calls},
            {"mc_answers", t.mc_answers}};
  j["accuracy"] = t.gold_known ? json(static_cast<double>(t.correct) / static_cast<double>(t.gold_known)) : json(nullptr);
  return j;
}

std::pair<int, json> Gateway::handle_snapshot_request(const std::string& body) {
  std::optional<std::filesystem::path> path;
  if (!body.empty()) {
    try {
      const auto j = json::parse(body);
      if (j.contains("path")) path = j.at("path").get<std::string>();
    } catch (const json::exception& e) {
      return {400, error_body(std::string("invalid request: ") + e.what())};
    }
  }
  if (!path) path = config_.snapshot_path;
  if (!path) return {400, error_body("no \"path\" given and no snapshot path configured")};
  try {
    return {200, json{{"entries_written", store_->snapshot(*path)}}};
  } catch (const SnapshotError& e) {
    return {500, error_body(e.what())};
  }
}

void Gateway::install_routes() {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  server_->Post("/v1/query", [this, reply](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = handle_query_request(req.body);
    reply(res, status, body);
  });
  server_->Get("/stats", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, stats_json());
  });
  server_->Post("/memory/snapshot", [this, reply](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = handle_snapshot_request(req.body);
    reply(res, status, body);
  });
  server_->Get("/health", [reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, json{{"status", "ok"}});
  });
}

int Gateway::bind() {
  int port = config_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(config_.host);
  } else if (!server_->bind_to_port(config_.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  bound_ = true;
  return port;
}

void Gateway::listen() {
  if (!bound_) bind();
  server_->listen_after_bind();
}

void Gateway::stop() {
  if (server_) server_->stop();
}

void Gateway::shutdown() {
  stop();
  if (config_.snapshot_path) store_->snapshot(*config_.snapshot_path);
}

}  // namespace memgate
