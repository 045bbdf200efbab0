#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "memgate/ame.hpp"
#include "memgate/benchmark.hpp"
#include "memgate/controller.hpp"

namespace httplib {
class Server;
}

namespace memgate {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  ControllerConfig controller;
  EmbedderConfig embedder = EmbedderConfig::local();
  AmeConfig ame;
  CostParams costs;
  BackendMode backend = BackendMode::scripted;
  ModelEndpointConfig mc_endpoint;
  ModelEndpointConfig oracle_endpoint;
  ScriptedBackends scripted;
  /// Scripted answer keys and gold labels for accuracy tracking.
  std::optional<std::filesystem::path> corpus_path;
  std::vector<QueryRecord> corpus;
  /// Loaded at startup when the file exists, written on shutdown.
  std::optional<std::filesystem::path> snapshot_path;
  /// Snapshot-format file bulk-written into memory at startup.
  std::optional<std::filesystem::path> knowledge_path;
  std::optional<std::filesystem::path> prompts_dir;
};

struct GatewayTotals {
  std::size_t requests = 0;
  std::size_t memory_hits = 0;
  std::size_t oracle_calls = 0;
  std::size_t mc_answers = 0;
  std::size_t gold_known = 0;
  std::size_t correct = 0;
};

/// HTTP front end for the controller:
///   POST /v1/query, GET /stats, POST /memory/snapshot, GET /health.
class Gateway {
 public:
  /// Builds backends, loads corpus/snapshot/knowledge and runs backend
  /// health checks. Throws on any failure so a broken gateway never binds.
  explicit Gateway(GatewayConfig config);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds the listen socket; returns the bound port. Throws on failure.
  int bind();
  /// Serves until stop(); call bind() first.
  void listen();
  void stop();
  /// stop() plus a snapshot flush when a snapshot path is configured.
  void shutdown();

  // Handler bodies, exposed so they can be exercised without a socket.
  // Each returns (HTTP status, JSON body).
  std::pair<int, nlohmann::json> handle_query_request(const std::string& body);
  nlohmann::json stats_json() const;
  std::pair<int, nlohmann::json> handle_snapshot_request(const std::string& body);

  MemoryStore& store() { return *store_; }
  GatewayTotals totals() const;

 private:
  void install_routes();

  GatewayConfig config_;
  Backends backends_;
  std::unique_ptr<MemoryStore> store_;
  std::unique_ptr<Controller> controller_;
  std::unique_ptr<httplib::Server> server_;
  std::unordered_map<std::string, QueryRecord> by_qid_;
  std::unordered_map<std::string, std::string> qid_by_question_;
  std::atomic<std::size_t> next_t_{1};
  mutable std::mutex totals_mutex_;
  GatewayTotals totals_;
  bool bound_ = false;
};

}  // namespace memgate
