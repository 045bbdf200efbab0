#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "memgate/ame.hpp"
#include "memgate/controller.hpp"
#include "memgate/corpus.hpp"
#include "memgate/embedding.hpp"
#include "memgate/metrics.hpp"
#include "memgate/model_clients.hpp"

namespace memgate {

enum class BackendMode { scripted, remote };

std::string_view to_string(BackendMode mode);
BackendMode parse_backend_mode(std::string_view text);

/// Parameters of the scripted stand-in models.
struct ScriptedBackends {
  double oracle_accuracy = 1.0;
  double mc_accuracy = 0.4;
  double oracle_latency = 0.20;
  double mc_latency = 0.02;
  /// Reported embed+retrieve latency in scripted runs.
  double retrieval_latency = 0.01;
  std::uint64_t seed = 1;
  bool sleep = false;
};

/// The set of live components a controller needs, built from configuration.
struct Backends {
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<ModelClient> mc;
  std::unique_ptr<ModelClient> oracle;
};

Backends make_scripted_backends(const std::vector<QueryRecord>& corpus, const ScriptedBackends& params,
                                const EmbedderConfig& embedder);
Backends make_remote_backends(const ModelEndpointConfig& mc, const ModelEndpointConfig& oracle,
                              const EmbedderConfig& embedder);

struct BenchmarkConfig {
  std::filesystem::path corpus_path;
  /// Used instead of corpus_path when non-empty.
  std::vector<QueryRecord> corpus;
  WorkloadConfig workload;
  ControllerConfig controller;
  AmeConfig ame;
  CostParams costs;
  BackendMode backend = BackendMode::scripted;
  ScriptedBackends scripted;
  EmbedderConfig embedder = EmbedderConfig::local();
  ModelEndpointConfig mc_endpoint;
  ModelEndpointConfig oracle_endpoint;
  std::optional<std::filesystem::path> prompts_dir;
  /// Empty: keep results in memory only.
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> snapshot_out;
  std::size_t memory_window = 200;
  std::size_t latency_window = 100;
};

struct BenchmarkResult {
  StepLog log;
  RunSummary summary;
  std::size_t store_entries = 0;
};

/// A backend failed mid-run. The partial step log has been flushed.
class BenchmarkAborted : public std::runtime_error {
 public:
  BenchmarkAborted(const std::string& what, std::size_t completed_steps)
      : std::runtime_error(what), completed_steps_(completed_steps) {}
  std::size_t completed_steps() const { return completed_steps_; }

 private:
  std::size_t completed_steps_;
};

/// Converts a served answer into its step-log row.
StepRecord make_step(const ServedAnswer& served, const Query& query);

/// Feeds the events through the controller strictly in order. `on_step` sees
/// each row as soon as it is produced.
StepLog run_stream(Controller& controller, const std::vector<QueryRecord>& corpus,
                   const std::vector<QueryEvent>& events,
                   const std::function<void(const StepRecord&)>& on_step = {});

/// Loads the corpus, samples the workload, runs it, and, when output_dir is
/// set, writes steplog.jsonl, summary.json, memrate.csv and latency.csv.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

/// Same as run_benchmark but with caller-supplied backends (test doubles,
/// pre-warmed clients).
BenchmarkResult run_benchmark(const BenchmarkConfig& config, Backends& backends);

}  // namespace memgate
