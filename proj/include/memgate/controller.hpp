#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "memgate/ame.hpp"
#include "memgate/corpus.hpp"
#include "memgate/embedding.hpp"
#include "memgate/metrics.hpp"
#include "memgate/model_clients.hpp"

namespace memgate {

enum class Policy { threshold, llm };
enum class RunMode { memboost, oracle_only, mc_only };

std::string_view to_string(Policy policy);
std::string_view to_string(RunMode mode);
Policy parse_policy(std::string_view text);
RunMode parse_run_mode(std::string_view text);

struct ControllerConfig {
  double tau = 0.95;
  std::size_t top_k = 3;
  Policy policy = Policy::threshold;
  bool write_back_enabled = true;
  RunMode mode = RunMode::memboost;
  /// When set, the embed+retrieve stage reports this latency instead of the
  /// measured wall time (keeps scripted runs byte-reproducible).
  std::optional<double> modeled_retrieval_latency;

  void validate() const;
};

/// One incoming question. gold_label is known only for benchmark traffic.
struct Query {
  std::string qid;
  std::string question;
  std::vector<std::string> options;
  std::string category;
  std::optional<char> gold_label;

  static Query from_record(const QueryRecord& record);
};

struct ServedAnswer {
  std::size_t t = 0;
  std::string answer;
  AnswerSource source = AnswerSource::oracle;
  int memory_used = 0;
  std::optional<double> top_similarity;
  bool wrote_back = false;
  bool mc_fallback = false;
  double latency_seconds = 0.0;
  double mc_cost = 0.0;
  double retrieval_cost = 0.0;
  double oracle_cost = 0.0;
};

struct Decision {
  enum class Kind { use_memory, escalate };
  Kind kind = Kind::escalate;
  std::optional<ScoredEntry> entry;  // best entry on use_memory
  std::string composed;              // MC text, llm policy only
  bool mc_fallback = false;
  double mc_latency = 0.0;

  bool uses_memory() const { return kind == Kind::use_memory; }
};

/// UseMemory(best) iff best score >= tau (inclusive); empty -> escalate.
Decision decide_threshold(const RetrievalResult& retrieval, double tau);

/// Raised when the escalation path cannot obtain an oracle answer. Nothing
/// is written back for that query.
class OracleFailure : public std::runtime_error {
 public:
  OracleFailure(const std::string& what, ModelError cause)
      : std::runtime_error(what), cause_(std::move(cause)) {}
  const ModelError& cause() const { return cause_; }

 private:
  ModelError cause_;
};

/// Per-query decision loop. Holds references only; the caller owns the
/// embedder, store and clients and must keep them alive. `mc` may be null
/// under the threshold policy in memboost / oracle-only modes.
class Controller {
 public:
  Controller(const Embedder& embedder, MemoryStore& store, ModelClient* mc, ModelClient& oracle,
             ControllerConfig config, CostParams costs, PromptTemplates prompts = PromptTemplates::defaults());

  ServedAnswer handle_query(std::size_t t, const Query& query);

  Decision decide(const RetrievalResult& retrieval, const Query& query);
  bool decide_write_back(const std::string& oracle_answer, const Query& query, const RetrievalResult& retrieval,
                         double* mc_latency = nullptr);

  const ControllerConfig& config() const { return config_; }
  const CostParams& costs() const { return costs_; }

  std::vector<ChatMessage> answer_messages(const Query& query) const;
  std::vector<ChatMessage> compose_messages(const Query& query, const RetrievalResult& retrieval) const;
  std::vector<ChatMessage> write_back_messages(const Query& query, const std::string& answer,
                                               const RetrievalResult& retrieval) const;

 private:
  ServedAnswer handle_memboost(std::size_t t, const Query& query);
  ServedAnswer handle_oracle_only(std::size_t t, const Query& query);
  ServedAnswer handle_mc_only(std::size_t t, const Query& query);
  GenerationResult call_oracle(const Query& query);

  const Embedder& embedder_;
  MemoryStore& store_;
  ModelClient* mc_;
  ModelClient& oracle_;
  ControllerConfig config_;
  CostParams costs_;
  PromptTemplates prompts_;
};

}  // namespace memgate
