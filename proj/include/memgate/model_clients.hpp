#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "memgate/corpus.hpp"
#include "memgate/rng.hpp"

namespace memgate {

enum class ModelRole { mc, oracle };

std::string_view to_string(ModelRole role);

struct ModelEndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000 ; /v1/chat/completions is appended
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 4096;
  double timeout_seconds = 120.0;
  int retries = 2;
  ModelRole role = ModelRole::oracle;
  /// Merged into every request body, e.g. {"chat_template_kwargs": {"enable_thinking": false}}.
  nlohmann::json extra_body = nlohmann::json::object();

  void validate() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Which controller step produced a prompt. Remote backends ignore it;
/// scripted backends use it to pick a behaviour.
enum class PromptKind { answer, compose, write_back_judgment };

struct MemoryCue {
  std::string qid;
  std::string answer;
};

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  PromptKind kind = PromptKind::answer;
  // Not sent over the wire.
  std::string qid;
  std::vector<MemoryCue> memory;
};

struct GenerationResult {
  std::string text;
  double latency_seconds = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

class ModelError : public std::runtime_error {
 public:
  enum class Kind { timeout, unreachable, http_status, empty_completion, bad_response, unknown_query };

  ModelError(Kind kind, const std::string& what, int status = 0, int attempts = 1)
      : std::runtime_error(what), kind_(kind), status_(status), attempts_(attempts) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }
  int attempts() const { return attempts_; }
  bool retryable() const {
    return kind_ == Kind::timeout || kind_ == Kind::unreachable ||
           (kind_ == Kind::http_status && (status_ == 429 || status_ >= 500));
  }

 private:
  Kind kind_;
  int status_;
  int attempts_;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
  /// Throws ModelError when the backend cannot serve traffic.
  virtual void health_check() {}
};

/// Chat-completions client: POST {base_url}/v1/chat/completions.
class HttpModelClient final : public ModelClient {
 public:
  explicit HttpModelClient(ModelEndpointConfig config);

  GenerationResult generate(const GenerationRequest& request) override;
  void health_check() override;

  nlohmann::json request_body(const GenerationRequest& request) const;
  const ModelEndpointConfig& config() const { return config_; }

 private:
  ModelEndpointConfig config_;
};

struct AnswerKey {
  char gold_label = 'A';
  std::size_t option_count = 4;
};

struct ScriptedModelConfig {
  std::unordered_map<std::string, AnswerKey> answer_table;
  double accuracy_rate = 1.0;
  double fixed_latency_seconds = 0.0;
  std::uint64_t seed = 1;
  /// Sleep for the latency instead of only reporting it.
  bool sleep = false;

  void validate() const;
  static ScriptedModelConfig from_corpus(const std::vector<QueryRecord>& corpus, double accuracy_rate,
                                         double latency_seconds, std::uint64_t seed);
};

/// Canonical answer text for a label; extract_label inverts it.
std::string render_answer(char label);

/// Last "answer is (X)" / "answer is X" in the text, if X names one of
/// the first option_count options.
std::optional<char> extract_label(std::string_view text, std::size_t option_count);

/// Emits the gold label with probability accuracy_rate, otherwise a
/// uniformly chosen wrong label.
GenerationResult scripted_generate(const ScriptedModelConfig& config, std::string_view qid,
                                   char gold_label, std::size_t option_count, SplitMix64& rng);

inline constexpr std::string_view kEscalationToken = "ESCALATE";
inline constexpr std::string_view kStoreToken = "STORE";

/// Answers from an AnswerKey table. Draws are keyed by (seed, qid, n-th call
/// for that qid), so concurrent callers see the same per-qid sequences.
class ScriptedModelClient final : public ModelClient {
 public:
  explicit ScriptedModelClient(ScriptedModelConfig config);

  GenerationResult generate(const GenerationRequest& request) override;

  std::size_t call_count() const { return calls_.load(); }

 private:
  GenerationResult finish(std::string text) const;

  ScriptedModelConfig config_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::uint64_t> per_qid_calls_;
  std::atomic<std::size_t> calls_{0};
};

/// Prompt text with {query}, {options} and {entries} placeholders.
struct PromptTemplates {
  std::string answer_system;
  std::string answer_user;
  std::string compose_system;
  std::string compose_user;
  std::string write_back_system;
  std::string write_back_user;
  /// Few-shot exemplars prepended to answer prompts; empty means 0-shot.
  std::vector<std::string> exemplars;

  static PromptTemplates defaults();
  /// Reads answer_system.txt, answer_user.txt, compose_system.txt, ...
  /// from dir; missing files keep their default text.
  static PromptTemplates load(const std::filesystem::path& dir);
};

/// Exemplar file: blocks separated by lines consisting of "%%%".
std::vector<std::string> load_exemplars(const std::filesystem::path& path);

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string format_options(const std::vector<std::string>& options);

/// True if any line, ignoring leading whitespace, starts with the
/// escalation token (case-insensitive).
bool is_escalation(std::string_view text);

/// True if the first non-empty line starts with the store token.
bool parse_write_back_judgment(std::string_view text);

}  // namespace memgate
