#include "memgate/model_clients.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <thread>

#include "http_util.hpp"

namespace memgate {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(ModelRole role) { return role == ModelRole::mc ? "mc" : "oracle"; }

void ModelEndpointConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("model endpoint needs a base_url");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("timeout_seconds must be > 0");
  if (!extra_body.is_object()) throw std::invalid_argument("extra_body must be a JSON object");
}

HttpModelClient::HttpModelClient(ModelEndpointConfig config) : config_(std::move(config)) {
  config_.validate();
}

json HttpModelClient::request_body(const GenerationRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", config_.model_name},
               {"messages", std::move(messages)},
               {"temperature", config_.temperature},
               {"max_tokens", config_.max_tokens},
               {"frequency_penalty", 0.0},
               {"presence_penalty", 0.0}};
  body.update(config_.extra_body);
  return body;
}

GenerationResult HttpModelClient::generate(const GenerationRequest& request) {
  const auto payload = request_body(request).dump();
  const auto url = detail::join_url(config_.base_url, "/v1/chat/completions");

  const auto start = Clock::now();
  const auto outcome = detail::post_json(url, payload, config_.timeout_seconds, config_.retries);
  const double latency = std::chrono::duration<double>(Clock::now() - start).count();

  if (outcome.transport_failed()) {
    const auto kind = outcome.timed_out() ? ModelError::Kind::timeout : ModelError::Kind::unreachable;
    throw ModelError(kind, std::string(to_string(config_.role)) + " backend: " + httplib::to_string(outcome.error),
                     0, outcome.attempts);
  }
  if (!outcome.ok()) {
    throw ModelError(ModelError::Kind::http_status,
                     std::string(to_string(config_.role)) + " backend returned HTTP " +
                         std::to_string(outcome.status) + " after " + std::to_string(outcome.attempts) +
                         " attempt(s)",
                     outcome.status, outcome.attempts);
  }

  GenerationResult result;
  result.latency_seconds = latency;
  try {
    const auto j = json::parse(outcome.body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) result.text = content.get<std::string>();
    if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
      if (usage->contains("prompt_tokens")) result.prompt_tokens = usage->at("prompt_tokens").get<int>();
      if (usage->contains("completion_tokens"))
        result.completion_tokens = usage->at("completion_tokens").get<int>();
    }
  } catch (const json::exception& e) {
    throw ModelError(ModelError::Kind::bad_response, std::string("malformed completion: ") + e.what(),
                     outcome.status, outcome.attempts);
  }
  if (result.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ModelError(ModelError::Kind::empty_completion,
                     std::string(to_string(config_.role)) + " backend returned an empty completion",
                     outcome.status, outcome.attempts);
  }
  return result;
}

void HttpModelClient::health_check() {
  const auto outcome = detail::get(detail::join_url(config_.base_url, "/v1/models"),
                                   std::min(config_.timeout_seconds, 10.0));
  if (outcome.transport_failed())
    throw ModelError(outcome.timed_out() ? ModelError::Kind::timeout : ModelError::Kind::unreachable,
                     std::string(to_string(config_.role)) + " backend at " + config_.base_url +
                         " is unreachable: " + httplib::to_string(outcome.error));
  if (!outcome.ok())
    throw ModelError(ModelError::Kind::http_status,
                     std::string(to_string(config_.role)) + " backend at " + config_.base_url +
                         " failed its health check with HTTP " + std::to_string(outcome.status),
                     outcome.status);
}

void ScriptedModelConfig::validate() const {
  if (!(accuracy_rate >= 0.0 && accuracy_rate <= 1.0))
    throw std::invalid_argument("accuracy_rate must lie in [0, 1]");
  if (!(fixed_latency_seconds >= 0.0)) throw std::invalid_argument("fixed_latency_seconds must be >= 0");
}

ScriptedModelConfig ScriptedModelConfig::from_corpus(const std::vector<QueryRecord>& corpus,
                                                     double accuracy_rate, double latency_seconds,
                                                     std::uint64_t seed) {
  ScriptedModelConfig c;
  c.accuracy_rate = accuracy_rate;
  c.fixed_latency_seconds = latency_seconds;
  c.seed = seed;
  for (const auto& r : corpus) c.answer_table[r.qid] = AnswerKey{r.gold_label, r.option_count()};
  return c;
}

std::string render_answer(char label) {
  return "Weighing each option against the facts given, the answer is (" + std::string(1, label) + ").";
}

std::optional<char> extract_label(std::string_view text, std::size_t option_count) {
  static constexpr std::string_view kPhrase = "answer is";
  auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };

  std::optional<char> found;
  for (std::size_t i = 0; i + kPhrase.size() <= text.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < kPhrase.size() && match; ++k) match = lower(text[i + k]) == kPhrase[k];
    if (!match) continue;

    std::size_t p = i + kPhrase.size();
    while (p < text.size() && (text[p] == ' ' || text[p] == ':')) ++p;
    const bool paren = p < text.size() && text[p] == '(';
    if (paren) ++p;
    if (p >= text.size() || text[p] < 'A' || text[p] > 'J') continue;
    const char label = text[p];
    ++p;
    if (paren) {
      if (p >= text.size() || text[p] != ')') continue;
    } else if (p < text.size() && std::isalnum(static_cast<unsigned char>(text[p]))) {
      continue;  // "answer is Apple" is not a label
    }
    found = label;
  }
  if (found && static_cast<std::size_t>(*found - 'A') >= option_count) return std::nullopt;
  return found;
}

GenerationResult scripted_generate(const ScriptedModelConfig& config, std::string_view qid,
                                   char gold_label, std::size_t option_count, SplitMix64& rng) {
  if (option_count < 2 || option_count > kMaxOptions)
    throw std::invalid_argument("scripted_generate: option_count out of range");
  if (gold_label < 'A' || static_cast<std::size_t>(gold_label - 'A') >= option_count)
    throw std::invalid_argument("scripted_generate: gold label out of range for qid " + std::string(qid));

  char label = gold_label;
  if (!(rng.uniform() < config.accuracy_rate)) {
    // Uniform over the option_count - 1 wrong labels.
    auto pick = static_cast<char>('A' + rng.below(option_count - 1));
    if (pick >= gold_label) ++pick;
    label = pick;
  }
  GenerationResult r;
  r.text = render_answer(label);
  r.latency_seconds = config.fixed_latency_seconds;
  return r;
}

ScriptedModelClient::ScriptedModelClient(ScriptedModelConfig config) : config_(std::move(config)) {
  config_.validate();
}

GenerationResult ScriptedModelClient::finish(std::string text) const {
  GenerationResult r;
  r.text = std::move(text);
  r.latency_seconds = config_.fixed_latency_seconds;
  return r;
}

GenerationResult ScriptedModelClient::generate(const GenerationRequest& request) {
  ++calls_;
  const auto start = Clock::now();
  GenerationResult result;
  switch (request.kind) {
    case PromptKind::compose: {
      // Recognizes a stored answer to the very same question, else defers.
      std::string text(kEscalationToken);
      for (const auto& cue : request.memory) {
        if (!request.qid.empty() && cue.qid == request.qid) {
          text = cue.answer;
          break;
        }
      }
      result = finish(std::move(text));
      break;
    }
    case PromptKind::write_back_judgment:
      result = finish(std::string(kStoreToken));
      break;
    case PromptKind::answer: {
      auto it = config_.answer_table.find(request.qid);
      if (it == config_.answer_table.end())
        throw ModelError(ModelError::Kind::unknown_query, "scripted backend has no answer key for qid '" +
                                                              request.qid + "'");
      std::uint64_t call_index = 0;
      {
        std::lock_guard lock(mutex_);
        call_index = per_qid_calls_[request.qid]++;
      }
      SplitMix64 rng(SplitMix64::mix(hash_bytes(request.qid, config_.seed) ^ SplitMix64::mix(call_index)));
      result = scripted_generate(config_, request.qid, it->second.gold_label, it->second.option_count, rng);
      break;
    }
  }
  if (config_.sleep && config_.fixed_latency_seconds > 0.0) {
    std::this_thread::sleep_until(start + std::chrono::duration<double>(config_.fixed_latency_seconds));
    result.latency_seconds = std::max(config_.fixed_latency_seconds,
                                      std::chrono::duration<double>(Clock::now() - start).count());
  }
  return result;
}

}  // namespace memgate
