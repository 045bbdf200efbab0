#include "memgate/controller.hpp"

#include <chrono>
#include <cstdio>

namespace memgate {

using Clock = std::chrono::steady_clock;

std::string_view to_string(Policy policy) { return policy == Policy::llm ? "llm" : "threshold"; }

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::memboost: return "memboost";
    case RunMode::oracle_only: return "oracle-only";
    case RunMode::mc_only: return "mc-only";
  }
  return "memboost";
}

Policy parse_policy(std::string_view text) {
  if (text == "threshold") return Policy::threshold;
  if (text == "llm") return Policy::llm;
  throw std::invalid_argument("unknown policy '" + std::string(text) + "'");
}

RunMode parse_run_mode(std::string_view text) {
  if (text == "memboost") return RunMode::memboost;
  if (text == "oracle-only") return RunMode::oracle_only;
  if (text == "mc-only") return RunMode::mc_only;
  throw std::invalid_argument("unknown run mode '" + std::string(text) + "'");
}

void ControllerConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (top_k == 0) throw std::invalid_argument("top_k must be >= 1");
  if (modeled_retrieval_latency && !(*modeled_retrieval_latency >= 0.0))
    throw std::invalid_argument("modeled retrieval latency must be >= 0");
}

Query Query::from_record(const QueryRecord& record) {
  return Query{record.qid, record.question, record.options, record.category, record.gold_label};
}

Decision decide_threshold(const RetrievalResult& retrieval, double tau) {
  Decision d;
  if (!retrieval.empty() && retrieval.entries.front().score >= tau) {
    d.kind = Decision::Kind::use_memory;
    d.entry = retrieval.entries.front();
  }
  return d;
}

Controller::Controller(const Embedder& embedder, MemoryStore& store, ModelClient* mc, ModelClient& oracle,
                       ControllerConfig config, CostParams costs, PromptTemplates prompts)
    : embedder_(embedder),
      store_(store),
      mc_(mc),
      oracle_(oracle),
      config_(config),
      costs_(costs),
      prompts_(std::move(prompts)) {
  config_.validate();
  costs_.validate();
  if (embedder_.dim() != store_.dim()) throw std::invalid_argument("embedder and store dimensions differ");
  const bool needs_mc = config_.mode == RunMode::mc_only ||
                        (config_.mode == RunMode::memboost && config_.policy == Policy::llm);
  if (needs_mc && mc_ == nullptr) throw std::invalid_argument("this policy/mode requires an MC client");
}

namespace {

std::string format_entries(const RetrievalResult& retrieval) {
  if (retrieval.empty()) return "(none)\n";
  std::string out;
  char score[32];
  for (std::size_t i = 0; i < retrieval.entries.size(); ++i) {
    const auto& [entry, s] = retrieval.entries[i];
    std::snprintf(score, sizeof score, "%.4f", s);
    out += "[" + std::to_string(i + 1) + "] similarity " + score + "\nQ: " + entry.query + "\nA: " + entry.answer + "\n";
  }
  return out;
}

std::string exemplar_block(const std::vector<std::string>& exemplars) {
  std::string out;
  for (const auto& e : exemplars) out += e + "\n\n";
  return out;
}

}  // namespace

std::vector<ChatMessage> Controller::answer_messages(const Query& query) const {
  const std::map<std::string, std::string> values{{"query", query.question},
                                                  {"options", format_options(query.options)}};
  return {{"system", prompts_.answer_system},
          {"user", exemplar_block(prompts_.exemplars) + fill_template(prompts_.answer_user, values)}};
}

std::vector<ChatMessage> Controller::compose_messages(const Query& query, const RetrievalResult& retrieval) const {
  const std::map<std::string, std::string> values{{"query", query.question},
                                                  {"options", format_options(query.options)},
                                                  {"entries", format_entries(retrieval)}};
  return {{"system", prompts_.compose_system}, {"user", fill_template(prompts_.compose_user, values)}};
}

std::vector<ChatMessage> Controller::write_back_messages(const Query& query, const std::string& answer,
                                                         const RetrievalResult& retrieval) const {
  const std::map<std::string, std::string> values{{"query", query.question},
                                                  {"options", format_options(query.options)},
                                                  {"answer", answer},
                                                  {"entries", format_entries(retrieval)}};
  return {{"system", prompts_.write_back_system}, {"user", fill_template(prompts_.write_back_user, values)}};
}

Decision Controller::decide(const RetrievalResult& retrieval, const Query& query) {
  if (config_.policy == Policy::threshold || retrieval.empty()) return decide_threshold(retrieval, config_.tau);

  GenerationRequest request;
  request.messages = compose_messages(query, retrieval);
  request.kind = PromptKind::compose;
  request.qid = query.qid;
  for (const auto& scored : retrieval.entries) request.memory.push_back({scored.entry.meta.qid, scored.entry.answer});

  try {
    auto reply = mc_->generate(request);
    Decision d;
    d.mc_latency = reply.latency_seconds;
    if (!is_escalation(reply.text)) {
      d.kind = Decision::Kind::use_memory;
      d.entry = retrieval.entries.front();
      d.composed = std::move(reply.text);
    }
    return d;
  } catch (const ModelError&) {
    auto d = decide_threshold(retrieval, config_.tau);
    d.mc_fallback = true;
    return d;
  }
}

bool Controller::decide_write_back(const std::string& oracle_answer, const Query& query,
                                   const RetrievalResult& retrieval, double* mc_latency) {
  if (!config_.write_back_enabled) return false;
  const double dup = store_.config().dup_threshold;
  const bool duplicate = !retrieval.empty() && retrieval.entries.front().score >= dup;
  if (config_.policy == Policy::threshold) return !duplicate;

  bool approve = true;
  GenerationRequest request;
  request.messages = write_back_messages(query, oracle_answer, retrieval);
  request.kind = PromptKind::write_back_judgment;
  request.qid = query.qid;
  try {
    auto reply = mc_->generate(request);
    if (mc_latency) *mc_latency += reply.latency_seconds;
    approve = parse_write_back_judgment(reply.text);
  } catch (const ModelError&) {
    approve = true;  // threshold rule: store unless duplicate
  }
  return approve && !duplicate;
}

GenerationResult Controller::call_oracle(const Query& query) {
  GenerationRequest request;
  request.messages = answer_messages(query);
  request.kind = PromptKind::answer;
  request.qid = query.qid;
  try {
    return oracle_.generate(request);
  } catch (const ModelError& e) {
    throw OracleFailure("oracle call failed for qid '" + query.qid + "': " + e.what(), e);
  }
}

ServedAnswer Controller::handle_query(std::size_t t, const Query& query) {
  if (query.question.find_first_not_of(" \t\r\n") == std::string::npos)
    throw std::invalid_argument("handle_query: empty question");
  switch (config_.mode) {
    case RunMode::memboost: return handle_memboost(t, query);
    case RunMode::oracle_only: return handle_oracle_only(t, query);
    case RunMode::mc_only: return handle_mc_only(t, query);
  }
  throw std::logic_error("unreachable run mode");
}

ServedAnswer Controller::handle_memboost(std::size_t t, const Query& query) {
  ServedAnswer out;
  out.t = t;
  out.mc_cost = costs_.c_m;
  out.retrieval_cost = costs_.c_r;

  // (1) embed, (2) retrieve
  const auto start = Clock::now();
  auto embedding = embedder_.embed(query.question);
  const auto retrieval = store_.retrieve(embedding, config_.top_k);
  const double measured = std::chrono::duration<double>(Clock::now() - start).count();
  double latency = config_.modeled_retrieval_latency.value_or(measured);
  out.top_similarity = retrieval.top_score();

  // (3) decide
  auto decision = decide(retrieval, query);
  latency += decision.mc_latency;
  out.mc_fallback = decision.mc_fallback;

  if (decision.uses_memory()) {
    // (4) answer from memory
    out.source = AnswerSource::memory;
    out.memory_used = 1;
    out.answer = config_.policy == Policy::llm && !decision.mc_fallback ? std::move(decision.composed)
                                                                        : decision.entry->entry.answer;
    out.latency_seconds = latency;
    return out;
  }

  // (5) escalate
  auto oracle_reply = call_oracle(query);
  latency += oracle_reply.latency_seconds;
  out.source = AnswerSource::oracle;
  out.memory_used = 0;
  out.oracle_cost = costs_.c_o;
  out.answer = oracle_reply.text;

  // (6) write back
  double judge_latency = 0.0;
  if (decide_write_back(out.answer, query, retrieval, &judge_latency)) {
    EntryMeta meta{query.qid, query.category, static_cast<std::int64_t>(t)};
    out.wrote_back = store_.write_back(query.question, out.answer, std::move(meta), std::move(embedding)).inserted;
  }
  out.latency_seconds = latency + judge_latency;
  return out;
}

ServedAnswer Controller::handle_oracle_only(std::size_t t, const Query& query) {
  ServedAnswer out;
  out.t = t;
  out.mc_cost = costs_.c_m;
  out.retrieval_cost = costs_.c_r;
  auto reply = call_oracle(query);
  out.answer = std::move(reply.text);
  out.source = AnswerSource::oracle;
  out.oracle_cost = costs_.c_o;
  out.latency_seconds = reply.latency_seconds;
  return out;
}

ServedAnswer Controller::handle_mc_only(std::size_t t, const Query& query) {
  ServedAnswer out;
  out.t = t;
  out.mc_cost = costs_.c_m;
  out.retrieval_cost = costs_.c_r;
  GenerationRequest request;
  request.messages = answer_messages(query);
  request.kind = PromptKind::answer;
  request.qid = query.qid;
  auto reply = mc_->generate(request);
  out.answer = std::move(reply.text);
  out.source = AnswerSource::mc;
  out.latency_seconds = reply.latency_seconds;
  return out;
}

}  // namespace memgate
