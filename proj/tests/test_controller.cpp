#include <gtest/gtest.h>

#include <map>
#include <set>

#include "memgate/benchmark.hpp"
#include "memgate/controller.hpp"
#include "test_support.hpp"

using namespace memgate;

namespace {

/// Forwards to a scripted client and counts calls per prompt kind.
class CountingClient final : public ModelClient {
 public:
  explicit CountingClient(ScriptedModelConfig config) : inner_(std::move(config)) {}

  GenerationResult generate(const GenerationRequest& request) override {
    ++calls;
    ++by_kind[request.kind];
    return inner_.generate(request);
  }

  int calls = 0;
  std::map<PromptKind, int> by_kind;

 private:
  ScriptedModelClient inner_;
};

class FailingClient final : public ModelClient {
 public:
  GenerationResult generate(const GenerationRequest&) override {
    ++calls;
    throw ModelError(ModelError::Kind::http_status, "backend down", 503, 3);
  }
  int calls = 0;
};

RetrievalResult retrieval_with_scores(std::initializer_list<double> scores) {
  RetrievalResult r;
  r.k_requested = 3;
  std::int64_t id = 1;
  for (double s : scores) {
    ScoredEntry e;
    e.entry.entry_id = id++;
    e.entry.answer = "stored " + std::to_string(e.entry.entry_id);
    e.score = s;
    r.entries.push_back(e);
  }
  return r;
}

struct Fixture {
  std::vector<QueryRecord> corpus = synthetic_corpus(64, 3);
  LocalEmbedder embedder;
  MemoryStore store{embedder.dim()};
  CountingClient oracle{ScriptedModelConfig::from_corpus(corpus, 1.0, 0.2, 1)};
  CountingClient mc{ScriptedModelConfig::from_corpus(corpus, 0.4, 0.02, 2)};

  ControllerConfig config(Policy policy = Policy::threshold) {
    ControllerConfig c;
    c.policy = policy;
    c.modeled_retrieval_latency = 0.01;
    return c;
  }
  Query query(std::size_t i) { return Query::from_record(corpus[i]); }
};

}  // namespace

TEST(DecideThreshold, Boundaries) {
  EXPECT_FALSE(decide_threshold(RetrievalResult{}, 0.95).uses_memory());
  const auto exact = decide_threshold(retrieval_with_scores({0.95, 0.3}), 0.95);
  ASSERT_TRUE(exact.uses_memory());
  EXPECT_EQ(exact.entry->entry.entry_id, 1);
  EXPECT_FALSE(decide_threshold(retrieval_with_scores({0.95 - 1e-6}), 0.95).uses_memory());
  EXPECT_TRUE(decide_threshold(retrieval_with_scores({1.0}), 1.0).uses_memory());
}

TEST(ControllerConfig, Validation) {
  ControllerConfig c;
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.tau = 1.01;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.tau = 1.0;
  c.top_k = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Controller, LlmPolicyNeedsMc) {
  Fixture f;
  EXPECT_THROW(Controller(f.embedder, f.store, nullptr, f.oracle, f.config(Policy::llm), {}),
               std::invalid_argument);
  auto mc_only = f.config();
  mc_only.mode = RunMode::mc_only;
  EXPECT_THROW(Controller(f.embedder, f.store, nullptr, f.oracle, mc_only, {}), std::invalid_argument);
}

TEST(Controller, ColdStartEscalatesAndWritesBack) {
  Fixture f;
  Controller c(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
  const auto a = c.handle_query(1, f.query(0));
  EXPECT_EQ(a.source, AnswerSource::oracle);
  EXPECT_EQ(a.memory_used, 0);
  EXPECT_TRUE(a.wrote_back);
  EXPECT_FALSE(a.top_similarity.has_value());
  EXPECT_EQ(a.oracle_cost, 1.0);
  EXPECT_DOUBLE_EQ(a.latency_seconds, 0.21);
  EXPECT_EQ(f.oracle.calls, 1);
  EXPECT_EQ(f.store.stats().last_entry_id, 1);
}

TEST(Controller, RepeatServedFromMemoryVerbatim) {
  Fixture f;
  Controller c(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
  const auto first = c.handle_query(1, f.query(0));
  const auto again = c.handle_query(2, f.query(0));
  EXPECT_EQ(again.source, AnswerSource::memory);
  EXPECT_EQ(again.memory_used, 1);
  EXPECT_GE(*again.top_similarity, 0.999);
  EXPECT_EQ(again.answer, first.answer);
  EXPECT_EQ(again.oracle_cost, 0.0);
  EXPECT_FALSE(again.wrote_back);
  EXPECT_EQ(f.oracle.calls, 1);
}

TEST(Controller, DistinctQueryEscalates) {
  Fixture f;
  ASSERT_LT(cosine(f.embedder.embed(f.corpus[0].question), f.embedder.embed(f.corpus[1].question)), 0.95);
  Controller c(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
  c.handle_query(1, f.query(0));
  const auto b = c.handle_query(2, f.query(1));
  EXPECT_EQ(b.source, AnswerSource::oracle);
  EXPECT_LT(*b.top_similarity, 0.95);
  EXPECT_TRUE(b.wrote_back);
}

TEST(Controller, EmptyQuestionRejected) {
  Fixture f;
  Controller c(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
  auto q = f.query(0);
  q.question = "  ";
  EXPECT_THROW(c.handle_query(1, q), std::invalid_argument);
}

TEST(Controller, WriteBackDecision) {
  Fixture f;
  auto disabled = f.config();
  disabled.write_back_enabled = false;
  Controller off(f.embedder, f.store, nullptr, f.oracle, disabled, {});
  EXPECT_FALSE(off.decide_write_back("x", f.query(0), RetrievalResult{}));
  EXPECT_FALSE(off.handle_query(1, f.query(0)).wrote_back);
  EXPECT_EQ(f.store.size(), 0u);

  Controller on(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
  EXPECT_TRUE(on.decide_write_back("x", f.query(0), RetrievalResult{}));
  EXPECT_TRUE(on.decide_write_back("x", f.query(0), retrieval_with_scores({0.9989})));
  EXPECT_FALSE(on.decide_write_back("x", f.query(0), retrieval_with_scores({0.9995})));
}

TEST(Controller, InjectedNearDuplicateSuppressesWriteBack) {
  Fixture f;
  // A synthetic entry at cosine 0.9995 to the query, with tau raised to 1 so
  // the controller escalates instead of reusing it.
  const auto q = f.embedder.embed(f.corpus[0].question);
  std::vector<float> near = q.values;
  std::size_t k = 0;
  while (near[k] == 0.0f) ++k;
  std::vector<float> other(near.size(), 0.0f);
  other[(k + 1) % near.size()] = 1.0f;
  const double proj = cosine(near, other);
  for (std::size_t i = 0; i < other.size(); ++i) other[i] -= static_cast<float>(proj) * near[i];
  normalize(other);
  const double target = 0.9995;
  std::vector<float> mixed(near.size());
  for (std::size_t i = 0; i < near.size(); ++i)
    mixed[i] = static_cast<float>(target * near[i] + std::sqrt(1 - target * target) * other[i]);
  normalize(mixed);
  const double score = cosine(q.values, mixed);
  ASSERT_GE(score, 0.999);
  ASSERT_LT(score, 0.9999);
  f.store.write_back("paraphrase", "old", EntryMeta{"p", "x", 0}, EmbeddingVector{mixed});

  auto cfg = f.config();
  cfg.tau = 1.0;
  Controller c(f.embedder, f.store, nullptr, f.oracle, cfg, {});
  const auto a = c.handle_query(1, f.query(0));
  EXPECT_EQ(a.source, AnswerSource::oracle);
  EXPECT_FALSE(a.wrote_back);
  EXPECT_EQ(f.store.size(), 1u);
}

TEST(Controller, OracleFailureLeavesNoWriteBack) {
  Fixture f;
  FailingClient broken;
  Controller c(f.embedder, f.store, nullptr, broken, f.config(), {});
  try {
    c.handle_query(1, f.query(0));
    FAIL();
  } catch (const OracleFailure& e) {
    EXPECT_EQ(e.cause().status(), 503);
  }
  EXPECT_EQ(f.store.size(), 0u);
}

TEST(Controller, OracleOnlyAndMcOnlyModes) {
  Fixture f;
  auto oo = f.config();
  oo.mode = RunMode::oracle_only;
  Controller oracle_only(f.embedder, f.store, nullptr, f.oracle, oo, {});
  for (int i = 0; i < 2; ++i) {
    const auto a = oracle_only.handle_query(i + 1, f.query(0));
    EXPECT_EQ(a.source, AnswerSource::oracle);
    EXPECT_FALSE(a.wrote_back);
  }
  EXPECT_EQ(f.store.size(), 0u);

  auto mo = f.config();
  mo.mode = RunMode::mc_only;
  Controller mc_only(f.embedder, f.store, &f.mc, f.oracle, mo, {});
  const auto a = mc_only.handle_query(1, f.query(0));
  EXPECT_EQ(a.source, AnswerSource::mc);
  EXPECT_EQ(a.memory_used, 0);
  EXPECT_EQ(f.oracle.calls, 2);
}

TEST(Controller, LlmPolicyComposesFromMemory) {
  Fixture f;
  Controller c(f.embedder, f.store, &f.mc, f.oracle, f.config(Policy::llm), {});
  const auto first = c.handle_query(1, f.query(0));
  EXPECT_EQ(first.source, AnswerSource::oracle);
  EXPECT_TRUE(first.wrote_back);
  EXPECT_EQ(f.mc.by_kind[PromptKind::write_back_judgment], 1);

  const auto repeat = c.handle_query(2, f.query(0));
  EXPECT_EQ(repeat.source, AnswerSource::memory);
  EXPECT_EQ(repeat.answer, first.answer);
  EXPECT_EQ(f.mc.by_kind[PromptKind::compose], 1);

  const auto other = c.handle_query(3, f.query(1));
  EXPECT_EQ(other.source, AnswerSource::oracle);
  EXPECT_EQ(f.oracle.calls, 2);
}

TEST(Controller, LlmPolicyFallsBackWhenMcFails) {
  Fixture f;
  FailingClient broken;
  Controller c(f.embedder, f.store, &broken, f.oracle, f.config(Policy::llm), {});
  const auto first = c.handle_query(1, f.query(0));
  EXPECT_EQ(first.source, AnswerSource::oracle);
  EXPECT_TRUE(first.wrote_back);
  const auto repeat = c.handle_query(2, f.query(0));
  EXPECT_EQ(repeat.source, AnswerSource::memory);
  EXPECT_TRUE(repeat.mc_fallback);
  EXPECT_EQ(repeat.answer, first.answer);
}

TEST(Controller, MessagesCarryQueryAndOptions) {
  Fixture f;
  Controller c(f.embedder, f.store, &f.mc, f.oracle, f.config(Policy::llm), {});
  const auto q = f.query(0);
  std::string all;
  for (const auto& m : c.answer_messages(q)) all += m.content;
  EXPECT_NE(all.find(q.question), std::string::npos);
  EXPECT_NE(all.find("A. " + q.options[0]), std::string::npos);
  const auto retrieval = retrieval_with_scores({0.5});
  std::string compose;
  for (const auto& m : c.compose_messages(q, retrieval)) compose += m.content;
  EXPECT_NE(compose.find("stored 1"), std::string::npos);
  EXPECT_NE(compose.find(std::string(kEscalationToken)), std::string::npos);
}

// Property: oracle double sees zero calls on memory-path steps; cold-start and
// repeat laws hold over a Zipf stream; escalations equal distinct qids.
TEST(ControllerProperty, CountingDoubleAndDiscoveryLaws) {
  Fixture f;
  Controller c(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
  WorkloadConfig w;
  w.alpha = 1.1;
  w.num_requests = 1500;
  w.seed = 9;
  std::set<std::string> seen;
  for (const auto& e : sample_stream(f.corpus, w)) {
    const int before = f.oracle.calls;
    const auto q = Query::from_record(f.corpus[e.record]);
    const auto a = c.handle_query(e.t, q);
    const bool first = seen.insert(q.qid).second;
    if (a.memory_used == 1) {
      ASSERT_EQ(f.oracle.calls, before);
      ASSERT_EQ(a.oracle_cost, 0.0);
    } else {
      ASSERT_EQ(f.oracle.calls, before + 1);
    }
    ASSERT_EQ(a.memory_used, first ? 0 : 1) << "t=" << e.t;
  }
  EXPECT_EQ(static_cast<std::size_t>(f.oracle.calls), seen.size());
}

TEST(ControllerProperty, DeterministicRuns) {
  auto run = [] {
    Fixture f;
    Controller c(f.embedder, f.store, nullptr, f.oracle, f.config(), {});
    WorkloadConfig w;
    w.num_requests = 400;
    std::string out;
    for (const auto& e : sample_stream(f.corpus, w)) {
      const auto a = c.handle_query(e.t, Query::from_record(f.corpus[e.record]));
      out += a.answer + "|" + std::to_string(a.memory_used) + "|" + std::to_string(a.wrote_back) + "\n";
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}
