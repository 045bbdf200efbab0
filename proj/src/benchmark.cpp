#include "memgate/benchmark.hpp"

#include <fstream>

namespace memgate {

std::string_view to_string(BackendMode mode) { return mode == BackendMode::remote ? "remote" : "scripted"; }

BackendMode parse_backend_mode(std::string_view text) {
  if (text == "scripted") return BackendMode::scripted;
  if (text == "remote") return BackendMode::remote;
  throw std::invalid_argument("unknown backend mode '" + std::string(text) + "'");
}

Backends make_scripted_backends(const std::vector<QueryRecord>& corpus, const ScriptedBackends& params,
                                const EmbedderConfig& embedder) {
  const auto oracle_seed = SplitMix64::substream(params.seed, "oracle").next();
  const auto mc_seed = SplitMix64::substream(params.seed, "mc").next();
  auto oracle_cfg = ScriptedModelConfig::from_corpus(corpus, params.oracle_accuracy, params.oracle_latency, oracle_seed);
  auto mc_cfg = ScriptedModelConfig::from_corpus(corpus, params.mc_accuracy, params.mc_latency, mc_seed);
  oracle_cfg.sleep = mc_cfg.sleep = params.sleep;
  Backends b;
  b.embedder = make_embedder(embedder);
  b.mc = std::make_unique<ScriptedModelClient>(std::move(mc_cfg));
  b.oracle = std::make_unique<ScriptedModelClient>(std::move(oracle_cfg));
  return b;
}

Backends make_remote_backends(const ModelEndpointConfig& mc, const ModelEndpointConfig& oracle,
                              const EmbedderConfig& embedder) {
  Backends b;
  b.embedder = make_embedder(embedder);
  auto mc_cfg = mc;
  mc_cfg.role = ModelRole::mc;
  auto oracle_cfg = oracle;
  oracle_cfg.role = ModelRole::oracle;
  b.mc = std::make_unique<HttpModelClient>(std::move(mc_cfg));
  b.oracle = std::make_unique<HttpModelClient>(std::move(oracle_cfg));
  return b;
}

StepRecord make_step(const ServedAnswer& served, const Query& query) {
  StepRecord s;
  s.t = served.t;
  s.qid = query.qid;
  s.memory_used = served.memory_used;
  s.source = served.source;
  s.latency_seconds = served.latency_seconds;
  s.predicted_label = extract_label(served.answer, query.options.size());
  s.gold_label = query.gold_label.value_or('?');
  s.correct = (s.predicted_label && query.gold_label && *s.predicted_label == *query.gold_label) ? 1 : 0;
  s.wrote_back = served.wrote_back;
  s.top_similarity = served.top_similarity;
  s.mc_fallback = served.mc_fallback;
  return s;
}

StepLog run_stream(Controller& controller, const std::vector<QueryRecord>& corpus,
                   const std::vector<QueryEvent>& events, const std::function<void(const StepRecord&)>& on_step) {
  StepLog log;
  log.reserve(events.size());
  for (const auto& ev : events) {
    const auto query = Query::from_record(corpus.at(ev.record));
    auto step = make_step(controller.handle_query(ev.t, query), query);
    if (on_step) on_step(step);
    log.push_back(std::move(step));
  }
  return log;
}

namespace {

BenchmarkResult run_loaded(const BenchmarkConfig& config, const std::vector<QueryRecord>& corpus,
                           Backends& backends);

std::vector<QueryRecord> corpus_of(const BenchmarkConfig& config) {
  return config.corpus.empty() ? load_corpus(config.corpus_path) : config.corpus;
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  const auto corpus = corpus_of(config);
  Backends backends = config.backend == BackendMode::scripted
                          ? make_scripted_backends(corpus, config.scripted, config.embedder)
                          : make_remote_backends(config.mc_endpoint, config.oracle_endpoint, config.embedder);
  if (config.backend == BackendMode::remote) {
    backends.oracle->health_check();
    if (config.controller.mode != RunMode::oracle_only) backends.mc->health_check();
  }
  return run_loaded(config, corpus, backends);
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config, Backends& backends) {
  return run_loaded(config, corpus_of(config), backends);
}

namespace {

BenchmarkResult run_loaded(const BenchmarkConfig& config, const std::vector<QueryRecord>& corpus,
                           Backends& backends) {
  const auto events = sample_stream(corpus, config.workload);

  auto controller_cfg = config.controller;
  if (config.backend == BackendMode::scripted && !controller_cfg.modeled_retrieval_latency)
    controller_cfg.modeled_retrieval_latency = config.scripted.retrieval_latency;

  MemoryStore store(backends.embedder->dim(), config.ame);
  const auto prompts = config.prompts_dir ? PromptTemplates::load(*config.prompts_dir) : PromptTemplates::defaults();
  Controller controller(*backends.embedder, store, backends.mc.get(), *backends.oracle, controller_cfg, config.costs,
                        prompts);

  std::ofstream steplog;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    steplog.open(config.output_dir / "steplog.jsonl", std::ios::trunc);
    if (!steplog) throw std::runtime_error("cannot write " + (config.output_dir / "steplog.jsonl").string());
  }

  BenchmarkResult result;
  std::size_t done = 0;
  try {
    result.log = run_stream(controller, corpus, events, [&](const StepRecord& step) {
      ++done;
      if (steplog.is_open()) steplog << step_to_json_line(step) << '\n';
    });
  } catch (const std::exception& e) {
    if (steplog.is_open()) steplog.flush();
    throw BenchmarkAborted(std::string("benchmark aborted at step ") + std::to_string(done + 1) + ": " + e.what(),
                           done);
  }

  result.summary = summarize(result.log, config.costs, std::string(to_string(config.controller.mode)),
                             config.memory_window, config.latency_window);
  result.store_entries = store.size();
  if (!config.output_dir.empty()) {
    steplog.close();
    emit_report(result.summary, config.output_dir);
  }
  if (config.snapshot_out) store.snapshot(*config.snapshot_out);
  return result;
}

}  // namespace

}  // namespace memgate
