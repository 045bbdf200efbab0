// memgate: benchmark runner and HTTP gateway for memory-backed LLM serving.
//
//   memgate bench --corpus data/business_synthetic.jsonl --alpha 1.1 --n 5000 --out runs/a11
//   memgate serve --corpus data/business_synthetic.jsonl --port 8080
//   memgate stream --corpus data/business_synthetic.jsonl --alpha 1.4 --n 20
//   memgate make-corpus --n 768 --out data/business_synthetic.jsonl
//
// Every option can also be set through an environment variable named
// GATEWAY_<OPTION>, e.g. GATEWAY_ALPHA=1.4 or GATEWAY_ORACLE_URL=...; an
// explicit flag wins over the environment.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memgate/benchmark.hpp"
#include "memgate/gateway.hpp"

namespace {

using namespace memgate;

std::string env_name(std::string flag) {
  std::string out = "GATEWAY_";
  for (char c : flag) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
  return app->add_option("--" + flag, value, help)->envname(env_name(flag))->capture_default_str();
}

/// Options shared by `bench` and `serve`.
struct CommonOptions {
  std::string corpus;
  double tau = 0.95;
  std::size_t topk = 3;
  std::string policy = "threshold";
  std::string mode = "memboost";
  std::string backend = "scripted";
  std::string mc_url;
  std::string oracle_url;
  std::string embed_url;
  std::string mc_model = "mc";
  std::string oracle_model = "oracle";
  std::string embed_model = "all-MiniLM-L6-v2";
  std::size_t embed_dim = 0;  // 0: 256 local, 384 remote
  std::string mc_extra = R"({"chat_template_kwargs": {"enable_thinking": false}})";
  double temperature = 0.0;
  int max_tokens = 4096;
  double timeout = 120.0;
  double cm = 0.01;
  double cr = 0.02;
  double co = 1.0;
  double dup_threshold = 0.999;
  bool no_write_back = false;
  std::string prompts;
  ScriptedBackends scripted;

  void add_to(CLI::App* app) {
    opt(app, "corpus", corpus, "Question corpus (JSONL)");
    opt(app, "tau", tau, "Similarity threshold for memory reuse");
    opt(app, "topk", topk, "Entries retrieved per query");
    opt(app, "policy", policy, "Decision policy")->check(CLI::IsMember({"threshold", "llm"}));
    opt(app, "mode", mode, "Run mode")->check(CLI::IsMember({"memboost", "oracle-only", "mc-only"}));
    opt(app, "backend", backend, "Model backends")->check(CLI::IsMember({"scripted", "remote"}));
    opt(app, "mc-url", mc_url, "Base URL of the controller model server");
    opt(app, "oracle-url", oracle_url, "Base URL of the oracle model server");
    opt(app, "embed-url", embed_url, "Full URL of the embeddings route (remote embedder)");
    opt(app, "mc-model", mc_model, "Controller model name");
    opt(app, "oracle-model", oracle_model, "Oracle model name");
    opt(app, "embed-model", embed_model, "Embedding model name");
    opt(app, "embed-dim", embed_dim, "Embedding dimension (0: 256 local / 384 remote)");
    opt(app, "mc-extra", mc_extra, "JSON object merged into controller requests");
    opt(app, "temperature", temperature, "Sampling temperature for both models");
    opt(app, "max-tokens", max_tokens, "Generation limit for both models");
    opt(app, "timeout", timeout, "Per-request timeout in seconds (remote backends)");
    opt(app, "cm", cm, "Controller cost per query");
    opt(app, "cr", cr, "Retrieval cost per query");
    opt(app, "co", co, "Oracle cost per call");
    opt(app, "dup-threshold", dup_threshold, "Cosine at which a write-back counts as duplicate");
    app->add_flag("--no-write-back", no_write_back, "Never store oracle answers")->envname(env_name("no-write-back"));
    opt(app, "prompts", prompts, "Directory of prompt template files");
    opt(app, "oracle-accuracy", scripted.oracle_accuracy, "Scripted oracle accuracy");
    opt(app, "mc-accuracy", scripted.mc_accuracy, "Scripted controller accuracy");
    opt(app, "oracle-latency", scripted.oracle_latency, "Scripted oracle latency (s)");
    opt(app, "mc-latency", scripted.mc_latency, "Scripted controller latency (s)");
    opt(app, "memory-latency", scripted.retrieval_latency, "Modeled embed+retrieve latency in scripted runs (s)");
    opt(app, "scripted-seed", scripted.seed, "Seed of the scripted models");
    app->add_flag("--sleep", scripted.sleep, "Scripted models really sleep for their latency")
        ->envname(env_name("sleep"));
  }

  ControllerConfig controller() const {
    ControllerConfig c;
    c.tau = tau;
    c.top_k = topk;
    c.policy = parse_policy(policy);
    c.mode = parse_run_mode(mode);
    c.write_back_enabled = !no_write_back;
    return c;
  }

  AmeConfig ame() const { return AmeConfig{topk, dup_threshold}; }
  CostParams costs() const { return CostParams{cm, cr, co}; }

  EmbedderConfig embedder() const {
    if (embed_url.empty()) return EmbedderConfig::local(embed_dim ? embed_dim : 256);
    auto c = EmbedderConfig::remote(embed_url, embed_model, embed_dim ? embed_dim : 384);
    c.timeout_seconds = std::min(timeout, 30.0);
    return c;
  }

  ModelEndpointConfig endpoint(ModelRole role) const {
    ModelEndpointConfig c;
    c.role = role;
    c.base_url = role == ModelRole::mc ? mc_url : oracle_url;
    c.model_name = role == ModelRole::mc ? mc_model : oracle_model;
    c.temperature = temperature;
    c.max_tokens = max_tokens;
    c.timeout_seconds = timeout;
    if (role == ModelRole::mc && !mc_extra.empty()) c.extra_body = nlohmann::json::parse(mc_extra);
    return c;
  }
};

memgate::Gateway* g_gateway = nullptr;

void on_signal(int) {
  if (g_gateway) g_gateway->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memgate: memory-backed LLM serving gateway and benchmark harness"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a Zipf workload end to end and write logs and reports");
  CommonOptions bench_opts;
  bench_opts.add_to(bench);
  WorkloadConfig workload;
  std::string out_dir = "run";
  std::string snapshot_out;
  opt(bench, "alpha", workload.alpha, "Zipf exponent");
  opt(bench, "n", workload.num_requests, "Number of requests");
  opt(bench, "seed", workload.seed, "Workload seed");
  opt(bench, "out", out_dir, "Output directory");
  opt(bench, "snapshot-out", snapshot_out, "Write the final memory snapshot here");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  CommonOptions serve_opts;
  serve_opts.add_to(serve);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string snapshot;
  std::string knowledge;
  opt(serve, "host", host, "Listen address");
  opt(serve, "port", port, "Listen port (0: any free port)");
  opt(serve, "snapshot", snapshot, "Memory snapshot loaded at startup and written at shutdown");
  opt(serve, "knowledge", knowledge, "Snapshot-format file ingested into memory at startup");

  // stream
  auto* stream = app.add_subcommand("stream", "Print the sampled query stream as JSONL {t, qid}");
  std::string stream_corpus;
  WorkloadConfig stream_workload;
  opt(stream, "corpus", stream_corpus, "Question corpus (JSONL)")->required();
  opt(stream, "alpha", stream_workload.alpha, "Zipf exponent");
  opt(stream, "n", stream_workload.num_requests, "Number of requests");
  opt(stream, "seed", stream_workload.seed, "Workload seed");

  // make-corpus
  auto* make = app.add_subcommand("make-corpus", "Write the synthetic business question corpus");
  std::size_t make_n = 768;
  std::uint64_t make_seed = 1;
  std::string make_out = "-";
  opt(make, "n", make_n, "Number of questions");
  opt(make, "seed", make_seed, "Generator seed");
  opt(make, "out", make_out, "Output file, '-' for stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      if (bench_opts.corpus.empty()) throw CLI::RequiredError("--corpus");
      BenchmarkConfig cfg;
      cfg.corpus_path = bench_opts.corpus;
      cfg.workload = workload;
      cfg.controller = bench_opts.controller();
      cfg.ame = bench_opts.ame();
      cfg.costs = bench_opts.costs();
      cfg.backend = parse_backend_mode(bench_opts.backend);
      cfg.scripted = bench_opts.scripted;
      cfg.embedder = bench_opts.embedder();
      cfg.mc_endpoint = bench_opts.endpoint(ModelRole::mc);
      cfg.oracle_endpoint = bench_opts.endpoint(ModelRole::oracle);
      if (!bench_opts.prompts.empty()) cfg.prompts_dir = bench_opts.prompts;
      cfg.output_dir = out_dir;
      if (!snapshot_out.empty()) cfg.snapshot_out = snapshot_out;

      const auto result = run_benchmark(cfg);
      const auto& s = result.summary;
      std::cout << "mode=" << s.mode << " steps=" << s.steps << " accuracy=" << s.accuracy
                << " oracle_calls=" << s.oracle_call_count << " memory_hits=" << s.memory_hit_count
                << " total_cost=" << s.total_cost << " oracle_only_cost=" << s.oracle_only_cost
                << " savings=" << (s.savings_holds ? "yes" : "no") << " out=" << out_dir << '\n';
      return 0;
    }

    if (*serve) {
      GatewayConfig cfg;
      cfg.host = host;
      cfg.port = port;
      cfg.controller = serve_opts.controller();
      cfg.embedder = serve_opts.embedder();
      cfg.ame = serve_opts.ame();
      cfg.costs = serve_opts.costs();
      cfg.backend = parse_backend_mode(serve_opts.backend);
      cfg.mc_endpoint = serve_opts.endpoint(ModelRole::mc);
      cfg.oracle_endpoint = serve_opts.endpoint(ModelRole::oracle);
      cfg.scripted = serve_opts.scripted;
      if (!serve_opts.corpus.empty()) cfg.corpus_path = serve_opts.corpus;
      if (!snapshot.empty()) cfg.snapshot_path = snapshot;
      if (!knowledge.empty()) cfg.knowledge_path = knowledge;
      if (!serve_opts.prompts.empty()) cfg.prompts_dir = serve_opts.prompts;

      Gateway gateway(cfg);
      const int bound = gateway.bind();
      g_gateway = &gateway;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "memgate listening on " << host << ':' << bound << '\n';
      gateway.listen();
      g_gateway = nullptr;
      gateway.shutdown();
      std::cerr << "memgate stopped\n";
      return 0;
    }

    if (*stream) {
      const auto corpus = load_corpus(stream_corpus);
      for (const auto& ev : sample_stream(corpus, stream_workload)) {
        std::cout << nlohmann::ordered_json{{"t", ev.t}, {"qid", corpus[ev.record].qid}}.dump() << '\n';
      }
      return 0;
    }

    if (*make) {
      const auto corpus = synthetic_corpus(make_n, make_seed);
      std::ofstream file;
      if (make_out != "-") {
        file.open(make_out, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write " + make_out);
      }
      std::ostream& out = make_out == "-" ? std::cout : file;
      for (const auto& r : corpus) out << serialize_query_record(r) << '\n';
      return 0;
    }
  } catch (const BenchmarkAborted& e) {
    std::cerr << "error: " << e.what() << " (" << e.completed_steps() << " steps logged)\n";
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
