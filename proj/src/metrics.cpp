#include "memgate/metrics.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace memgate {

using ojson = nlohmann::ordered_json;

void CostParams::validate() const {
  if (!(c_m >= 0.0 && c_r >= 0.0 && c_o >= 0.0)) throw std::invalid_argument("cost parameters must be >= 0");
}

std::string_view to_string(AnswerSource source) {
  switch (source) {
    case AnswerSource::memory: return "memory";
    case AnswerSource::oracle: return "oracle";
    case AnswerSource::mc: return "mc";
  }
  return "oracle";
}

AnswerSource parse_answer_source(std::string_view text) {
  if (text == "memory") return AnswerSource::memory;
  if (text == "oracle") return AnswerSource::oracle;
  if (text == "mc") return AnswerSource::mc;
  throw std::invalid_argument("unknown answer source '" + std::string(text) + "'");
}

void validate_log(const StepLog& log) {
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& s = log[i];
    if (s.t != i + 1) throw std::invalid_argument("step log: t must run 1, 2, ... (row " + std::to_string(i) + ")");
    const int expect = (s.predicted_label && *s.predicted_label == s.gold_label) ? 1 : 0;
    if (s.correct != expect) throw std::invalid_argument("step log: correct flag disagrees at t=" + std::to_string(s.t));
  }
}

namespace {

void require_steps(const StepLog& log, const char* what) {
  if (log.empty()) throw std::invalid_argument(std::string(what) + ": empty step log");
}

double step_oracle_cost(const StepRecord& s, const CostParams& p) { return s.oracle_cost.value_or(p.c_o); }

/// The oracle was called at this step. Equals 1 - I_t except for
/// MC-only baseline steps, which neither hit memory nor call the oracle.
bool oracle_called(const StepRecord& s) { return s.memory_used == 0 && s.source != AnswerSource::mc; }

bool has_overrides(const StepLog& log) {
  for (const auto& s : log)
    if (s.oracle_cost) return true;
  return false;
}

}  // namespace

double total_cost(const StepLog& log, const CostParams& params) {
  require_steps(log, "total_cost");
  const double overhead = static_cast<double>(log.size()) * (params.c_m + params.c_r);
  if (!has_overrides(log)) {
    std::size_t escalations = 0;
    for (const auto& s : log) escalations += oracle_called(s) ? 1 : 0;
    return overhead + static_cast<double>(escalations) * params.c_o;
  }
  double oracle = 0.0;
  for (const auto& s : log)
    if (oracle_called(s)) oracle += step_oracle_cost(s, params);
  return overhead + oracle;
}

double oracle_only_cost(const StepLog& log, const CostParams& params) {
  require_steps(log, "oracle_only_cost");
  if (!has_overrides(log)) return static_cast<double>(log.size()) * params.c_o;
  double sum = 0.0;
  for (const auto& s : log) sum += step_oracle_cost(s, params);
  return sum;
}

bool savings_condition(const StepLog& log, const CostParams& params) {
  require_steps(log, "savings_condition");
  const double overhead = static_cast<double>(log.size()) * (params.c_m + params.c_r);
  double avoided = 0.0;
  if (!has_overrides(log)) {
    std::size_t hits = 0;
    for (const auto& s : log) hits += oracle_called(s) ? 0 : 1;
    avoided = static_cast<double>(hits) * params.c_o;
  } else {
    for (const auto& s : log)
      if (!oracle_called(s)) avoided += step_oracle_cost(s, params);
  }
  return avoided > overhead;
}

namespace {

template <typename Value>
std::vector<std::pair<std::size_t, double>> trailing_mean(const StepLog& log, std::size_t window, Value value) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  std::vector<std::pair<std::size_t, double>> out;
  if (log.size() < window) return out;
  out.reserve(log.size() - window + 1);
  // Each point is summed afresh so it does not depend on earlier rounding.
  for (std::size_t end = window; end <= log.size(); ++end) {
    double sum = 0.0;
    for (std::size_t i = end - window; i < end; ++i) sum += value(log[i]);
    out.emplace_back(log[end - 1].t, sum / static_cast<double>(window));
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::size_t, double>> windowed_memory_rate(const StepLog& log, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  std::vector<std::pair<std::size_t, double>> out;
  if (log.size() < window) return out;
  // Integer running count: exact at every t.
  std::size_t count = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    count += static_cast<std::size_t>(log[i].memory_used);
    if (i >= window) count -= static_cast<std::size_t>(log[i - window].memory_used);
    if (i + 1 >= window) out.emplace_back(log[i].t, static_cast<double>(count) / static_cast<double>(window));
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> windowed_latency(const StepLog& log, std::size_t window) {
  return trailing_mean(log, window, [](const StepRecord& s) { return s.latency_seconds; });
}

double accuracy(const StepLog& log) {
  require_steps(log, "accuracy");
  std::size_t right = 0;
  for (const auto& s : log) right += (s.predicted_label && *s.predicted_label == s.gold_label) ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(log.size());
}

RunSummary summarize(const StepLog& log, const CostParams& params, std::string mode, std::size_t memory_window,
                     std::size_t latency_window) {
  RunSummary s;
  s.mode = std::move(mode);
  s.steps = log.size();
  s.params = params;
  s.memory_window = memory_window;
  s.latency_window = latency_window;
  if (log.empty()) return s;
  s.accuracy = accuracy(log);
  s.total_cost = total_cost(log, params);
  s.oracle_only_cost = oracle_only_cost(log, params);
  s.savings_holds = savings_condition(log, params);
  double latency_sum = 0.0;
  for (const auto& step : log) {
    switch (step.source) {
      case AnswerSource::memory: ++s.memory_hit_count; break;
      case AnswerSource::oracle: ++s.oracle_call_count; break;
      case AnswerSource::mc: ++s.mc_answer_count; break;
    }
    s.writes += step.wrote_back ? 1 : 0;
    latency_sum += step.latency_seconds;
  }
  s.mean_latency_seconds = latency_sum / static_cast<double>(log.size());
  s.memory_rate = windowed_memory_rate(log, memory_window);
  s.latency = windowed_latency(log, latency_window);
  return s;
}

std::string step_to_json_line(const StepRecord& step) {
  ojson j;
  j["t"] = step.t;
  j["qid"] = step.qid;
  j["memory_used"] = step.memory_used;
  j["source"] = to_string(step.source);
  j["latency_seconds"] = step.latency_seconds;
  j["predicted_label"] = step.predicted_label ? ojson(std::string(1, *step.predicted_label)) : ojson(nullptr);
  j["gold_label"] = std::string(1, step.gold_label);
  j["correct"] = step.correct;
  j["wrote_back"] = step.wrote_back;
  j["top_similarity"] = step.top_similarity ? ojson(*step.top_similarity) : ojson(nullptr);
  if (step.mc_fallback) j["mc_fallback"] = true;
  if (step.oracle_cost) j["oracle_cost"] = *step.oracle_cost;
  return j.dump();
}

StepRecord step_from_json_line(const std::string& line) {
  const auto j = ojson::parse(line);
  StepRecord s;
  s.t = j.at("t").get<std::size_t>();
  s.qid = j.at("qid").get<std::string>();
  s.memory_used = j.at("memory_used").get<int>();
  s.source = parse_answer_source(j.at("source").get<std::string>());
  s.latency_seconds = j.at("latency_seconds").get<double>();
  if (const auto& p = j.at("predicted_label"); !p.is_null()) s.predicted_label = p.get<std::string>().at(0);
  s.gold_label = j.at("gold_label").get<std::string>().at(0);
  s.correct = j.at("correct").get<int>();
  s.wrote_back = j.at("wrote_back").get<bool>();
  if (const auto& sim = j.at("top_similarity"); !sim.is_null()) s.top_similarity = sim.get<double>();
  s.mc_fallback = j.value("mc_fallback", false);
  if (j.contains("oracle_cost")) s.oracle_cost = j.at("oracle_cost").get<double>();
  return s;
}

StepLog load_step_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open step log " + path.string());
  StepLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      log.push_back(step_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

std::string summary_to_json(const RunSummary& s) {
  ojson j;
  j["mode"] = s.mode;
  j["steps"] = s.steps;
  j["accuracy"] = s.accuracy;
  j["total_cost"] = s.total_cost;
  j["oracle_only_cost"] = s.oracle_only_cost;
  j["savings_holds"] = s.savings_holds;
  j["oracle_call_count"] = s.oracle_call_count;
  j["memory_hit_count"] = s.memory_hit_count;
  j["mc_answer_count"] = s.mc_answer_count;
  j["writes"] = s.writes;
  j["mean_latency_seconds"] = s.mean_latency_seconds;
  j["cost_params"] = {{"c_m", s.params.c_m}, {"c_r", s.params.c_r}, {"c_o", s.params.c_o}};
  j["memory_window"] = s.memory_window;
  j["latency_window"] = s.latency_window;
  j["final_memory_rate"] = s.memory_rate.empty() ? ojson(nullptr) : ojson(s.memory_rate.back().second);
  j["final_latency"] = s.latency.empty() ? ojson(nullptr) : ojson(s.latency.back().second);
  return j.dump(2);
}

void write_series_csv(const std::filesystem::path& path, const std::string& value_column,
                      const std::vector<std::pair<std::size_t, double>>& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t," << value_column << '\n';
  char buf[64];
  for (const auto& [t, v] : series) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out << t << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
  if (!out) throw std::runtime_error("I/O error while writing " + path.string());
}

void emit_report(const RunSummary& summary, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    out << summary_to_json(summary) << '\n';
  }
  write_series_csv(dir / "memrate.csv", "memory_rate", summary.memory_rate);
  write_series_csv(dir / "latency.csv", "latency_seconds", summary.latency);
}

}  // namespace memgate
