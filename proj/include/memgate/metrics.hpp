#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace memgate {

/// Per-query costs in abstract units: controller, retrieval, oracle call.
struct CostParams {
  double c_m = 0.01;
  double c_r = 0.02;
  double c_o = 1.0;

  void validate() const;
};

enum class AnswerSource { memory, oracle, mc };

std::string_view to_string(AnswerSource source);
AnswerSource parse_answer_source(std::string_view text);

struct StepRecord {
  std::size_t t = 0;
  std::string qid;
  int memory_used = 0;  // I_t
  AnswerSource source = AnswerSource::oracle;
  double latency_seconds = 0.0;
  std::optional<char> predicted_label;
  char gold_label = 'A';
  int correct = 0;
  bool wrote_back = false;
  std::optional<double> top_similarity;
  bool mc_fallback = false;
  /// Per-step oracle cost c_O(x_t); absent means CostParams::c_o.
  std::optional<double> oracle_cost;
};

using StepLog = std::vector<StepRecord>;

/// Throws std::invalid_argument if t is not 1, 2, ... or correct disagrees
/// with the labels.
void validate_log(const StepLog& log);

/// sum_t (c_M + c_R) + sum_t (1 - I_t) c_O(x_t). Throws on an empty log.
/// Steps answered by the MC-only baseline (source mc) made no oracle call
/// and are charged no c_O term; savings_condition counts them as avoided.
double total_cost(const StepLog& log, const CostParams& params);
/// sum_t c_O(x_t).
double oracle_only_cost(const StepLog& log, const CostParams& params);
/// sum_t I_t c_O(x_t) > sum_t (c_M + c_R).
bool savings_condition(const StepLog& log, const CostParams& params);

/// Trailing means over `window` steps, one point per t >= window.
std::vector<std::pair<std::size_t, double>> windowed_memory_rate(const StepLog& log, std::size_t window = 200);
std::vector<std::pair<std::size_t, double>> windowed_latency(const StepLog& log, std::size_t window = 100);

/// Mean of `correct`; an absent prediction counts as wrong.
double accuracy(const StepLog& log);

struct RunSummary {
  std::string mode;
  std::size_t steps = 0;
  double accuracy = 0.0;
  double total_cost = 0.0;
  double oracle_only_cost = 0.0;
  bool savings_holds = false;
  std::size_t oracle_call_count = 0;
  std::size_t memory_hit_count = 0;
  std::size_t mc_answer_count = 0;  // mc-only baseline steps
  std::size_t writes = 0;
  double mean_latency_seconds = 0.0;
  CostParams params;
  std::size_t memory_window = 200;
  std::size_t latency_window = 100;
  std::vector<std::pair<std::size_t, double>> memory_rate;
  std::vector<std::pair<std::size_t, double>> latency;
};

RunSummary summarize(const StepLog& log, const CostParams& params, std::string mode,
                     std::size_t memory_window = 200, std::size_t latency_window = 100);

std::string step_to_json_line(const StepRecord& step);
StepRecord step_from_json_line(const std::string& line);
StepLog load_step_log(const std::filesystem::path& path);

/// summary.json body (series excluded; they go to the CSV files).
std::string summary_to_json(const RunSummary& summary);

/// Header row plus one "t,value" row per point.
void write_series_csv(const std::filesystem::path& path, const std::string& value_column,
                      const std::vector<std::pair<std::size_t, double>>& series);

/// Writes summary.json, memrate.csv and latency.csv into dir.
void emit_report(const RunSummary& summary, const std::filesystem::path& dir);

}  // namespace memgate
