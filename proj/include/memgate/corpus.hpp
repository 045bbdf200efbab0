#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace memgate {

/// Highest option label supported by the corpus format ("A".."J").
inline constexpr std::size_t kMaxOptions = 10;

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One multiple-choice question. Option i carries label 'A' + i.
struct QueryRecord {
  std::string qid;
  std::string question;
  std::vector<std::string> options;
  char gold_label = 'A';
  std::string category;

  std::size_t option_count() const { return options.size(); }
};

struct WorkloadConfig {
  double alpha = 1.1;
  std::size_t num_requests = 5000;
  std::uint64_t seed = 1;
  std::optional<std::size_t> corpus_size_limit;

  /// Throws std::invalid_argument on alpha <= 0 or num_requests == 0.
  void validate() const;
};

/// Step t (1-based) of a workload; `record` indexes into the corpus the
/// stream was sampled from.
struct QueryEvent {
  std::size_t t = 0;
  std::size_t record = 0;
};

/// Reads one JSON object per line. Blank lines are skipped; line numbers in
/// error messages are 1-based file lines.
std::vector<QueryRecord> load_corpus(const std::filesystem::path& path,
                                     std::optional<std::size_t> limit = std::nullopt);

QueryRecord parse_query_record(const std::string& line);
std::string serialize_query_record(const QueryRecord& record);

/// Rank-k probability proportional to k^-alpha, k = 1..n.
std::vector<double> zipf_probabilities(std::size_t n, double alpha);

/// Seeded permutation: element r is the corpus index holding rank r + 1.
std::vector<std::size_t> rank_assignment(std::size_t corpus_size, std::uint64_t seed);

/// Draws config.num_requests events. Rank assignment uses the "shuffle"
/// sub-stream of config.seed; draws use the "draws" sub-stream.
std::vector<QueryEvent> sample_stream(const std::vector<QueryRecord>& corpus,
                                      const WorkloadConfig& config);

/// Deterministic stand-in corpus of business-style multiple-choice
/// questions, for runs where no licensed question bank is available.
std::vector<QueryRecord> synthetic_corpus(std::size_t n, std::uint64_t seed = 1);

}  // namespace memgate
