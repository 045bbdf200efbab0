#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "memgate/embedding.hpp"

namespace memgate {

struct EntryMeta {
  std::string qid;
  std::string category;
  std::int64_t timestamp = 0;  // step index; stored, not used for ranking
};

struct MemoryEntry {
  std::int64_t entry_id = 0;
  std::string query;
  std::string answer;
  EntryMeta meta;
  EmbeddingVector embedding;
};

struct ScoredEntry {
  MemoryEntry entry;
  double score = 0.0;
};

/// Sorted by score descending, ties by ascending entry_id.
struct RetrievalResult {
  std::vector<ScoredEntry> entries;
  std::size_t k_requested = 0;

  bool empty() const { return entries.empty(); }
  std::optional<double> top_score() const {
    if (entries.empty()) return std::nullopt;
    return entries.front().score;
  }
};

struct AmeConfig {
  std::size_t top_k = 3;
  double dup_threshold = 0.999;

  void validate() const;
};

struct WriteResult {
  bool inserted = false;
  std::optional<std::int64_t> entry_id;
};

struct AmeStats {
  std::size_t entry_count = 0;
  std::map<std::string, std::size_t> per_category;
  std::int64_t last_entry_id = 0;
};

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IndexHit {
  std::size_t row = 0;
  double score = 0.0;
};

/// Row-addressed inner-product index. Rows are appended in insertion order.
class VectorIndex {
 public:
  virtual ~VectorIndex() = default;
  virtual void add(std::span<const float> vec) = 0;
  /// Best k rows by score, ties to the lower row.
  virtual std::vector<IndexHit> search(std::span<const float> query, std::size_t k) const = 0;
  /// Highest score over all rows, or nullopt when empty.
  virtual std::optional<double> max_score(std::span<const float> query) const = 0;
  virtual std::size_t size() const = 0;
};

/// Exact search by scanning every row.
class FlatIndex final : public VectorIndex {
 public:
  explicit FlatIndex(std::size_t dim) : dim_(dim) {}

  void add(std::span<const float> vec) override;
  std::vector<IndexHit> search(std::span<const float> query, std::size_t k) const override;
  std::optional<double> max_score(std::span<const float> query) const override;
  std::size_t size() const override { return rows_; }

 private:
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

  std::size_t dim_;
  std::size_t rows_ = 0;
  std::vector<float> data_;
};

/// Embedding-indexed store of past (query, answer, metadata) entries.
/// Readers share a lock; write_back and snapshot take it exclusively.
class MemoryStore {
 public:
  MemoryStore(std::size_t dim, AmeConfig config = {});

  MemoryStore(const MemoryStore&) = delete;
  MemoryStore& operator=(const MemoryStore&) = delete;

  RetrievalResult retrieve(const EmbeddingVector& query, std::size_t k) const;

  /// Appends unless an existing entry scores >= dup_threshold.
  WriteResult write_back(std::string query, std::string answer, EntryMeta meta,
                         EmbeddingVector embedding);

  /// One JSON object per line, in entry_id order. Returns entries written.
  std::size_t snapshot(const std::filesystem::path& path) const;
  static std::unique_ptr<MemoryStore> load_snapshot(const std::filesystem::path& path,
                                                    std::size_t dim, AmeConfig config = {});

  /// Bulk write_back of snapshot-format lines (auxiliary knowledge). Entry
  /// ids in the file are ignored; duplicates are suppressed as usual.
  std::size_t ingest(const std::filesystem::path& path);

  AmeStats stats() const;
  std::size_t size() const;
  std::size_t dim() const { return dim_; }
  const AmeConfig& config() const { return config_; }

 private:
  std::size_t dim_;
  AmeConfig config_;
  mutable std::shared_mutex mutex_;
  std::vector<MemoryEntry> entries_;
  std::unique_ptr<VectorIndex> index_;
  std::int64_t next_id_ = 1;
};

}  // namespace memgate
