#include "memgate/ame.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

namespace memgate {

using json = nlohmann::json;

void AmeConfig::validate() const {
  if (top_k == 0) throw std::invalid_argument("top_k must be >= 1");
  if (!(dup_threshold > 0.0 && dup_threshold <= 1.0))
    throw std::invalid_argument("dup_threshold must lie in (0, 1]");
}

void FlatIndex::add(std::span<const float> vec) {
  if (vec.size() != dim_) throw std::invalid_argument("FlatIndex::add: dimension mismatch");
  data_.insert(data_.end(), vec.begin(), vec.end());
  ++rows_;
}

std::vector<IndexHit> FlatIndex::search(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim_) throw std::invalid_argument("FlatIndex::search: dimension mismatch");
  std::vector<IndexHit> best;
  best.reserve(k + 1);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double s = cosine(query, row(i));
    if (best.size() == k && !(s > best.back().score)) continue;
    // Insert after every hit with score >= s: earlier rows win ties.
    auto pos = std::find_if(best.begin(), best.end(), [s](const IndexHit& h) { return h.score < s; });
    best.insert(pos, IndexHit{i, s});
    if (best.size() > k) best.pop_back();
  }
  return best;
}

std::optional<double> FlatIndex::max_score(std::span<const float> query) const {
  if (rows_ == 0) return std::nullopt;
  double best = cosine(query, row(0));
  for (std::size_t i = 1; i < rows_; ++i) best = std::max(best, cosine(query, row(i)));
  return best;
}

MemoryStore::MemoryStore(std::size_t dim, AmeConfig config)
    : dim_(dim), config_(config), index_(std::make_unique<FlatIndex>(dim)) {
  if (dim == 0) throw std::invalid_argument("MemoryStore: dim must be positive");
  config_.validate();
}

RetrievalResult MemoryStore::retrieve(const EmbeddingVector& query, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("retrieve: k must be >= 1");
  if (query.dim() != dim_) throw std::invalid_argument("retrieve: query dimension mismatch");
  std::shared_lock lock(mutex_);
  RetrievalResult result;
  result.k_requested = k;
  for (const auto& hit : index_->search(query.values, k)) {
    result.entries.push_back(ScoredEntry{entries_[hit.row], hit.score});
  }
  return result;
}

WriteResult MemoryStore::write_back(std::string query, std::string answer, EntryMeta meta,
                                    EmbeddingVector embedding) {
  if (embedding.dim() != dim_) throw std::invalid_argument("write_back: embedding dimension mismatch");
  std::unique_lock lock(mutex_);
  if (auto best = index_->max_score(embedding.values); best && *best >= config_.dup_threshold) {
    return WriteResult{false, std::nullopt};
  }
  const std::int64_t id = next_id_++;
  index_->add(embedding.values);
  entries_.push_back(MemoryEntry{id, std::move(query), std::move(answer), std::move(meta),
                                 std::move(embedding)});
  return WriteResult{true, id};
}

namespace {

json entry_to_json(const MemoryEntry& e) {
  nlohmann::ordered_json j;
  j["entry_id"] = e.entry_id;
  j["query"] = e.query;
  j["answer"] = e.answer;
  j["qid"] = e.meta.qid;
  j["category"] = e.meta.category;
  j["timestamp"] = e.meta.timestamp;
  j["embedding"] = e.embedding.values;
  return j;
}

MemoryEntry entry_from_json(const json& j, std::size_t dim) {
  MemoryEntry e;
  e.entry_id = j.at("entry_id").get<std::int64_t>();
  e.query = j.at("query").get<std::string>();
  e.answer = j.at("answer").get<std::string>();
  e.meta.qid = j.value("qid", std::string{});
  e.meta.category = j.value("category", std::string{});
  e.meta.timestamp = j.value("timestamp", std::int64_t{0});
  e.embedding.values = j.at("embedding").get<std::vector<float>>();
  if (e.embedding.dim() != dim)
    throw SnapshotError("dimension mismatch: entry has dim " + std::to_string(e.embedding.dim()) +
                        ", store expects " + std::to_string(dim));
  return e;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, std::size_t dim, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw SnapshotError("cannot open snapshot " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    MemoryEntry e;
    try {
      e = entry_from_json(json::parse(line), dim);
    } catch (const SnapshotError& err) {
      throw SnapshotError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    } catch (const std::exception& err) {
      throw SnapshotError(path.string() + ":" + std::to_string(lineno) + ": corrupt entry: " + err.what());
    }
    fn(std::move(e), lineno);
  }
}

}  // namespace

std::size_t MemoryStore::snapshot(const std::filesystem::path& path) const {
  std::unique_lock lock(mutex_);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw SnapshotError("cannot write snapshot " + tmp.string());
    for (const auto& e : entries_) out << entry_to_json(e).dump() << '\n';
    out.flush();
    if (!out) throw SnapshotError("I/O error while writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw SnapshotError("cannot move snapshot into place: " + ec.message());
  return entries_.size();
}

std::unique_ptr<MemoryStore> MemoryStore::load_snapshot(const std::filesystem::path& path,
                                                        std::size_t dim, AmeConfig config) {
  auto store = std::make_unique<MemoryStore>(dim, config);
  for_each_line(path, dim, [&](MemoryEntry e, std::size_t lineno) {
    if (e.entry_id < store->next_id_)
      throw SnapshotError(path.string() + ":" + std::to_string(lineno) +
                          ": entry_id not strictly increasing");
    store->next_id_ = e.entry_id + 1;
    store->index_->add(e.embedding.values);
    store->entries_.push_back(std::move(e));
  });
  return store;
}

std::size_t MemoryStore::ingest(const std::filesystem::path& path) {
  std::size_t inserted = 0;
  for_each_line(path, dim_, [&](MemoryEntry e, std::size_t) {
    normalize(e.embedding.values);
    if (write_back(std::move(e.query), std::move(e.answer), std::move(e.meta), std::move(e.embedding))
            .inserted)
      ++inserted;
  });
  return inserted;
}

AmeStats MemoryStore::stats() const {
  std::shared_lock lock(mutex_);
  AmeStats s;
  s.entry_count = entries_.size();
  for (const auto& e : entries_) ++s.per_category[e.meta.category];
  s.last_entry_id = entries_.empty() ? 0 : entries_.back().entry_id;
  return s;
}

std::size_t MemoryStore::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace memgate
