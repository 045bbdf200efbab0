#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memgate {

/// Unit-norm vector; inner product of two of these is their cosine.
struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class EmbeddingError : public std::runtime_error {
 public:
  enum class Kind { empty_text, unreachable, http_status, bad_dimension, bad_response };

  EmbeddingError(Kind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

struct EmbedderConfig {
  enum class Mode { local, remote };

  Mode mode = Mode::local;
  std::string endpoint_url;  // full URL of the embeddings route, remote mode
  std::string model_name;
  std::size_t dim = 256;
  std::uint64_t seed = 1;  // local hashing seed
  double timeout_seconds = 30.0;
  int retries = 2;

  static EmbedderConfig local(std::size_t dim = 256);
  static EmbedderConfig remote(std::string url, std::string model, std::size_t dim = 384);

  void validate() const;
};

/// Left-to-right double accumulation; symmetric bit-for-bit.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Scales to unit norm in place. Throws on a zero vector.
void normalize(std::vector<float>& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

/// Character 3-gram feature hashing: each trigram lands in one of `dim`
/// buckets with sign taken from a second hash bit, then the vector is
/// L2-normalized. Pure function of (text, dim, seed).
class LocalEmbedder final : public Embedder {
 public:
  explicit LocalEmbedder(std::size_t dim = 256, std::uint64_t seed = 1);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// POST {"model": ..., "input": [text]} -> {"data": [{"embedding": [...]}]}.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig config);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dim() const override { return config_.dim; }

 private:
  EmbeddingVector parse_response(const std::string& body) const;

  EmbedderConfig config_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

}  // namespace memgate
