#include "memgate/embedding.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "memgate/rng.hpp"

namespace memgate {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

}  // namespace

EmbedderConfig EmbedderConfig::local(std::size_t dim) {
  EmbedderConfig c;
  c.mode = Mode::local;
  c.dim = dim;
  return c;
}

EmbedderConfig EmbedderConfig::remote(std::string url, std::string model, std::size_t dim) {
  EmbedderConfig c;
  c.mode = Mode::remote;
  c.endpoint_url = std::move(url);
  c.model_name = std::move(model);
  c.dim = dim;
  return c;
}

void EmbedderConfig::validate() const {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
  if (mode == Mode::remote && (endpoint_url.empty() || model_name.empty()))
    throw std::invalid_argument("remote embedder needs endpoint_url and model_name");
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: dimension mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return dot;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(std::span<const float>(a.values), std::span<const float>(b.values));
}

void normalize(std::vector<float>& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw std::domain_error("cannot normalize a zero or non-finite vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

LocalEmbedder::LocalEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
}

EmbeddingVector LocalEmbedder::embed(std::string_view text) const {
  const auto body = trim(text);
  if (body.empty()) throw EmbeddingError(EmbeddingError::Kind::empty_text, "cannot embed empty text");

  // \x02 / \x03 mark the boundaries so short texts still yield trigrams.
  std::string padded;
  padded.reserve(body.size() + 2);
  padded.push_back('\x02');
  padded.append(body);
  padded.push_back('\x03');

  std::vector<double> acc(dim_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = hash_bytes(std::string_view(padded).substr(i, 3), seed_);
    const double sign = ((h >> 32) & 1U) ? -1.0 : 1.0;
    acc[h % dim_] += sign;
  }

  std::vector<float> values(dim_);
  bool any = false;
  for (std::size_t i = 0; i < dim_; ++i) {
    values[i] = static_cast<float>(acc[i]);
    any = any || acc[i] != 0.0;
  }
  if (!any) {
    // Every trigram cancelled out; fall back to one whole-text bucket.
    values[hash_bytes(body, seed_) % dim_] = 1.0F;
  }
  normalize(values);
  return EmbeddingVector{std::move(values)};
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : config_(std::move(config)) {
  config_.validate();
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  if (trim(text).empty()) throw EmbeddingError(EmbeddingError::Kind::empty_text, "cannot embed empty text");
  json request = {{"model", config_.model_name}, {"input", json::array({std::string(text)})}};
  const auto outcome =
      detail::post_json(config_.endpoint_url, request.dump(), config_.timeout_seconds, config_.retries);
  if (outcome.transport_failed())
    throw EmbeddingError(EmbeddingError::Kind::unreachable,
                         "embedding endpoint unreachable: " + httplib::to_string(outcome.error));
  if (!outcome.ok())
    throw EmbeddingError(EmbeddingError::Kind::http_status,
                         "embedding endpoint returned HTTP " + std::to_string(outcome.status),
                         outcome.status);
  return parse_response(outcome.body);
}

EmbeddingVector RemoteEmbedder::parse_response(const std::string& body) const {
  std::vector<float> values;
  try {
    const auto j = json::parse(body);
    values = j.at("data").at(0).at("embedding").get<std::vector<float>>();
  } catch (const json::exception& e) {
    throw EmbeddingError(EmbeddingError::Kind::bad_response,
                         std::string("malformed embedding response: ") + e.what());
  }
  if (values.size() != config_.dim)
    throw EmbeddingError(EmbeddingError::Kind::bad_dimension,
                         "embedding endpoint returned dim " + std::to_string(values.size()) +
                             ", expected " + std::to_string(config_.dim));
  try {
    normalize(values);
  } catch (const std::domain_error& e) {
    throw EmbeddingError(EmbeddingError::Kind::bad_response, e.what());
  }
  return EmbeddingVector{std::move(values)};
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  config.validate();
  if (config.mode == EmbedderConfig::Mode::remote) return std::make_unique<RemoteEmbedder>(config);
  return std::make_unique<LocalEmbedder>(config.dim, config.seed);
}

}  // namespace memgate
