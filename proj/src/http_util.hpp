#pragma once

#include <string>

#include <httplib.h>

namespace memgate::detail {

/// "http://host:8000/v1/embeddings" -> {"http://host:8000", "/v1/embeddings"}.
struct HttpTarget {
  std::string origin;
  std::string path;
};

HttpTarget split_url(const std::string& url);

/// Joins a base URL and a route without doubling or dropping the slash.
std::string join_url(const std::string& base, const std::string& route);

struct HttpOutcome {
  int status = 0;  // 0 when no response arrived
  std::string body;
  httplib::Error error = httplib::Error::Success;
  int attempts = 0;

  bool ok() const { return error == httplib::Error::Success && status >= 200 && status < 300; }
  bool transport_failed() const { return error != httplib::Error::Success; }
  bool timed_out() const {
    return error == httplib::Error::ConnectionTimeout || error == httplib::Error::Read ||
           error == httplib::Error::Write;
  }
};

/// Retries transport failures, 429 and 5xx up to `retries` extra times,
/// sleeping backoff_seconds * 2^attempt between tries.
HttpOutcome post_json(const std::string& url, const std::string& body, double timeout_seconds,
                      int retries, double backoff_seconds = 0.2);

HttpOutcome get(const std::string& url, double timeout_seconds);

}  // namespace memgate::detail
