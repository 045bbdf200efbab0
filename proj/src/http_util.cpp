#include "http_util.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace memgate::detail {

HttpTarget split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string join_url(const std::string& base, const std::string& route) {
  std::string out = base;
  while (!out.empty() && out.back() == '/') out.pop_back();
  if (route.empty() || route.front() != '/') out.push_back('/');
  return out + route;
}

namespace {

httplib::Client make_client(const std::string& origin, double timeout_seconds) {
  httplib::Client client(origin);
  const auto usec = static_cast<long>(timeout_seconds * 1e6);
  const time_t sec = usec / 1000000;
  const time_t rem = usec % 1000000;
  client.set_connection_timeout(sec, rem);
  client.set_read_timeout(sec, rem);
  client.set_write_timeout(sec, rem);
  return client;
}

bool retryable(const HttpOutcome& o) {
  return o.transport_failed() || o.status == 429 || o.status >= 500;
}

}  // namespace

HttpOutcome post_json(const std::string& url, const std::string& body, double timeout_seconds,
                      int retries, double backoff_seconds) {
  const auto target = split_url(url);
  auto client = make_client(target.origin, timeout_seconds);
  HttpOutcome outcome;
  for (int attempt = 0;; ++attempt) {
    outcome = HttpOutcome{};
    outcome.attempts = attempt + 1;
    auto res = client.Post(target.path, body, "application/json");
    if (res) {
      outcome.status = res->status;
      outcome.body = res->body;
    } else {
      outcome.error = res.error();
    }
    if (!retryable(outcome) || attempt >= retries) return outcome;
    std::this_thread::sleep_for(
        std::chrono::duration<double>(backoff_seconds * std::pow(2.0, attempt)));
  }
}

HttpOutcome get(const std::string& url, double timeout_seconds) {
  const auto target = split_url(url);
  auto client = make_client(target.origin, timeout_seconds);
  HttpOutcome outcome;
  outcome.attempts = 1;
  if (auto res = client.Get(target.path)) {
    outcome.status = res->status;
    outcome.body = res->body;
  } else {
    outcome.error = res.error();
  }
  return outcome;
}

}  // namespace memgate::detail
