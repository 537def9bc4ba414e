#include "topmind/http.hpp"

#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "topmind/error.hpp"

namespace topmind::http {

Endpoint Endpoint::parse(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw UsageError("endpoint is not a URL: " + std::string(url));
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw UsageError("endpoint must be http or https: " + std::string(url));
  const auto host_start = scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  Endpoint e;
  e.origin = std::string(url.substr(0, path_start));
  e.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  if (e.origin.size() <= host_start) throw UsageError("endpoint has no host: " + std::string(url));
  return e;
}

std::chrono::milliseconds RetryPolicy::delay_before(int retry) const {
  if (retry <= 0) return std::chrono::milliseconds{0};
  auto delay = base_delay;
  for (int k = 1; k < retry && delay < max_delay; ++k) delay *= 2;
  return std::min(delay, max_delay);
}

std::optional<std::string> api_key_from_env() {
  const char* key = std::getenv("TOPMIND_API_KEY");
  if (key == nullptr || *key == '\0') return std::nullopt;
  return std::string(key);
}

bool is_retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

PostResult post_json(const Endpoint& endpoint, const nlohmann::json& body, const ClientOptions& options) {
  PostResult result;
  const std::string payload = body.dump();

  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);
  client.set_keep_alive(false);
  if (options.bearer_token) client.set_bearer_token_auth(*options.bearer_token);

  for (int attempt = 0;; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options.retry.delay_before(attempt));
    result.retries = attempt;

    auto res = client.Post(endpoint.path, payload, "application/json");
    bool retryable = false;
    if (!res) {
      result.status = 0;
      result.error = "transport: " + httplib::to_string(res.error());
      retryable = true;
    } else {
      result.status = res->status;
      if (res->status >= 200 && res->status < 300) {
        try {
          result.body = nlohmann::json::parse(res->body);
          result.ok = true;
          result.error.clear();
          return result;
        } catch (const nlohmann::json::parse_error&) {
          result.error = "response is not JSON";
          return result;
        }
      }
      result.error = "HTTP " + std::to_string(res->status);
      retryable = is_retryable_status(res->status);
    }
    if (!retryable || attempt >= options.retry.max_retries) return result;
  }
}

}  // namespace topmind::http
