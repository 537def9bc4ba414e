#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace topmind::http {

/// A parsed endpoint URL: `scheme://host[:port]` plus the request path.
struct Endpoint {
  std::string origin;  ///< e.g. "http://127.0.0.1:8080"
  std::string path;    ///< e.g. "/v1/completions"; "/" when absent

  /// Throws UsageError for anything that is not an http(s) URL.
  static Endpoint parse(std::string_view url);
};

/// Exponential backoff: attempt k (k >= 1) waits
/// min(base_delay * 2^(k-1), max_delay) before it is sent.
struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30'000};

  std::chrono::milliseconds delay_before(int retry) const;
};

struct ClientOptions {
  std::chrono::seconds timeout{300};
  RetryPolicy retry;
  /// Sent as `Authorization: Bearer <token>` when present.
  std::optional<std::string> bearer_token;
};

/// Reads TOPMIND_API_KEY; empty values count as unset.
std::optional<std::string> api_key_from_env();

/// Whether a status code is worth retrying (408, 429 and 5xx).
bool is_retryable_status(int status);

struct PostResult {
  bool ok = false;      ///< 2xx with a JSON body
  int status = 0;       ///< last HTTP status, 0 for transport failures
  nlohmann::json body;  ///< parsed response when ok
  int retries = 0;      ///< attempts beyond the first
  std::string error;    ///< last failure description when !ok
};

/// POSTs a JSON body, retrying transport failures and retryable statuses
/// with backoff. Never throws for network or HTTP errors.
PostResult post_json(const Endpoint& endpoint, const nlohmann::json& body, const ClientOptions& options);

}  // namespace topmind::http
