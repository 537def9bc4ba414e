#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace topmind::mock {

/// Which judge prompt a chat request carries, recognized by its template.
enum class PromptKind { Any, Semantic, Math, Programming };

struct JudgeRule {
  std::string when;  ///< substring of the rendered prompt
  PromptKind kind = PromptKind::Any;
  std::string reply;
};

/// Canned responses. JSON form:
///
///   {
///     "completions": ["text", ...],
///     "completions_by_model": {"model-id": ["text", ...]},  // replaces the list for that model
///     "select": "cycle",                     // cycle: arrival order; hash: by (model, prompt)
///     "finish_reason": "stop",
///     "fail_first": 0, "fail_status": 500,   // first N requests fail
///     "latency_ms": 0,
///     "judge": [{"when": "...", "kind": "semantic|math|programming", "reply": "..."}],
///     "judge_default": "{...}",
///     "embedding_dim": 8,
///     "embedding_dim_overrides": [{"when": "...", "dim": 5}]
///   }
///
/// Embedding vectors are a deterministic function of the input text.
struct Fixtures {
  std::vector<std::string> completions{"Hello"};
  std::map<std::string, std::vector<std::string>> completions_by_model;
  /// "hash" makes the reply a function of the request alone, so parallel
  /// clients see the same texts regardless of arrival order.
  std::string select = "cycle";
  std::string finish_reason = "stop";
  int fail_first = 0;
  int fail_status = 500;
  int latency_ms = 0;
  std::vector<JudgeRule> judge;
  std::string judge_default = R"({"category": "unknown", "subcategory": "unknown"})";
  std::size_t embedding_dim = 8;
  std::vector<std::pair<std::string, std::size_t>> embedding_dim_overrides;

  static Fixtures from_json(const nlohmann::json& j);
  static Fixtures load(const std::filesystem::path& path);
};

/// The vector the mock returns for `text`.
std::vector<float> mock_embedding(std::string_view text, std::size_t dim);

/// Local OpenAI-compatible endpoint serving completions, chat completions
/// and embeddings from fixtures. Every request body is recorded, and the
/// high-water mark of concurrently handled requests is tracked.
///
/// Routes: POST .../chat/completions, .../completions, .../embeddings;
/// GET /_mock/requests and /_mock/stats for out-of-process inspection.
class MockServer {
 public:
  explicit MockServer(Fixtures fixtures);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws topmind::Error when the port is taken.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

  int port() const;
  /// e.g. url("/v1/completions") -> "http://127.0.0.1:PORT/v1/completions"
  std::string url(std::string_view path) const;

  /// {"path", "body", "authorization"} for every POST, in arrival order.
  std::vector<nlohmann::json> requests() const;
  std::size_t max_in_flight() const;
  std::size_t request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace topmind::mock
