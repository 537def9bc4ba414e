#include "topmind/mock_server.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "topmind/error.hpp"
#include "topmind/hashing.hpp"
#include "topmind/jsonl.hpp"
#include "topmind/random.hpp"

namespace topmind::mock {

using nlohmann::json;

namespace {

PromptKind parse_kind(std::string_view name) {
  if (name == "semantic") return PromptKind::Semantic;
  if (name == "math") return PromptKind::Math;
  if (name == "programming") return PromptKind::Programming;
  return PromptKind::Any;
}

PromptKind classify_prompt(std::string_view prompt) {
  if (prompt.find("hierarchical semantic labeling") != std::string_view::npos) return PromptKind::Semantic;
  if (prompt.find("expert in mathematics education") != std::string_view::npos) return PromptKind::Math;
  if (prompt.find("expert in computer science education") != std::string_view::npos) return PromptKind::Programming;
  return PromptKind::Any;
}

}  // namespace

Fixtures Fixtures::from_json(const json& j) {
  Fixtures f;
  if (j.contains("completions")) j.at("completions").get_to(f.completions);
  if (f.completions.empty()) f.completions.emplace_back();
  if (j.contains("completions_by_model")) j.at("completions_by_model").get_to(f.completions_by_model);
  for (const auto& [model, texts] : f.completions_by_model)
    if (texts.empty()) throw UsageError("fixture completions_by_model." + model + " is empty");
  f.select = j.value("select", f.select);
  if (f.select != "cycle" && f.select != "hash") throw UsageError("fixture select must be cycle or hash");
  f.finish_reason = j.value("finish_reason", f.finish_reason);
  f.fail_first = j.value("fail_first", 0);
  f.fail_status = j.value("fail_status", 500);
  f.latency_ms = j.value("latency_ms", 0);
  for (const auto& rule : j.value("judge", json::array()))
    f.judge.push_back({rule.value("when", ""), parse_kind(rule.value("kind", "")), rule.at("reply").get<std::string>()});
  f.judge_default = j.value("judge_default", f.judge_default);
  f.embedding_dim = j.value("embedding_dim", f.embedding_dim);
  for (const auto& o : j.value("embedding_dim_overrides", json::array()))
    f.embedding_dim_overrides.emplace_back(o.at("when").get<std::string>(), o.at("dim").get<std::size_t>());
  return f;
}

Fixtures Fixtures::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(jsonl::read_text_file(path)));
  } catch (const json::exception& e) {
    throw UsageError("bad fixture file " + path.string() + ": " + e.what());
  }
}

std::vector<float> mock_embedding(std::string_view text, std::size_t dim) {
  Rng rng(fnv1a64(text));
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(2.0 * uniform_unit(rng) - 1.0);
  return v;
}

struct MockServer::Impl {
  Fixtures fixtures;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::string host;

  mutable std::mutex mu;
  std::vector<json> log;
  std::size_t completions_served = 0;
  std::atomic<int> failures_left{0};
  std::atomic<std::size_t> in_flight{0};
  std::atomic<std::size_t> high_water{0};

  // Counts a request as in flight for the lifetime of the guard.
  struct Flight {
    Impl& impl;
    explicit Flight(Impl& i) : impl(i) {
      const auto now = ++impl.in_flight;
      auto prev = impl.high_water.load();
      while (now > prev && !impl.high_water.compare_exchange_weak(prev, now)) {
      }
    }
    ~Flight() { --impl.in_flight; }
  };

  bool begin(const httplib::Request& req, httplib::Response& res, json& body) {
    body = json::parse(req.body, nullptr, false);
    {
      std::lock_guard lock(mu);
      log.push_back(json{{"path", req.path}, {"body", body}, {"authorization", req.get_header_value("Authorization")}});
    }
    if (fixtures.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(fixtures.latency_ms));
    if (failures_left.fetch_sub(1) > 0) {
      res.status = fixtures.fail_status;
      res.set_content(R"({"error": "injected failure"})", "application/json");
      return false;
    }
    if (body.is_discarded() || !body.is_object()) {
      res.status = 400;
      res.set_content(R"({"error": "body is not a JSON object"})", "application/json");
      return false;
    }
    return true;
  }

  void completions(const httplib::Request& req, httplib::Response& res) {
    Flight flight(*this);
    json body;
    if (!begin(req, res, body)) return;
    const auto model = body.value("model", "");
    const auto by_model = fixtures.completions_by_model.find(model);
    const auto& texts = by_model != fixtures.completions_by_model.end() ? by_model->second : fixtures.completions;
    std::size_t pick = 0;
    if (fixtures.select == "hash") {
      pick = fnv1a64(model + "\n" + body.value("prompt", "")) % texts.size();
    } else {
      std::lock_guard lock(mu);
      pick = completions_served++ % texts.size();
    }
    const auto& text = texts[pick];
    const json reply{{"object", "text_completion"},
                     {"model", body.value("model", "")},
                     {"choices", json::array({{{"index", 0}, {"text", text}, {"finish_reason", fixtures.finish_reason}}})}};
    res.set_content(reply.dump(), "application/json");
  }

  void chat(const httplib::Request& req, httplib::Response& res) {
    Flight flight(*this);
    json body;
    if (!begin(req, res, body)) return;
    std::string prompt;
    for (const auto& m : body.value("messages", json::array()))
      if (m.contains("content") && m["content"].is_string()) prompt += m["content"].get<std::string>();
    const auto kind = classify_prompt(prompt);
    std::string content = fixtures.judge_default;
    for (const auto& rule : fixtures.judge) {
      if (rule.kind != PromptKind::Any && rule.kind != kind) continue;
      if (prompt.find(rule.when) == std::string::npos) continue;
      content = rule.reply;
      break;
    }
    const json reply{
        {"object", "chat.completion"},
        {"model", body.value("model", "")},
        {"choices",
         json::array({{{"index", 0},
                       {"message", {{"role", "assistant"}, {"content", content}}},
                       {"finish_reason", "stop"}}})}};
    res.set_content(reply.dump(), "application/json");
  }

  void embeddings(const httplib::Request& req, httplib::Response& res) {
    Flight flight(*this);
    json body;
    if (!begin(req, res, body)) return;
    json inputs = body.value("input", json::array());
    if (inputs.is_string()) inputs = json::array({inputs});
    json data = json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const std::string text = inputs[i].is_string() ? inputs[i].get<std::string>() : inputs[i].dump();
      std::size_t dim = fixtures.embedding_dim;
      for (const auto& [when, d] : fixtures.embedding_dim_overrides)
        if (text.find(when) != std::string::npos) dim = d;
      data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", mock_embedding(text, dim)}});
    }
    res.set_content(json{{"object", "list"}, {"model", body.value("model", "")}, {"data", data}}.dump(),
                    "application/json");
  }
};

MockServer::MockServer(Fixtures fixtures) : impl_(std::make_unique<Impl>()) {
  impl_->fixtures = std::move(fixtures);
  impl_->failures_left = impl_->fixtures.fail_first;
  auto* impl = impl_.get();
  impl->server.new_task_queue = [] { return new httplib::ThreadPool(64); };
  // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port.
  impl->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  impl->server.Post(R"(.*/chat/completions)",
                    [impl](const httplib::Request& req, httplib::Response& res) { impl->chat(req, res); });
  impl->server.Post(R"(.*/completions)",
                    [impl](const httplib::Request& req, httplib::Response& res) { impl->completions(req, res); });
  impl->server.Post(R"(.*/embeddings)",
                    [impl](const httplib::Request& req, httplib::Response& res) { impl->embeddings(req, res); });
  impl->server.Get("/_mock/requests", [impl](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(impl->mu);
    res.set_content(json(impl->log).dump(), "application/json");
  });
  impl->server.Get("/_mock/stats", [impl](const httplib::Request&, httplib::Response& res) {
    std::size_t count;
    {
      std::lock_guard lock(impl->mu);
      count = impl->log.size();
    }
    res.set_content(json{{"requests", count}, {"max_in_flight", impl->high_water.load()}}.dump(), "application/json");
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
    if (impl_->port <= 0) throw Error("mock server: cannot bind to " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw Error("mock server: port " + std::to_string(port) + " is busy or unavailable");
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

int MockServer::port() const { return impl_->port; }

std::string MockServer::url(std::string_view path) const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port) + std::string(path);
}

std::vector<json> MockServer::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

std::size_t MockServer::max_in_flight() const { return impl_->high_water.load(); }

std::size_t MockServer::request_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log.size();
}

}  // namespace topmind::mock
