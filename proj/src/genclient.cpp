#include "topmind/genclient.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "topmind/error.hpp"
#include "topmind/hashing.hpp"
#include "topmind/jsonl.hpp"
#include "topmind/random.hpp"
#include "topmind/text_format.hpp"

namespace topmind::gen {

using nlohmann::json;

void GenerationConfig::validate() const {
  if (!(temperature >= 0.0)) throw UsageError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw UsageError("top_p must be in (0, 1]");
  if (max_tokens < 1) throw UsageError("max_tokens must be >= 1");
  if (endpoint_url.empty()) throw UsageError("generation endpoint URL is required");
  if (model_id.empty()) throw UsageError("model id is required");
  if (family.empty()) throw UsageError("model family is required");
  http::Endpoint::parse(endpoint_url);
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Length: return "length";
    case FinishReason::Stop: return "stop";
    case FinishReason::Error: return "error";
  }
  return "error";
}

std::optional<FinishReason> parse_finish_reason(std::string_view name) {
  if (name == "length") return FinishReason::Length;
  if (name == "stop") return FinishReason::Stop;
  if (name == "error") return FinishReason::Error;
  return std::nullopt;
}

void to_json(json& j, const GenerationConfig& c) {
  j = json{{"temperature", c.temperature}, {"top_p", c.top_p},       {"max_tokens", c.max_tokens},
           {"endpoint_url", c.endpoint_url}, {"model_id", c.model_id}, {"family", c.family}};
}

void from_json(const json& j, GenerationConfig& c) {
  j.at("temperature").get_to(c.temperature);
  j.at("top_p").get_to(c.top_p);
  j.at("max_tokens").get_to(c.max_tokens);
  j.at("endpoint_url").get_to(c.endpoint_url);
  j.at("model_id").get_to(c.model_id);
  j.at("family").get_to(c.family);
}

void to_json(json& j, const GenerationRecord& r) {
  j = json{{"record_id", r.record_id},
           {"model_id", r.model_id},
           {"family", r.family},
           {"prompt_id", r.prompt_id},
           {"prompt_text", r.prompt_text},
           {"output_text", r.output_text},
           {"finish_reason", to_string(r.finish_reason)},
           {"created_at", r.created_at},
           {"config", r.config},
           {"seed", r.seed},
           {"index", r.index},
           {"diagnostics",
            {{"retries", r.diagnostics.retries},
             {"http_status", r.diagnostics.http_status},
             {"error", r.diagnostics.error}}}};
}

void from_json(const json& j, GenerationRecord& r) {
  j.at("record_id").get_to(r.record_id);
  j.at("model_id").get_to(r.model_id);
  j.at("family").get_to(r.family);
  j.at("prompt_id").get_to(r.prompt_id);
  j.at("prompt_text").get_to(r.prompt_text);
  j.at("output_text").get_to(r.output_text);
  const auto reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  r.finish_reason = reason.value_or(FinishReason::Error);
  r.created_at = j.value("created_at", "");
  if (j.contains("config")) j.at("config").get_to(r.config);
  r.seed = j.value("seed", std::uint64_t{0});
  r.index = j.value("index", std::size_t{0});
  if (const auto it = j.find("diagnostics"); it != j.end()) {
    r.diagnostics.retries = it->value("retries", 0);
    r.diagnostics.http_status = it->value("http_status", 0);
    r.diagnostics.error = it->value("error", "");
  }
}

json completion_request_body(const corpus::SeedPrompt& prompt, const GenerationConfig& config) {
  return json{{"model", config.model_id},
              {"prompt", prompt.text},
              {"temperature", config.temperature},
              {"top_p", config.top_p},
              {"max_tokens", config.max_tokens}};
}

std::string make_record_id(std::uint64_t seed, std::string_view model_id, std::size_t index) {
  Rng rng(derive_seed(seed ^ fnv1a64(model_id), index));
  const std::uint64_t hi = rng();
  const std::uint64_t lo = rng();
  // Version 4 / variant 1 layout so the ids look like ordinary UUIDs.
  const std::uint64_t h = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
  const std::uint64_t l = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
  char buf[37];
  std::snprintf(buf, sizeof buf, "%08llx-%04llx-%04llx-%04llx-%012llx",
                static_cast<unsigned long long>(h >> 32), static_cast<unsigned long long>((h >> 16) & 0xFFFF),
                static_cast<unsigned long long>(h & 0xFFFF), static_cast<unsigned long long>(l >> 48),
                static_cast<unsigned long long>(l & 0xFFFFFFFFFFFFULL));
  return buf;
}

GenerationRecord generate_one(const corpus::SeedPrompt& prompt, const GenerationConfig& config,
                              const GenerateOptions& options) {
  GenerationRecord record;
  record.model_id = config.model_id;
  record.family = config.family;
  record.prompt_id = prompt.id;
  record.prompt_text = prompt.text;
  record.config = config;

  const auto endpoint = http::Endpoint::parse(config.endpoint_url);
  const auto result = http::post_json(endpoint, completion_request_body(prompt, config), options.client);
  record.created_at = options.fixed_time.value_or(utc_timestamp_now());
  record.diagnostics.retries = result.retries;
  record.diagnostics.http_status = result.status;

  if (!result.ok) {
    record.finish_reason = FinishReason::Error;
    record.diagnostics.error = result.error;
    return record;
  }
  try {
    const auto& choice = result.body.at("choices").at(0);
    record.output_text = choice.at("text").get<std::string>();
    const auto reason = choice.value("finish_reason", json(nullptr));
    record.finish_reason = reason.is_string() && reason.get<std::string>() == "length" ? FinishReason::Length
                                                                                      : FinishReason::Stop;
  } catch (const json::exception& e) {
    record.finish_reason = FinishReason::Error;
    record.output_text.clear();
    record.diagnostics.error = std::string("malformed completion response: ") + e.what();
  }
  return record;
}

json to_json(const BatchSummary& s) {
  json reasons = json::object();
  for (auto reason : {FinishReason::Stop, FinishReason::Length, FinishReason::Error}) {
    const auto it = s.by_finish_reason.find(reason);
    reasons[std::string(to_string(reason))] = it == s.by_finish_reason.end() ? 0 : it->second;
  }
  return json{{"requested", s.requested},
              {"generated", s.generated},
              {"skipped_existing", s.skipped_existing},
              {"finish_reasons", reasons}};
}

BatchSummary generate_batch(const BatchOptions& options, const GenerationConfig& config,
                            const corpus::Corpus& corpus) {
  if (options.n < 1) throw UsageError("batch size must be >= 1");
  config.validate();

  // Open (and create) the output before any request goes out.
  jsonl::repair_tail(options.out);
  std::set<std::size_t> done;
  if (std::filesystem::exists(options.out)) {
    for (const auto& j : jsonl::read(options.out)) {
      if (j.value("model_id", "") == config.model_id && j.value("seed", std::uint64_t{0}) == options.seed)
        done.insert(j.value("index", std::size_t{0}));
    }
  }
  jsonl::Writer writer(options.out);

  // The prompt sequence depends only on the seed.
  Rng rng(options.seed);
  std::vector<const corpus::SeedPrompt*> prompts;
  prompts.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) prompts.push_back(&corpus.sample_uniform(rng));

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < options.n; ++i)
    if (!done.contains(i)) todo.push_back(i);

  BatchSummary summary;
  summary.requested = options.n;
  summary.skipped_existing = options.n - todo.size();

  // Workers pull positions from a shared counter; finished records wait in
  // `pending` until every earlier position has been written.
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::vector<std::optional<GenerationRecord>> pending(todo.size());
  std::size_t write_pos = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      const std::size_t index = todo[slot];
      GenerationRecord record = generate_one(*prompts[index], config, options.generate);
      record.record_id = make_record_id(options.seed, config.model_id, index);
      record.seed = options.seed;
      record.index = index;
      if (record.finish_reason == FinishReason::Error)
        spdlog::warn("generation {} for {} failed: {}", index, config.model_id, record.diagnostics.error);

      std::lock_guard lock(mu);
      pending[slot] = std::move(record);
      try {
        while (write_pos < pending.size() && pending[write_pos]) {
          writer.write(json(*pending[write_pos]));
          ++summary.by_finish_reason[pending[write_pos]->finish_reason];
          ++summary.generated;
          pending[write_pos].reset();
          ++write_pos;
        }
      } catch (...) {
        if (!failure) failure = std::current_exception();
        next.store(todo.size());
        return;
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.parallel, todo.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return summary;
}

}  // namespace topmind::gen
