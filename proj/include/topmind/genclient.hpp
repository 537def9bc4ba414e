#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "topmind/corpus.hpp"
#include "topmind/http.hpp"

namespace topmind::gen {

struct GenerationConfig {
  double temperature = 1.0;
  double top_p = 0.9;
  int max_tokens = 4096;
  std::string endpoint_url;
  std::string model_id;
  std::string family;

  /// Throws UsageError when a field is out of range or missing.
  void validate() const;
};

enum class FinishReason { Length, Stop, Error };

std::string_view to_string(FinishReason reason);
std::optional<FinishReason> parse_finish_reason(std::string_view name);

struct Diagnostics {
  int retries = 0;
  int http_status = 0;
  std::string error;
};

struct GenerationRecord {
  std::string record_id;
  std::string model_id;
  std::string family;
  int prompt_id = 0;
  std::string prompt_text;
  std::string output_text;  ///< the continuation only, never the prompt
  FinishReason finish_reason = FinishReason::Stop;
  std::string created_at;
  GenerationConfig config;
  std::uint64_t seed = 0;
  std::size_t index = 0;  ///< position within its (model, seed) batch
  Diagnostics diagnostics;
};

void to_json(nlohmann::json& j, const GenerationConfig& c);
void from_json(const nlohmann::json& j, GenerationConfig& c);
void to_json(nlohmann::json& j, const GenerationRecord& r);
void from_json(const nlohmann::json& j, GenerationRecord& r);

/// The raw-completion request body: {model, prompt, temperature, top_p,
/// max_tokens}. There is no messages array, role tag or system prompt.
nlohmann::json completion_request_body(const corpus::SeedPrompt& prompt, const GenerationConfig& config);

/// UUID-formatted identifier derived from (seed, model, index), so re-runs
/// reproduce ids while separate batches never collide.
std::string make_record_id(std::uint64_t seed, std::string_view model_id, std::size_t index);

struct GenerateOptions {
  http::ClientOptions client;
  /// Overrides created_at (reproducible fixtures); wall clock otherwise.
  std::optional<std::string> fixed_time;
};

/// One continuation. Transport and HTTP failures come back as a record with
/// finish_reason error, empty output and the failure in diagnostics.
GenerationRecord generate_one(const corpus::SeedPrompt& prompt, const GenerationConfig& config,
                              const GenerateOptions& options = {});

struct BatchOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::size_t parallel = 1;
  GenerateOptions generate;
};

struct BatchSummary {
  std::size_t requested = 0;
  std::size_t generated = 0;
  std::size_t skipped_existing = 0;
  std::map<FinishReason, std::size_t> by_finish_reason;
};

nlohmann::json to_json(const BatchSummary& s);

/// Draws n prompts from a seeded uniform stream and generates them with at
/// most `parallel` requests in flight. Records are appended to `out` in index
/// order through a single writer. Indices already present in `out` for the
/// same (model, seed) are skipped, so an interrupted batch resumes.
BatchSummary generate_batch(const BatchOptions& options, const GenerationConfig& config,
                            const corpus::Corpus& corpus = corpus::Corpus::builtin());

}  // namespace topmind::gen
