#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "topmind/http.hpp"

namespace topmind::annotate {

enum class LabelStatus { Ok, Unknown, Failed };

std::string_view to_string(LabelStatus status);
std::optional<LabelStatus> parse_label_status(std::string_view name);

struct SemanticLabel {
  std::string category;
  std::string subcategory;
  LabelStatus status = LabelStatus::Failed;

  friend bool operator==(const SemanticLabel&, const SemanticLabel&) = default;
};

enum class DifficultyLevel { Basic, Intermediate, Advanced, Expert, Unclassifiable };

std::string_view to_string(DifficultyLevel level);
std::optional<DifficultyLevel> parse_difficulty_level(std::string_view name);

struct DifficultyLabel {
  DifficultyLevel level = DifficultyLevel::Unclassifiable;
  std::string reasoning;

  friend bool operator==(const DifficultyLabel&, const DifficultyLabel&) = default;
};

enum class Domain { Math, Programming };

std::optional<Domain> parse_domain(std::string_view name);
std::string_view to_string(Domain domain);
/// Canonical category whose records the domain rubric applies to
/// ("mathematics" or "programming").
std::string_view category_of(Domain domain);

struct LabeledRecord {
  std::string record_id;
  std::string model_id;
  std::string family;
  int prompt_id = 0;
  std::string cleaned_text;
  SemanticLabel semantic;
  std::optional<DifficultyLabel> difficulty;
  std::string labeler_model;
};

void to_json(nlohmann::json& j, const LabeledRecord& r);
void from_json(const nlohmann::json& j, LabeledRecord& r);

// ---------------------------------------------------------------------------
// Prompt templates

std::string_view semantic_prompt_template();
std::string_view difficulty_prompt_template(Domain domain);

/// Substitutes `{text}` and unescapes `{{` / `}}`, in one left-to-right pass
/// so braces inside `text` are left alone.
std::string render_prompt(std::string_view tmpl, std::string_view text);

// ---------------------------------------------------------------------------
// Response parsing

/// The first balanced {...} block in `response` that parses as a JSON object.
/// Braces inside string literals do not count, and trailing commas before a
/// closing brace or bracket are tolerated.
std::optional<nlohmann::json> extract_json_object(std::string_view response);

/// category/subcategory lowercased and trimmed. "unknown" (or an empty
/// category) gives status unknown. nullopt when no usable object exists.
std::optional<SemanticLabel> parse_semantic(std::string_view response);

/// nullopt when the object is missing or the level is outside the closed set.
std::optional<DifficultyLabel> parse_difficulty(std::string_view response);

// ---------------------------------------------------------------------------
// Judge calls

/// Sends one rendered prompt to the judge and returns its text reply, or
/// nullopt when the transport gives up.
using JudgeFn = std::function<std::optional<std::string>(const std::string& prompt)>;

struct JudgeConfig {
  std::string endpoint_url;  ///< chat-completions style endpoint
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 1024;
  int parse_retries = 3;  ///< extra attempts after an unparseable reply
  http::ClientOptions client;
};

/// A JudgeFn that POSTs {model, messages:[{role:user, content}], temperature,
/// max_tokens} and reads choices[0].message.content.
JudgeFn http_judge(const JudgeConfig& config);

SemanticLabel label_semantic(std::string_view text, const JudgeFn& judge, int parse_retries = 3);
SemanticLabel label_semantic(std::string_view text, const JudgeConfig& config);

/// After the retries run out the level is unclassifiable with reasoning
/// "parse-failure".
DifficultyLabel grade_difficulty(std::string_view text, Domain domain, const JudgeFn& judge,
                                 int parse_retries = 3);
DifficultyLabel grade_difficulty(std::string_view text, Domain domain, const JudgeConfig& config);

// ---------------------------------------------------------------------------
// Normalization and agreement

/// Lowercase, trim, collapse inner whitespace, then map through the shipped
/// alias table (e.g. "sports" -> "sport"). Idempotent.
std::string normalize_label(std::string_view raw);

struct Agreement {
  double strict = 0.0;
  double relaxed = 0.0;
};

/// Category agreement between two aligned label lists. Throws on a length
/// mismatch or empty input.
Agreement agreement(std::span<const SemanticLabel> a, std::span<const SemanticLabel> b);

}  // namespace topmind::annotate
