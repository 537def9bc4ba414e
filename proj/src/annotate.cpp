#include "topmind/annotate.hpp"

#include <map>

#include <spdlog/spdlog.h>

#include "topmind/assets.hpp"
#include "topmind/error.hpp"
#include "topmind/text_format.hpp"

namespace topmind::annotate {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kLevelNames{"basic", "intermediate", "advanced", "expert",
                                                      "unclassifiable"};

}  // namespace

std::string_view to_string(LabelStatus status) {
  switch (status) {
    case LabelStatus::Ok: return "ok";
    case LabelStatus::Unknown: return "unknown";
    case LabelStatus::Failed: return "failed";
  }
  return "failed";
}

std::optional<LabelStatus> parse_label_status(std::string_view name) {
  if (name == "ok") return LabelStatus::Ok;
  if (name == "unknown") return LabelStatus::Unknown;
  if (name == "failed") return LabelStatus::Failed;
  return std::nullopt;
}

std::string_view to_string(DifficultyLevel level) { return kLevelNames[static_cast<std::size_t>(level)]; }

std::optional<DifficultyLevel> parse_difficulty_level(std::string_view name) {
  for (std::size_t i = 0; i < kLevelNames.size(); ++i)
    if (kLevelNames[i] == name) return static_cast<DifficultyLevel>(i);
  return std::nullopt;
}

std::optional<Domain> parse_domain(std::string_view name) {
  if (name == "math" || name == "mathematics") return Domain::Math;
  if (name == "programming") return Domain::Programming;
  return std::nullopt;
}

std::string_view to_string(Domain domain) { return domain == Domain::Math ? "math" : "programming"; }

std::string_view category_of(Domain domain) {
  return domain == Domain::Math ? "mathematics" : "programming";
}

void to_json(json& j, const LabeledRecord& r) {
  j = json{{"record_id", r.record_id},
           {"model_id", r.model_id},
           {"family", r.family},
           {"prompt_id", r.prompt_id},
           {"cleaned_text", r.cleaned_text},
           {"semantic",
            {{"category", r.semantic.category},
             {"subcategory", r.semantic.subcategory},
             {"status", to_string(r.semantic.status)}}},
           {"difficulty", r.difficulty ? json{{"level", to_string(r.difficulty->level)},
                                              {"reasoning", r.difficulty->reasoning}}
                                       : json(nullptr)},
           {"labeler_model", r.labeler_model}};
}

void from_json(const json& j, LabeledRecord& r) {
  j.at("record_id").get_to(r.record_id);
  r.model_id = j.value("model_id", "");
  r.family = j.value("family", "");
  r.prompt_id = j.value("prompt_id", 0);
  r.cleaned_text = j.value("cleaned_text", "");
  const auto& s = j.at("semantic");
  r.semantic.category = s.value("category", "");
  r.semantic.subcategory = s.value("subcategory", "");
  r.semantic.status = parse_label_status(s.value("status", "failed")).value_or(LabelStatus::Failed);
  r.difficulty.reset();
  if (const auto it = j.find("difficulty"); it != j.end() && it->is_object()) {
    DifficultyLabel d;
    d.level = parse_difficulty_level(it->value("level", "")).value_or(DifficultyLevel::Unclassifiable);
    d.reasoning = it->value("reasoning", "");
    r.difficulty = d;
  }
  r.labeler_model = j.value("labeler_model", "");
}

std::string_view semantic_prompt_template() { return assets::semantic_labeling_prompt(); }

std::string_view difficulty_prompt_template(Domain domain) {
  return domain == Domain::Math ? assets::math_level_prompt() : assets::programming_level_prompt();
}

std::string render_prompt(std::string_view tmpl, std::string_view text) {
  constexpr std::string_view kField = "{text}";
  std::string out;
  out.reserve(tmpl.size() + text.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 2, "{{") == 0) {
      out.push_back('{');
      i += 2;
    } else if (tmpl.compare(i, 2, "}}") == 0) {
      out.push_back('}');
      i += 2;
    } else if (tmpl.compare(i, kField.size(), kField) == 0) {
      out.append(text);
      i += kField.size();
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

namespace {

// Removes commas that directly precede '}' or ']' (ignoring whitespace),
// outside string literals.
std::string strip_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false, escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t k = i + 1;
      while (k < s.size() && (s[k] == ' ' || s[k] == '\t' || s[k] == '\n' || s[k] == '\r')) ++k;
      if (k < s.size() && (s[k] == '}' || s[k] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

// End (exclusive) of the balanced block opening at `open`, or npos.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<json> extract_json_object(std::string_view response) {
  for (auto open = response.find('{'); open != std::string_view::npos; open = response.find('{', open + 1)) {
    const auto end = balanced_end(response, open);
    if (end == std::string_view::npos) continue;
    const auto block = response.substr(open, end - open);
    auto parsed = json::parse(block, nullptr, false);
    if (parsed.is_discarded()) parsed = json::parse(strip_trailing_commas(block), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

namespace {

std::string clean_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return to_lower_ascii(trim(it->get<std::string>()));
}

}  // namespace

std::optional<SemanticLabel> parse_semantic(std::string_view response) {
  const auto obj = extract_json_object(response);
  if (!obj || !obj->contains("category")) return std::nullopt;
  SemanticLabel label;
  label.category = clean_field(*obj, "category");
  label.subcategory = clean_field(*obj, "subcategory");
  if (label.category.empty() || label.category == "unknown" || label.subcategory.empty()) {
    label.status = LabelStatus::Unknown;
  } else {
    label.status = LabelStatus::Ok;
  }
  return label;
}

std::optional<DifficultyLabel> parse_difficulty(std::string_view response) {
  const auto obj = extract_json_object(response);
  if (!obj) return std::nullopt;
  const auto level = parse_difficulty_level(clean_field(*obj, "difficulty"));
  if (!level) return std::nullopt;
  DifficultyLabel label;
  label.level = *level;
  if (const auto it = obj->find("reasoning"); it != obj->end() && it->is_string()) label.reasoning = *it;
  return label;
}

JudgeFn http_judge(const JudgeConfig& config) {
  const auto endpoint = http::Endpoint::parse(config.endpoint_url);
  return [endpoint, config](const std::string& prompt) -> std::optional<std::string> {
    const json body{{"model", config.model_id},
                    {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                    {"temperature", config.temperature},
                    {"max_tokens", config.max_tokens}};
    const auto result = http::post_json(endpoint, body, config.client);
    if (!result.ok) {
      spdlog::warn("judge request failed: {}", result.error);
      return std::nullopt;
    }
    try {
      const auto& message = result.body.at("choices").at(0).at("message");
      const auto& content = message.at("content");
      if (content.is_string()) return content.get<std::string>();
    } catch (const json::exception&) {
    }
    spdlog::warn("judge response has no message content");
    return std::string{};
  };
}

SemanticLabel label_semantic(std::string_view text, const JudgeFn& judge, int parse_retries) {
  const std::string prompt = render_prompt(semantic_prompt_template(), text);
  for (int attempt = 0; attempt <= parse_retries; ++attempt) {
    const auto reply = judge(prompt);
    if (!reply) break;  // transport already retried
    if (auto label = parse_semantic(*reply)) return *label;
  }
  return SemanticLabel{{}, {}, LabelStatus::Failed};
}

SemanticLabel label_semantic(std::string_view text, const JudgeConfig& config) {
  return label_semantic(text, http_judge(config), config.parse_retries);
}

DifficultyLabel grade_difficulty(std::string_view text, Domain domain, const JudgeFn& judge, int parse_retries) {
  const std::string prompt = render_prompt(difficulty_prompt_template(domain), text);
  for (int attempt = 0; attempt <= parse_retries; ++attempt) {
    const auto reply = judge(prompt);
    if (!reply) break;
    if (auto label = parse_difficulty(*reply)) return *label;
  }
  return DifficultyLabel{DifficultyLevel::Unclassifiable, "parse-failure"};
}

DifficultyLabel grade_difficulty(std::string_view text, Domain domain, const JudgeConfig& config) {
  return grade_difficulty(text, domain, http_judge(config), config.parse_retries);
}

namespace {

const std::map<std::string, std::string, std::less<>>& alias_table() {
  static const auto table = [] {
    std::map<std::string, std::string, std::less<>> t;
    const std::string_view tsv = assets::label_aliases_tsv();
    std::size_t pos = 0;
    while (pos < tsv.size()) {
      auto nl = tsv.find('\n', pos);
      if (nl == std::string_view::npos) nl = tsv.size();
      const auto line = tsv.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string_view::npos) continue;
      t.emplace(std::string(line.substr(0, tab)), trim(line.substr(tab + 1)));
    }
    return t;
  }();
  return table;
}

}  // namespace

std::string normalize_label(std::string_view raw) {
  const std::string lowered = to_lower_ascii(trim(raw));
  std::string collapsed;
  collapsed.reserve(lowered.size());
  bool space = false;
  for (char c : lowered) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = true;
      continue;
    }
    if (space && !collapsed.empty()) collapsed.push_back(' ');
    space = false;
    collapsed.push_back(c);
  }
  const auto& table = alias_table();
  if (const auto it = table.find(collapsed); it != table.end()) return it->second;
  return collapsed;
}

Agreement agreement(std::span<const SemanticLabel> a, std::span<const SemanticLabel> b) {
  if (a.size() != b.size())
    throw Error("agreement: label lists differ in length (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  if (a.empty()) throw Error("agreement: no labels to compare");
  std::size_t strict = 0, relaxed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    strict += a[i].category == b[i].category;
    relaxed += normalize_label(a[i].category) == normalize_label(b[i].category);
  }
  const auto n = static_cast<double>(a.size());
  return {static_cast<double>(strict) / n, static_cast<double>(relaxed) / n};
}

}  // namespace topmind::annotate
