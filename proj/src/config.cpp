#include "topmind/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>

#include "topmind/error.hpp"
#include "topmind/jsonl.hpp"
#include "topmind/text_format.hpp"

namespace topmind::config {

namespace {

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    auto item = trim(text.substr(pos, comma - pos));
    if (!item.empty()) out.push_back(std::move(item));
    pos = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw UsageError("config: " + key + " is not a valid number: " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = to_lower_ascii(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config: " + key + " is not a boolean: " + value);
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = std::min(text.find('\n', pos), text.size());
    const auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    kv.entries_[std::move(key)] = trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
  return parse(jsonl::read_text_file(path));
}

std::string env_name(std::string_view key) {
  std::string name = "TOPMIND_";
  for (char c : key) {
    if (c == '.' || c == '-') c = '_';
    name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

void KeyValues::apply_env_overrides(const std::vector<std::string>& keys) {
  for (const auto& key : keys)
    if (const char* v = std::getenv(env_name(key).c_str())) entries_[key] = v;
}

std::optional<std::string> KeyValues::get(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void KeyValues::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

const std::vector<std::string>& PipelineConfig::known_keys() {
  static const std::vector<std::string> keys{
      "work_dir",
      "seed",
      "stages",
      "generation.endpoint",
      "generation.models",
      "generation.n",
      "generation.temperature",
      "generation.top_p",
      "generation.max_tokens",
      "generation.parallel",
      "generation.fixed_time",
      "judge.endpoint",
      "judge.model",
      "judge.parse_retries",
      "judge.parallel",
      "embedding.endpoint",
      "embedding.model",
      "embedding.batch_size",
      "http.max_retries",
      "http.base_delay_ms",
      "http.max_delay_ms",
      "http.timeout_s",
      "analyze.splits",
      "analyze.top_k",
      "fingerprint.epochs",
      "fingerprint.learning_rate",
      "fingerprint.l2",
      "fingerprint.l2_normalize",
      "fingerprint.target",
  };
  return keys;
}

PipelineConfig PipelineConfig::from(const KeyValues& kv) {
  const std::set<std::string> known(known_keys().begin(), known_keys().end());
  for (const auto& [key, value] : kv.entries())
    if (!known.contains(key)) throw UsageError("config: unknown key " + key);

  PipelineConfig c;
  const auto str = [&](const char* key, auto& field) {
    if (auto v = kv.get(key)) field = *v;
  };
  const auto num = [&](const char* key, auto& field) {
    using T = std::remove_reference_t<decltype(field)>;
    if (auto v = kv.get(key)) field = parse_number<T>(key, *v);
  };

  if (auto v = kv.get("work_dir")) c.work_dir = *v;
  num("seed", c.seed);
  c.stages = kAllStages;
  if (auto v = kv.get("stages")) {
    c.stages = split_list(*v);
    for (const auto& s : c.stages)
      if (std::find(kAllStages.begin(), kAllStages.end(), s) == kAllStages.end())
        throw UsageError("config: unknown stage " + s);
  }

  str("generation.endpoint", c.generation_endpoint);
  if (auto v = kv.get("generation.models")) {
    for (const auto& item : split_list(*v)) {
      const auto at = item.find('@');
      if (at == std::string::npos || at == 0 || at + 1 == item.size())
        throw UsageError("config: generation.models entries must look like model@family: " + item);
      c.models.push_back({item.substr(0, at), item.substr(at + 1)});
    }
  }
  num("generation.n", c.samples_per_model);
  num("generation.temperature", c.temperature);
  num("generation.top_p", c.top_p);
  num("generation.max_tokens", c.max_tokens);
  num("generation.parallel", c.generation_parallel);
  if (auto v = kv.get("generation.fixed_time"); v && !v->empty()) c.fixed_time = *v;

  str("judge.endpoint", c.judge_endpoint);
  str("judge.model", c.judge_model);
  num("judge.parse_retries", c.judge_parse_retries);
  num("judge.parallel", c.judge_parallel);

  str("embedding.endpoint", c.embedding_endpoint);
  str("embedding.model", c.embedding_model);
  num("embedding.batch_size", c.embedding_batch_size);

  num("http.max_retries", c.max_retries);
  num("http.base_delay_ms", c.base_delay_ms);
  num("http.max_delay_ms", c.max_delay_ms);
  num("http.timeout_s", c.timeout_s);

  num("analyze.splits", c.analyze_splits);
  num("analyze.top_k", c.analyze_top_k);

  num("fingerprint.epochs", c.fingerprint_epochs);
  num("fingerprint.learning_rate", c.fingerprint_learning_rate);
  num("fingerprint.l2", c.fingerprint_l2);
  if (auto v = kv.get("fingerprint.l2_normalize")) c.fingerprint_l2_normalize = parse_bool("fingerprint.l2_normalize", *v);
  str("fingerprint.target", c.fingerprint_target);
  if (c.fingerprint_target != "model" && c.fingerprint_target != "family")
    throw UsageError("config: fingerprint.target must be model or family");

  if (c.generation_parallel == 0 || c.judge_parallel == 0) throw UsageError("config: parallelism must be >= 1");
  if (c.embedding_batch_size == 0) throw UsageError("config: embedding.batch_size must be >= 1");
  if (c.max_retries < 0) throw UsageError("config: http.max_retries must be >= 0");
  return c;
}

nlohmann::json PipelineConfig::snapshot() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : this->models) models.push_back({{"model_id", m.model_id}, {"family", m.family}});
  return {
      {"seed", seed},
      {"stages", stages},
      {"generation",
       {{"endpoint", generation_endpoint},
        {"models", models},
        {"n", samples_per_model},
        {"temperature", temperature},
        {"top_p", top_p},
        {"max_tokens", max_tokens},
        {"parallel", generation_parallel},
        {"fixed_time", fixed_time ? nlohmann::json(*fixed_time) : nlohmann::json()}}},
      {"judge",
       {{"endpoint", judge_endpoint},
        {"model", judge_model},
        {"parse_retries", judge_parse_retries},
        {"parallel", judge_parallel}}},
      {"embedding", {{"endpoint", embedding_endpoint}, {"model", embedding_model}, {"batch_size", embedding_batch_size}}},
      {"http",
       {{"max_retries", max_retries},
        {"base_delay_ms", base_delay_ms},
        {"max_delay_ms", max_delay_ms},
        {"timeout_s", timeout_s}}},
      {"analyze", {{"splits", analyze_splits}, {"top_k", analyze_top_k}}},
      {"fingerprint",
       {{"epochs", fingerprint_epochs},
        {"learning_rate", fingerprint_learning_rate},
        {"l2", fingerprint_l2},
        {"l2_normalize", fingerprint_l2_normalize},
        {"target", fingerprint_target}}},
  };
}

}  // namespace topmind::config
