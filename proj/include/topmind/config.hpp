#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace topmind::config {

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; later keys win.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  /// Throws UsageError when the file cannot be read or a line has no '='.
  static KeyValues load(const std::filesystem::path& path);

  /// For each key, TOPMIND_<KEY> (uppercased, '.' and '-' as '_') replaces
  /// the file value when set.
  void apply_env_overrides(const std::vector<std::string>& keys);

  std::optional<std::string> get(std::string_view key) const;
  void set(std::string key, std::string value);
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Name of the environment variable overriding `key`.
std::string env_name(std::string_view key);

struct ModelTarget {
  std::string model_id;
  std::string family;
};

/// Everything a full pipeline run needs. Keys (defaults in parentheses):
///
///   work_dir (.)                  seed (0)
///   stages (generate,clean,artifacts,label,grade,embed,analyze,fingerprint)
///   generation.endpoint           generation.models   model@family, comma separated
///   generation.n (per model, 50)  generation.temperature (1.0)  generation.top_p (0.9)
///   generation.max_tokens (4096)  generation.parallel (8)       generation.fixed_time
///   judge.endpoint  judge.model   judge.parse_retries (3)       judge.parallel (8)
///   embedding.endpoint  embedding.model  embedding.batch_size (32)
///   http.max_retries (5)  http.base_delay_ms (500)  http.max_delay_ms (30000)  http.timeout_s (300)
///   analyze.splits (10)  analyze.top_k (9)
///   fingerprint.epochs (500)  fingerprint.learning_rate (0.1)  fingerprint.l2 (1e-4)
///   fingerprint.l2_normalize (false)  fingerprint.target (model|family, model)
struct PipelineConfig {
  std::filesystem::path work_dir = ".";
  std::uint64_t seed = 0;
  std::vector<std::string> stages;

  std::string generation_endpoint;
  std::vector<ModelTarget> models;
  std::size_t samples_per_model = 50;
  double temperature = 1.0;
  double top_p = 0.9;
  int max_tokens = 4096;
  std::size_t generation_parallel = 8;
  std::optional<std::string> fixed_time;

  std::string judge_endpoint;
  std::string judge_model;
  int judge_parse_retries = 3;
  std::size_t judge_parallel = 8;

  std::string embedding_endpoint;
  std::string embedding_model;
  std::size_t embedding_batch_size = 32;

  int max_retries = 5;
  int base_delay_ms = 500;
  int max_delay_ms = 30'000;
  int timeout_s = 300;

  std::size_t analyze_splits = 10;
  std::size_t analyze_top_k = 9;

  int fingerprint_epochs = 500;
  double fingerprint_learning_rate = 0.1;
  double fingerprint_l2 = 1e-4;
  bool fingerprint_l2_normalize = false;
  std::string fingerprint_target = "model";

  /// Every key the pipeline reads; env overrides are looked up for these.
  static const std::vector<std::string>& known_keys();
  /// Throws UsageError for unknown keys or malformed values.
  static PipelineConfig from(const KeyValues& kv);

  /// The resolved settings, as recorded in run manifests. work_dir is left
  /// out so the snapshot does not depend on where a run happens.
  nlohmann::json snapshot() const;
};

inline const std::vector<std::string> kAllStages{"generate", "clean", "artifacts", "label", "grade",
                                                 "embed",    "analyze", "fingerprint"};

}  // namespace topmind::config
