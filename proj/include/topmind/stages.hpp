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

#include "topmind/analytics.hpp"
#include "topmind/annotate.hpp"
#include "topmind/artifacts.hpp"
#include "topmind/config.hpp"
#include "topmind/embed.hpp"
#include "topmind/fingerprint.hpp"

// File-level stage drivers shared by the CLI subcommands and the pipeline.
// Each reads its inputs from disk and writes its outputs to disk.
namespace topmind::stages {

using std::filesystem::path;

enum class Format { Csv, Json, Text };
std::optional<Format> parse_format(std::string_view name);

/// Parses a whole JSONL file of labeled records.
std::vector<annotate::LabeledRecord> read_labeled(const path& in);

// ---------------------------------------------------------------------------
// clean / degen-stats

struct CleanSummary {
  std::size_t records = 0;
  std::size_t degenerate = 0;
};
nlohmann::json to_json(const CleanSummary& s);

/// Every generation record gains `cleaned_text` and `degenerate`; the report
/// sidecar holds {record_id, model_id, family, degenerate, report}.
CleanSummary clean(const path& in, const path& out, const path& report);

std::string degen_stats(const path& report, analytics::GroupBy by, Format format);

// ---------------------------------------------------------------------------
// artifacts

/// Which text is classified: the whole model output, only the repeated
/// phrase (empty for non-degenerate records), or the cleaned text.
enum class Scope { Output, Phrase, Cleaned };
std::optional<Scope> parse_scope(std::string_view name);
std::string_view to_string(Scope scope);

std::size_t flag_artifacts(const path& clean_in, const path& report_in, const path& out, Scope scope,
                           const artifacts::ClassifyOptions& options = {});

std::string artifact_summary(const path& flags, artifacts::Denominator denominator, Format format);

// ---------------------------------------------------------------------------
// label / grade

struct LabelSummary {
  std::size_t requested = 0;
  std::size_t labeled = 0;
  std::size_t skipped_existing = 0;
  std::map<std::string, std::size_t> by_status;
};
nlohmann::json to_json(const LabelSummary& s);

/// Labels cleaned_text of every clean record not yet present in `out`,
/// appending in input order.
LabelSummary label(const path& in, const path& out, const annotate::JudgeFn& judge, const std::string& labeler_model,
                   int parse_retries, std::size_t parallel);

struct GradeSummary {
  std::size_t records = 0;
  std::size_t graded = 0;
  std::size_t skipped_existing = 0;
  std::map<std::string, std::size_t> by_level;
};
nlohmann::json to_json(const GradeSummary& s);

/// Copies labeled records to `out`, adding a difficulty grade to those whose
/// category belongs to one of `domains`. Records already in `out` are kept.
GradeSummary grade(const path& in, const path& out, const std::vector<annotate::Domain>& domains,
                   const annotate::JudgeFn& judge, int parse_retries, std::size_t parallel);

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  analytics::GroupBy by = analytics::GroupBy::Family;
  analytics::LabelLevel level = analytics::LabelLevel::Category;
  std::size_t splits = 10;
  std::uint64_t seed = 0;
  std::string category;
  std::size_t top_k = 9;
  annotate::Domain domain = annotate::Domain::Math;
  std::size_t per_family = 0;
  std::optional<path> subset_out;  ///< balance only
};

/// Long-format rows plus a structured JSON rendering.
struct Table {
  std::vector<std::string> owners;
  std::vector<std::string> labels;
  std::vector<double> values;
  bool values_are_fractions = false;  ///< text output shows them as percentages
  nlohmann::json detail;

  void add(std::string owner, std::string label, double value);
  std::string render(Format format) const;
};

inline const std::vector<std::string> kAnalyses{"dist", "similarity", "robustness", "subcat", "depth", "balance"};

/// Throws UsageError for unknown kinds or missing required options.
Table analyze(std::string_view kind, const path& in, const AnalyzeOptions& options);

// ---------------------------------------------------------------------------
// fingerprint

enum class Target { Model, Family };
std::optional<Target> parse_target(std::string_view name);

/// Trains on the rows of the store whose ids appear in `labels`, saves the
/// model at `out` and returns the held-out report.
fingerprint::EvalReport fingerprint_train(const path& embeddings, const path& labels, Target target,
                                          const fingerprint::TrainConfig& config, const path& out);

/// Rebuilds the held-out split recorded with the model and evaluates it.
fingerprint::EvalReport fingerprint_eval(const path& model);

// ---------------------------------------------------------------------------
// pipeline

/// File names inside the work directory.
namespace files {
inline constexpr const char* kGenerations = "generations.jsonl";
inline constexpr const char* kClean = "clean.jsonl";
inline constexpr const char* kDegenReport = "degen_report.jsonl";
inline constexpr const char* kArtifactFlags = "artifact_flags.jsonl";
inline constexpr const char* kLabeled = "labeled.jsonl";
inline constexpr const char* kGraded = "graded.jsonl";
inline constexpr const char* kEmbeddings = "embeddings";
inline constexpr const char* kAnalysisDir = "analysis";
inline constexpr const char* kModel = "fingerprint";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace files

struct StageResult {
  std::string stage;
  nlohmann::json summary;
};

/// Runs the configured stages in order inside work_dir. Every input a stage
/// needs must either exist or come from an earlier stage of this run;
/// otherwise UsageError names the missing file before anything runs.
/// Writes manifest.json (config snapshot, stage summaries, output hashes).
std::vector<StageResult> run_pipeline(const config::PipelineConfig& config);

}  // namespace topmind::stages
