#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topmind/annotate.hpp"
#include "topmind/http.hpp"

namespace topmind::embed {

/// Row-major float32 matrix aligned to record ids.
///
/// On disk a store is three files sharing a prefix:
///   PREFIX.f32   little-endian float32 values, rows * dim, no header
///   PREFIX.ids   one record id per line, row order
///   PREFIX.json  {"format", "model_id", "dim", "rows"}
struct EmbeddingStore {
  std::string model_id;
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;

  std::size_t rows() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

inline constexpr const char* kStoreFormat = "topmind-f32-rowmajor-v1";

std::filesystem::path matrix_path(const std::filesystem::path& prefix);
std::filesystem::path ids_path(const std::filesystem::path& prefix);
std::filesystem::path meta_path(const std::filesystem::path& prefix);

bool store_exists(const std::filesystem::path& prefix);

/// Throws when the three files disagree on shape.
EmbeddingStore read_store(const std::filesystem::path& prefix);
void write_store(const std::filesystem::path& prefix, const EmbeddingStore& store);

/// Appends rows to an existing (or new) store and rewrites the metadata.
void append_rows(const std::filesystem::path& prefix, const std::string& model_id, std::size_t dim,
                 std::span<const std::string> ids, std::span<const float> values);

/// Raw float32 matrix helpers, shared with the fingerprint model files.
void write_f32(const std::filesystem::path& path, std::span<const float> values, bool append = false);
std::vector<float> read_f32(const std::filesystem::path& path);

struct EmbedConfig {
  std::string endpoint_url;  ///< embeddings-style endpoint
  std::string model_id;
  std::size_t batch_size = 32;
  http::ClientOptions client;
};

struct EmbedSummary {
  std::size_t requested = 0;
  std::size_t embedded = 0;
  std::size_t skipped_existing = 0;
  std::vector<std::string> missing;  ///< ids whose requests failed for good
  std::size_t dim = 0;
};

nlohmann::json to_json(const EmbedSummary& s);

/// Thrown when the endpoint returns vectors of differing dimension.
class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Embeds cleaned_text of every record not already present in the store at
/// `prefix`, POSTing {model, input:[texts]} in batches. Non-finite values and
/// dimension changes abort; failed batches are reported as missing and will
/// be retried by the next run.
EmbedSummary embed_batch(std::span<const annotate::LabeledRecord> records, const EmbedConfig& config,
                         const std::filesystem::path& prefix);

}  // namespace topmind::embed
