#include "topmind/embed.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "topmind/error.hpp"
#include "topmind/jsonl.hpp"

namespace topmind::embed {

using nlohmann::json;

std::filesystem::path matrix_path(const std::filesystem::path& prefix) {
  auto p = prefix;
  p += ".f32";
  return p;
}

std::filesystem::path ids_path(const std::filesystem::path& prefix) {
  auto p = prefix;
  p += ".ids";
  return p;
}

std::filesystem::path meta_path(const std::filesystem::path& prefix) {
  auto p = prefix;
  p += ".json";
  return p;
}

bool store_exists(const std::filesystem::path& prefix) {
  return std::filesystem::exists(meta_path(prefix)) && std::filesystem::exists(matrix_path(prefix)) &&
         std::filesystem::exists(ids_path(prefix));
}

void write_f32(const std::filesystem::path& path, std::span<const float> values, bool append) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw UsageError("cannot open output file for writing: " + path.string());
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(bytes.data() + 4 * i, &bits, 4);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path) {
  const std::string bytes = jsonl::read_text_file(path);
  if (bytes.size() % 4 != 0) throw Error(path.string() + ": size is not a multiple of 4 bytes");
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

namespace {

std::vector<std::string> read_ids(const std::filesystem::path& path) {
  const std::string text = jsonl::read_text_file(path);
  std::vector<std::string> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    ids.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return ids;
}

void write_meta(const std::filesystem::path& prefix, const std::string& model_id, std::size_t dim,
                std::size_t rows) {
  const json meta{{"format", kStoreFormat}, {"model_id", model_id}, {"dim", dim}, {"rows", rows}};
  jsonl::write_text_file(meta_path(prefix), meta.dump(2) + "\n");
}

}  // namespace

EmbeddingStore read_store(const std::filesystem::path& prefix) {
  const json meta = json::parse(jsonl::read_text_file(meta_path(prefix)));
  EmbeddingStore store;
  store.model_id = meta.value("model_id", "");
  store.dim = meta.at("dim").get<std::size_t>();
  store.ids = read_ids(ids_path(prefix));
  store.values = read_f32(matrix_path(prefix));
  const auto rows = meta.at("rows").get<std::size_t>();
  if (store.ids.size() != rows || store.values.size() != rows * store.dim)
    throw Error("embedding store " + prefix.string() + " is inconsistent: metadata says " + std::to_string(rows) +
                " rows, id index has " + std::to_string(store.ids.size()) + ", matrix holds " +
                std::to_string(store.values.size()) + " values");
  return store;
}

void write_store(const std::filesystem::path& prefix, const EmbeddingStore& store) {
  if (store.values.size() != store.ids.size() * store.dim) throw Error("write_store: shape mismatch");
  write_f32(matrix_path(prefix), store.values);
  std::string ids;
  for (const auto& id : store.ids) ids += id + "\n";
  jsonl::write_text_file(ids_path(prefix), ids);
  write_meta(prefix, store.model_id, store.dim, store.ids.size());
}

void append_rows(const std::filesystem::path& prefix, const std::string& model_id, std::size_t dim,
                 std::span<const std::string> ids, std::span<const float> values) {
  if (values.size() != ids.size() * dim) throw Error("append_rows: shape mismatch");
  std::size_t rows = 0;
  if (store_exists(prefix)) {
    const json meta = json::parse(jsonl::read_text_file(meta_path(prefix)));
    if (meta.at("dim").get<std::size_t>() != dim)
      throw DimensionMismatch("store " + prefix.string() + " has dim " + meta.at("dim").dump() +
                              ", new rows have dim " + std::to_string(dim));
    rows = meta.at("rows").get<std::size_t>();
  } else {
    write_f32(matrix_path(prefix), {}, false);
    jsonl::write_text_file(ids_path(prefix), "");
  }
  write_f32(matrix_path(prefix), values, true);
  {
    std::ofstream out(ids_path(prefix), std::ios::binary | std::ios::app);
    for (const auto& id : ids) out << id << '\n';
  }
  write_meta(prefix, model_id, dim, rows + ids.size());
}

json to_json(const EmbedSummary& s) {
  return json{{"requested", s.requested},
              {"embedded", s.embedded},
              {"skipped_existing", s.skipped_existing},
              {"missing", s.missing},
              {"dim", s.dim}};
}

EmbedSummary embed_batch(std::span<const annotate::LabeledRecord> records, const EmbedConfig& config,
                         const std::filesystem::path& prefix) {
  const auto endpoint = http::Endpoint::parse(config.endpoint_url);
  EmbedSummary summary;
  summary.requested = records.size();

  std::unordered_set<std::string> existing;
  std::size_t dim = 0;
  if (store_exists(prefix)) {
    const auto store = read_store(prefix);
    existing.insert(store.ids.begin(), store.ids.end());
    dim = store.dim;
  }

  std::vector<const annotate::LabeledRecord*> todo;
  for (const auto& r : records) {
    if (existing.contains(r.record_id)) {
      ++summary.skipped_existing;
      continue;
    }
    todo.push_back(&r);
  }

  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t begin = 0; begin < todo.size(); begin += batch) {
    const std::size_t end = std::min(todo.size(), begin + batch);
    json inputs = json::array();
    for (std::size_t i = begin; i < end; ++i) inputs.push_back(todo[i]->cleaned_text);
    const auto result = http::post_json(endpoint, json{{"model", config.model_id}, {"input", inputs}}, config.client);

    std::vector<std::vector<float>> vectors;
    bool usable = result.ok;
    if (usable) {
      try {
        const auto& data = result.body.at("data");
        if (data.size() != end - begin) throw Error("embedding response has wrong number of vectors");
        vectors.resize(data.size());
        for (std::size_t k = 0; k < data.size(); ++k) {
          const auto& item = data[k];
          const auto idx = item.value("index", k);
          if (idx >= vectors.size()) throw Error("embedding response index out of range");
          for (const auto& v : item.at("embedding")) vectors[idx].push_back(v.get<float>());
        }
      } catch (const std::exception& e) {
        spdlog::warn("malformed embedding response: {}", e.what());
        usable = false;
      }
    } else {
      spdlog::warn("embedding request failed: {}", result.error);
    }
    if (!usable) {
      for (std::size_t i = begin; i < end; ++i) summary.missing.push_back(todo[i]->record_id);
      continue;
    }

    std::vector<std::string> ids;
    std::vector<float> flat;
    for (std::size_t k = 0; k < vectors.size(); ++k) {
      const auto& v = vectors[k];
      if (dim == 0) dim = v.size();
      if (v.size() != dim || dim == 0)
        throw DimensionMismatch("record " + todo[begin + k]->record_id + ": embedding has dim " +
                                std::to_string(v.size()) + ", expected " + std::to_string(dim));
      for (float x : v)
        if (!std::isfinite(x)) throw Error("record " + todo[begin + k]->record_id + ": non-finite embedding value");
      ids.push_back(todo[begin + k]->record_id);
      flat.insert(flat.end(), v.begin(), v.end());
    }
    append_rows(prefix, config.model_id, dim, ids, flat);
    summary.embedded += ids.size();
  }
  summary.dim = dim;
  return summary;
}

}  // namespace topmind::embed
