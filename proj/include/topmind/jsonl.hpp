#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace topmind::jsonl {

using json = nlohmann::json;

/// Reads every complete, parseable line. A trailing line without a newline
/// (an interrupted append) is ignored; a malformed complete line throws.
std::vector<json> read(const std::filesystem::path& path);

/// Drops a torn trailing line left by an interrupted writer so appends start
/// on a line boundary. Returns the number of bytes removed.
std::size_t repair_tail(const std::filesystem::path& path);

/// Append-only JSONL writer. Each line goes out in a single write followed by
/// a flush, so a crash leaves a valid prefix.
class Writer {
 public:
  enum class Mode { Append, Truncate };

  explicit Writer(const std::filesystem::path& path, Mode mode = Mode::Append);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void write(const json& record);

 private:
  std::FILE* file_ = nullptr;
  std::filesystem::path path_;
};

/// Writes `text` to `path` atomically enough for our purposes (temp + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace topmind::jsonl
