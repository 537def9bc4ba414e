#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace topmind::artifacts {

inline constexpr std::array<std::string_view, 4> kConversationalMarkers{
    "feel free to", "thank", "best regards", "let me know"};
inline constexpr std::array<std::string_view, 3> kQuestionAnswerMarkers{
    "boxed", "final answer is", "correct answer is"};

/// Bumped whenever a PII pattern changes; written next to every flag file.
inline constexpr std::string_view kPiiPatternVersion = "pii-v1";

enum class PiiKind { FacebookUrl, InstagramUrl, TwitterUrl, Email, OtherUrl };

std::string_view to_string(PiiKind kind);
std::optional<PiiKind> parse_pii_kind(std::string_view name);

struct PiiHit {
  PiiKind kind = PiiKind::OtherUrl;
  std::string matched_text;
  std::size_t char_offset = 0;  ///< scalar offset into the classified text

  friend bool operator==(const PiiHit&, const PiiHit&) = default;
};

struct ArtifactFlags {
  bool conversational = false;
  bool question_answer = false;
  bool cjk = false;
  bool emoji = false;
  std::vector<PiiHit> pii_hits;  ///< ordered by char_offset

  friend bool operator==(const ArtifactFlags&, const ArtifactFlags&) = default;
};

struct ClassifyOptions {
  std::size_t cjk_threshold = 10;  ///< minimum count of CJK ideographs
};

/// Marker flags are case-insensitive substring matches. Social-profile URLs
/// (facebook.com/, instagram.com/, twitter.com/, x.com/ followed by a path)
/// and emails are reported by kind; any other http(s) URL not already covered
/// by one of those hits is reported as other_url.
ArtifactFlags classify(std::string_view text, const ClassifyOptions& options = {});

enum class Denominator { DegenerateOnly, All };

struct FlaggedRecord {
  std::string family;
  bool degenerate = false;
  ArtifactFlags flags;
};

/// Rates per family. A rate is absent when its denominator is zero.
struct RateRow {
  std::string family;
  std::size_t denominator = 0;
  std::optional<double> conversational;
  std::optional<double> question_answer;
  std::optional<double> cjk;
  std::optional<double> emoji;
  std::optional<double> pii;
  /// Emoji rate among the records that are also conversational.
  std::optional<double> emoji_given_conversational;
};

std::vector<RateRow> artifact_rates(std::span<const FlaggedRecord> records, Denominator denominator);

void to_json(nlohmann::json& j, const PiiHit& h);
void from_json(const nlohmann::json& j, PiiHit& h);
void to_json(nlohmann::json& j, const ArtifactFlags& f);
void from_json(const nlohmann::json& j, ArtifactFlags& f);
nlohmann::json to_json(const RateRow& row);

}  // namespace topmind::artifacts
