#include "topmind/artifacts.hpp"

#include <algorithm>
#include <map>

#include <boost/regex.hpp>

#include "topmind/text_format.hpp"
#include "topmind/unicode.hpp"

namespace topmind::artifacts {
namespace {

constexpr std::array<std::string_view, 5> kKindNames{"facebook_url", "instagram_url", "twitter_url",
                                                     "email", "other_url"};

// Path characters allowed after a social host. Stops at whitespace, quotes,
// brackets and trailing sentence punctuation is trimmed afterwards.
constexpr const char* kPathChars = R"([A-Za-z0-9_.~%+\-/?=&#@!:])";

boost::regex social_regex(std::string_view hosts) {
  return boost::regex(R"((?:https?://)?(?:[A-Za-z0-9-]+\.)*(?<![A-Za-z0-9-]))" + std::string(hosts) +
                          R"(\.com/)" + kPathChars + "+",
                      boost::regex::icase);
}

const boost::regex& social_pattern(PiiKind kind) {
  static const boost::regex facebook = social_regex("facebook");
  static const boost::regex instagram = social_regex("instagram");
  static const boost::regex twitter = social_regex("(?:twitter|x)");
  switch (kind) {
    case PiiKind::FacebookUrl: return facebook;
    case PiiKind::InstagramUrl: return instagram;
    default: return twitter;
  }
}

const boost::regex& email_pattern() {
  static const boost::regex re(R"((?<![A-Za-z0-9._%+\-])[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,})");
  return re;
}

const boost::regex& url_pattern() {
  static const boost::regex re(R"(https?://[^\s<>"'`()\[\]{}]+)", boost::regex::icase);
  return re;
}

std::size_t trim_trailing_punct(std::string_view s) {
  std::size_t len = s.size();
  while (len > 0 && std::string_view(".,;:!?").find(s[len - 1]) != std::string_view::npos) --len;
  return len;
}

struct ByteHit {
  PiiKind kind;
  std::size_t begin;
  std::size_t end;
};

void collect(std::string_view text, const boost::regex& re, PiiKind kind, std::vector<ByteHit>& out) {
  boost::cregex_iterator it(text.data(), text.data() + text.size(), re);
  for (; it != boost::cregex_iterator(); ++it) {
    const auto begin = static_cast<std::size_t>((*it)[0].first - text.data());
    auto len = static_cast<std::size_t>((*it)[0].length());
    if (kind != PiiKind::Email) len = trim_trailing_punct(text.substr(begin, len));
    if (len == 0) continue;
    out.push_back({kind, begin, begin + len});
  }
}

bool overlaps(const ByteHit& a, const ByteHit& b) { return a.begin < b.end && b.begin < a.end; }

}  // namespace

std::string_view to_string(PiiKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<PiiKind> parse_pii_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<PiiKind>(i);
  return std::nullopt;
}

ArtifactFlags classify(std::string_view text, const ClassifyOptions& options) {
  ArtifactFlags flags;
  const std::string lower = to_lower_ascii(text);
  flags.conversational = std::ranges::any_of(
      kConversationalMarkers, [&](std::string_view m) { return lower.find(m) != std::string::npos; });
  flags.question_answer = std::ranges::any_of(
      kQuestionAnswerMarkers, [&](std::string_view m) { return lower.find(m) != std::string::npos; });

  const auto decoded = unicode::decode(text);
  std::size_t cjk = 0;
  for (char32_t cp : decoded.chars) {
    if (unicode::is_cjk_unified_ideograph(cp)) ++cjk;
    if (unicode::is_emoji_presentation(cp)) flags.emoji = true;
  }
  flags.cjk = cjk >= options.cjk_threshold && cjk > 0;

  // Specific kinds first; generic URLs only where nothing specific matched.
  std::vector<ByteHit> hits;
  collect(text, social_pattern(PiiKind::FacebookUrl), PiiKind::FacebookUrl, hits);
  collect(text, social_pattern(PiiKind::InstagramUrl), PiiKind::InstagramUrl, hits);
  collect(text, social_pattern(PiiKind::TwitterUrl), PiiKind::TwitterUrl, hits);
  collect(text, email_pattern(), PiiKind::Email, hits);
  std::vector<ByteHit> generic;
  collect(text, url_pattern(), PiiKind::OtherUrl, generic);
  for (const auto& g : generic)
    if (std::ranges::none_of(hits, [&](const ByteHit& h) { return overlaps(g, h); })) hits.push_back(g);

  std::ranges::sort(hits, [](const ByteHit& a, const ByteHit& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.kind < b.kind;
  });
  // Byte offsets to scalar offsets via the decoded offset table.
  for (const auto& h : hits) {
    const auto it = std::ranges::lower_bound(decoded.byte_offsets, h.begin);
    const auto char_offset = static_cast<std::size_t>(it - decoded.byte_offsets.begin());
    flags.pii_hits.push_back({h.kind, std::string(text.substr(h.begin, h.end - h.begin)), char_offset});
  }
  return flags;
}

std::vector<RateRow> artifact_rates(std::span<const FlaggedRecord> records, Denominator denominator) {
  struct Counts {
    std::size_t denom = 0, conversational = 0, qa = 0, cjk = 0, emoji = 0, pii = 0, emoji_conv = 0;
  };
  std::map<std::string, Counts> by_family;
  for (const auto& r : records) {
    auto& c = by_family[r.family];
    if (denominator == Denominator::DegenerateOnly && !r.degenerate) continue;
    ++c.denom;
    c.conversational += r.flags.conversational;
    c.qa += r.flags.question_answer;
    c.cjk += r.flags.cjk;
    c.emoji += r.flags.emoji;
    c.pii += !r.flags.pii_hits.empty();
    c.emoji_conv += r.flags.conversational && r.flags.emoji;
  }

  auto rate = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  std::vector<RateRow> rows;
  for (const auto& [family, c] : by_family) {
    RateRow row;
    row.family = family;
    row.denominator = c.denom;
    row.conversational = rate(c.conversational, c.denom);
    row.question_answer = rate(c.qa, c.denom);
    row.cjk = rate(c.cjk, c.denom);
    row.emoji = rate(c.emoji, c.denom);
    row.pii = rate(c.pii, c.denom);
    row.emoji_given_conversational = rate(c.emoji_conv, c.conversational);
    rows.push_back(std::move(row));
  }
  return rows;
}

void to_json(nlohmann::json& j, const PiiHit& h) {
  j = nlohmann::json{{"kind", to_string(h.kind)}, {"matched_text", h.matched_text}, {"char_offset", h.char_offset}};
}

void from_json(const nlohmann::json& j, PiiHit& h) {
  const auto kind = parse_pii_kind(j.at("kind").get<std::string>());
  if (!kind) throw nlohmann::json::other_error::create(501, "unknown pii kind", &j);
  h.kind = *kind;
  j.at("matched_text").get_to(h.matched_text);
  j.at("char_offset").get_to(h.char_offset);
}

void to_json(nlohmann::json& j, const ArtifactFlags& f) {
  j = nlohmann::json{{"conversational", f.conversational},
                     {"question_answer", f.question_answer},
                     {"cjk", f.cjk},
                     {"emoji", f.emoji},
                     {"pii_hits", f.pii_hits}};
}

void from_json(const nlohmann::json& j, ArtifactFlags& f) {
  j.at("conversational").get_to(f.conversational);
  j.at("question_answer").get_to(f.question_answer);
  j.at("cjk").get_to(f.cjk);
  j.at("emoji").get_to(f.emoji);
  j.at("pii_hits").get_to(f.pii_hits);
}

nlohmann::json to_json(const RateRow& row) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"family", row.family},
          {"denominator", row.denominator},
          {"conversational", opt(row.conversational)},
          {"question_answer", opt(row.question_answer)},
          {"cjk", opt(row.cjk)},
          {"emoji", opt(row.emoji)},
          {"pii", opt(row.pii)},
          {"emoji_given_conversational", opt(row.emoji_given_conversational)}};
}

}  // namespace topmind::artifacts
