#include "topmind/unicode.hpp"

#include <array>
#include <utility>

namespace topmind::unicode {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one scalar at `pos`. Returns the scalar and the number of bytes
// consumed; an ill-formed subpart yields U+FFFD and consumes the bytes that
// form its maximal prefix (at least one).
std::pair<char32_t, std::size_t> decode_one(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};

  std::size_t need = 0;
  char32_t cp = 0;
  unsigned char lo = 0x80, hi = 0xBF;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    need = 1;
    cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    need = 2;
    cp = b0 & 0x0F;
    if (b0 == 0xE0) lo = 0xA0;
    if (b0 == 0xED) hi = 0x9F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    need = 3;
    cp = b0 & 0x07;
    if (b0 == 0xF0) lo = 0x90;
    if (b0 == 0xF4) hi = 0x8F;
  } else {
    return {kReplacement, 1};
  }

  std::size_t used = 1;
  for (std::size_t k = 0; k < need; ++k) {
    if (pos + used >= s.size()) return {kReplacement, used};
    const auto b = static_cast<unsigned char>(s[pos + used]);
    if (b < lo || b > hi) return {kReplacement, used};
    lo = 0x80;
    hi = 0xBF;
    cp = (cp << 6) | (b & 0x3F);
    ++used;
  }
  return {cp, used};
}

}  // namespace

DecodedText decode(std::string_view utf8) {
  DecodedText out;
  out.chars.reserve(utf8.size());
  out.byte_offsets.reserve(utf8.size() + 1);
  std::size_t pos = 0;
  while (pos < utf8.size()) {
    auto [cp, used] = decode_one(utf8, pos);
    out.chars.push_back(cp);
    out.byte_offsets.push_back(pos);
    pos += used;
  }
  out.byte_offsets.push_back(utf8.size());
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = kReplacement;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) append_utf8(out, cp);
  return out;
}

std::size_t length(std::string_view utf8) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < utf8.size(); ++n) pos += decode_one(utf8, pos).second;
  return n;
}

std::size_t char_index_of_byte(std::string_view utf8, std::size_t byte_offset) {
  return length(utf8.substr(0, byte_offset));
}

bool is_cjk_unified_ideograph(char32_t cp) {
  static constexpr std::array<std::pair<char32_t, char32_t>, 9> kBlocks{{
      {0x4E00, 0x9FFF},    // CJK Unified Ideographs
      {0x3400, 0x4DBF},    // Extension A
      {0x20000, 0x2A6DF},  // Extension B
      {0x2A700, 0x2B73F},  // Extension C
      {0x2B740, 0x2B81F},  // Extension D
      {0x2B820, 0x2CEAF},  // Extension E
      {0x2CEB0, 0x2EBEF},  // Extension F
      {0x30000, 0x3134F},  // Extension G
      {0x31350, 0x323AF},  // Extension H
  }};
  for (auto [lo, hi] : kBlocks)
    if (cp >= lo && cp <= hi) return true;
  return false;
}

bool is_emoji_presentation(char32_t cp) {
  static constexpr std::array<std::pair<char32_t, char32_t>, 10> kRanges{{
      {0x1F1E6, 0x1F1FF},  // regional indicators (flags)
      {0x1F300, 0x1F5FF},  // misc symbols and pictographs
      {0x1F600, 0x1F64F},  // emoticons
      {0x1F680, 0x1F6FF},  // transport and map
      {0x1F7E0, 0x1F7EB},  // coloured circles and squares
      {0x1F900, 0x1F9FF},  // supplemental symbols and pictographs
      {0x1FA70, 0x1FAFF},  // symbols and pictographs extended-A
      {0x2600, 0x26FF},    // misc symbols
      {0x2700, 0x27BF},    // dingbats
      {0x2B50, 0x2B55},    // stars and circles
  }};
  for (auto [lo, hi] : kRanges)
    if (cp >= lo && cp <= hi) return true;
  return false;
}

}  // namespace topmind::unicode
