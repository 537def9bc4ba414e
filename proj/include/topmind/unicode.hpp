#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace topmind::unicode {

/// UTF-8 text decoded to Unicode scalar values, with the byte offset of every
/// scalar. `byte_offsets` has one extra trailing entry equal to the byte size,
/// so `byte_offsets[i]` is valid for every i in [0, chars.size()].
struct DecodedText {
  std::u32string chars;
  std::vector<std::size_t> byte_offsets;
};

/// Ill-formed sequences decode to U+FFFD, one replacement per maximal invalid
/// subpart, so decoding never fails.
DecodedText decode(std::string_view utf8);

std::string encode(std::u32string_view text);
void append_utf8(std::string& out, char32_t cp);

/// Number of scalar values in `utf8`.
std::size_t length(std::string_view utf8);

/// Scalar index of the character that starts at `byte_offset`.
std::size_t char_index_of_byte(std::string_view utf8, std::size_t byte_offset);

bool is_cjk_unified_ideograph(char32_t cp);
bool is_emoji_presentation(char32_t cp);

}  // namespace topmind::unicode
