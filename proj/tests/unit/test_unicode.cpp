#include <doctest.h>

#include "topmind/hashing.hpp"
#include "topmind/unicode.hpp"

using namespace topmind;

TEST_SUITE("unicode") {
  TEST_CASE("decode and encode round-trip mixed scripts") {
    const std::string text = "a\xC3\xA9\xE4\xB8\xAD\xF0\x9F\x98\x80z";  // a é 中 😀 z
    const auto d = unicode::decode(text);
    CHECK(d.chars == U"aé中\U0001F600z");
    CHECK(d.byte_offsets == std::vector<std::size_t>{0, 1, 3, 6, 10, 11});
    CHECK(unicode::encode(d.chars) == text);
    CHECK(unicode::length(text) == 5);
    CHECK(unicode::char_index_of_byte(text, 6) == 3);
  }

  TEST_CASE("ill-formed input decodes to replacement characters") {
    CHECK(unicode::decode("\xFF").chars == U"�");
    CHECK(unicode::decode("a\xE4\xB8").chars == U"a�");
    CHECK(unicode::decode("\xED\xA0\x80").chars.find(U'�') == 0);
    CHECK(unicode::decode("").chars.empty());
  }

  TEST_CASE("script classes") {
    CHECK(unicode::is_cjk_unified_ideograph(U'中'));
    CHECK(unicode::is_cjk_unified_ideograph(U'㐀'));
    CHECK_FALSE(unicode::is_cjk_unified_ideograph(U'あ'));
    CHECK_FALSE(unicode::is_cjk_unified_ideograph(U'a'));
    CHECK(unicode::is_emoji_presentation(U'\U0001F600'));
    CHECK(unicode::is_emoji_presentation(U'\U0001F680'));
    CHECK_FALSE(unicode::is_emoji_presentation(U'#'));
  }

  TEST_CASE("hashes") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }
}
