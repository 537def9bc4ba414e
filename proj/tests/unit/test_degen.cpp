#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "topmind/degen.hpp"
#include "topmind/unicode.hpp"

using namespace topmind;

namespace {

std::u32string repeat(const std::u32string& unit, std::size_t times) {
  std::u32string s;
  for (std::size_t i = 0; i < times; ++i) s += unit;
  return s;
}

std::u32string distinct(std::size_t n, char32_t base = 0x4E00) {
  std::u32string s;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<char32_t>(base + i);
  return s;
}

std::string utf8(const std::u32string& s) { return unicode::encode(s); }

}  // namespace

TEST_SUITE("degen") {
  TEST_CASE("short text has no run") { CHECK_FALSE(degen::detect("abc").has_value()); }

  TEST_CASE("doubled five-character phrase") {
    const auto r = degen::detect(utf8(repeat(U"abcde", 12)));
    REQUIRE(r.has_value());
    CHECK(r->phrase == "abcdeabcde");
    CHECK(r->period == 10);
    CHECK(r->start_index == 0);
    CHECK(r->repeat_count == 6);
    CHECK(r->span_length == 60);
    CHECK(r->span_fraction == 1.0);
  }

  TEST_CASE("code block run after 360 distinct characters") {
    const auto r = degen::detect(utf8(distinct(360) + repeat(U"\n\n```\n\n```", 8)));
    REQUIRE(r.has_value());
    CHECK(r->period == 10);
    CHECK(r->start_index == 360);
    CHECK(r->repeat_count == 8);
    CHECK(r->total_length == 440);
    CHECK(r->span_fraction == doctest::Approx(80.0 / 440.0).epsilon(1e-15));
  }

  TEST_CASE("five copies inside 2000 characters fall below the threshold") {
    const auto text = distinct(975) + repeat(U"0123456789", 5) + distinct(975, 0x6000);
    CHECK(text.size() == 2000);
    CHECK_FALSE(degen::detect(utf8(text)).has_value());
  }

  TEST_CASE("four copies never qualify") {
    CHECK_FALSE(degen::detect(utf8(repeat(U"0123456789", 4))).has_value());
    CHECK(degen::detect(utf8(repeat(U"0123456789", 5))).has_value());
  }

  TEST_CASE("a nine-character phrase only qualifies through its doubled form") {
    const auto r = degen::detect(utf8(repeat(U"012345678", 10)));
    REQUIRE(r.has_value());
    CHECK(r->period == 18);
    CHECK(r->repeat_count == 5);
  }

  TEST_CASE("truncate") {
    SUBCASE("identity when not degenerate") {
      const auto t = degen::truncate("plain text with nothing repeated");
      CHECK(t.cleaned == "plain text with nothing repeated");
      CHECK_FALSE(t.report.has_value());
    }
    SUBCASE("cut at the first copy") {
      auto prefix = U"INTRO. " + distinct(193);
      REQUIRE(prefix.size() == 200);
      const auto text = prefix + repeat(U"helloworld", 6);
      const auto t = degen::truncate(utf8(text));
      REQUIRE(t.report.has_value());
      CHECK(t.report->start_index == 200);
      CHECK(t.cleaned == utf8(prefix));
      CHECK(oracle::degenerate_run(text)->start == 200);
    }
    SUBCASE("entirely repeated text") { CHECK(degen::truncate(utf8(repeat(U"0123456789", 7))).cleaned.empty()); }
  }

  TEST_CASE("Chinese phrases behave like ASCII") {
    const std::u32string zh = U"我们一起学习中文吧。";
    REQUIRE(zh.size() == 10);
    const auto a = degen::detect(utf8(distinct(20, 0x5000) + repeat(zh, 6)));
    const auto b = degen::detect(utf8(distinct(20, 0x5000) + repeat(U"abcdefghij", 6)));
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->start_index == b->start_index);
    CHECK(a->period == b->period);
    CHECK(a->repeat_count == b->repeat_count);
    CHECK(a->phrase == utf8(zh));
  }

  TEST_CASE("agrees with the brute-force oracle on random strings") {
    const std::u32string alphabet = U"ab\n空";
    std::mt19937_64 rng(99);
    int positives = 0;
    for (int i = 0; i < 3000; ++i) {
      std::u32string s;
      const auto n = rng() % 401;
      if (i % 2) {
        for (std::size_t j = 0; j < n; ++j) s += alphabet[rng() % 4];
      } else {
        std::u32string phrase;
        for (std::size_t j = 0, len = 1 + rng() % 25; j < len; ++j) phrase += alphabet[rng() % 4];
        for (std::size_t j = 0, pre = rng() % 60; j < pre; ++j) s += alphabet[rng() % 4];
        s += repeat(phrase, 1 + rng() % 15);
        if (s.size() > 400) s.resize(400);
      }
      const auto expected = oracle::degenerate_run(s);
      const auto got = degen::detect(utf8(s));
      positives += expected ? 1 : 0;
      REQUIRE(expected.has_value() == got.has_value());
      if (expected) {
        CHECK(got->start_index == expected->start);
        CHECK(got->period == expected->period);
        CHECK(got->repeat_count == expected->copies);
        const auto d = unicode::decode(utf8(s)).chars;
        CHECK(d.substr(got->start_index, got->span_length) ==
              repeat(unicode::decode(got->phrase).chars, got->repeat_count));
      }
    }
    CHECK(positives > 300);
  }

  TEST_CASE("truncated text is clean against the original length") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 500; ++i) {
      std::u32string s;
      for (std::size_t j = 0, n = rng() % 300; j < n; ++j) s += U"xy z"[rng() % 4];
      std::u32string phrase;
      for (std::size_t j = 0, len = 10 + rng() % 8; j < len; ++j) phrase += U"xy z"[rng() % 4];
      s += repeat(phrase, 5 + rng() % 6);
      const auto text = utf8(s);
      const auto t = degen::truncate(text);
      const auto cleaned = unicode::decode(t.cleaned).chars;
      CHECK_FALSE(degen::detect(cleaned, s.size()).has_value());
      CHECK(degen::truncate(text).cleaned == t.cleaned);
    }
  }

  TEST_CASE("stats") {
    std::vector<degen::GroupedReport> records;
    for (int i = 0; i < 100; ++i) {
      std::optional<degen::DegeneracyReport> r;
      if (i < 7) {
        r = degen::DegeneracyReport{};
        r->start_index = i == 0 ? 100 : 300;
        r->period = 10;
      }
      records.emplace_back(i < 50 ? "qwen" : "llama", r);
    }
    const auto s = degen::stats(records);
    CHECK_FALSE(s.empty);
    CHECK(s.overall.degenerate_ratio == doctest::Approx(0.07));
    CHECK(s.by_group.at("qwen").degenerate == 7);
    CHECK(s.by_group.at("llama").degenerate_ratio == 0.0);

    std::vector<degen::GroupedReport> two{{"f", degen::DegeneracyReport{}}, {"f", degen::DegeneracyReport{}}};
    two[0].second->start_index = 100;
    two[1].second->start_index = 300;
    CHECK(degen::stats(two).overall.mean_start_index == 200.0);

    const auto none = degen::stats({});
    CHECK(none.empty);
    CHECK(none.overall.total == 0);
    CHECK(none.overall.degenerate_ratio == 0.0);
  }

  TEST_CASE("report json round-trip") {
    const auto r = degen::detect(utf8(repeat(U"abcde", 12)));
    nlohmann::json j = *r;
    CHECK(j.get<degen::DegeneracyReport>() == *r);
  }
}
