#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "topmind/corpus.hpp"
#include "topmind/error.hpp"
#include "topmind/random.hpp"

using namespace topmind;
using corpus::Corpus;
using corpus::PromptStyle;

TEST_SUITE("corpus") {
  TEST_CASE("36 prompts, six per style, ids 1..36") {
    const auto& c = Corpus::builtin();
    REQUIRE(c.size() == 36);
    std::map<PromptStyle, int> per_style;
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c.prompts()[i].id == static_cast<int>(i) + 1);
      ++per_style[c.prompts()[i].style];
    }
    CHECK(per_style.size() == 6);
    for (const auto& [style, n] : per_style) CHECK(n == 6);
  }

  TEST_CASE("checksum is pinned") {
    CHECK(Corpus::builtin().checksum() == "1d2bfd2590351bdaa59998d81ff4bad9f7740c8ad602ff54033272dafc970975");
  }

  TEST_CASE("known prompts and styles") {
    const auto& c = Corpus::builtin();
    const auto it = std::find_if(c.prompts().begin(), c.prompts().end(),
                                 [](const auto& p) { return p.text == "Let's think step by step."; });
    REQUIRE(it != c.prompts().end());
    CHECK(it->style == PromptStyle::ChainOfThought);
    std::set<std::string> punctuation;
    for (const auto& p : c.prompts())
      if (p.style == PromptStyle::PunctuationOnly) punctuation.insert(p.text);
    CHECK(punctuation.contains("."));
    CHECK(punctuation.contains("..."));
    CHECK(c.by_id(1).id == 1);
    CHECK_THROWS_AS(c.by_id(37), std::out_of_range);
  }

  TEST_CASE("style tags round-trip") {
    for (auto s : corpus::kAllStyles) CHECK(corpus::parse_style(corpus::to_string(s)) == s);
    CHECK(corpus::to_string(PromptStyle::ChainOfThought) == "chain-of-thought");
    CHECK_FALSE(corpus::parse_style("haiku").has_value());
  }

  TEST_CASE("uniform sampling is deterministic and close to 1/36") {
    const auto& c = Corpus::builtin();
    CHECK(c.sample_uniform(42).id == c.sample_uniform(42).id);
    Rng rng(2024);
    std::map<int, int> counts;
    for (int i = 0; i < 36000; ++i) ++counts[c.sample_uniform(rng).id];
    REQUIRE(counts.size() == 36);
    for (const auto& [id, n] : counts) {
      CHECK(n >= 800);
      CHECK(n <= 1200);
    }
  }

  TEST_CASE("stratified split partitions the corpus for every seed") {
    const auto& c = Corpus::builtin();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto s = c.stratified_split(seed);
      REQUIRE(s.set_a.size() == 18);
      REQUIRE(s.set_b.size() == 18);
      std::map<PromptStyle, int> a, b;
      std::set<int> ids;
      for (const auto& p : s.set_a) ++a[p.style], ids.insert(p.id);
      for (const auto& p : s.set_b) ++b[p.style], ids.insert(p.id);
      CHECK(ids.size() == 36);
      for (auto style : corpus::kAllStyles) {
        CHECK(a[style] == 3);
        CHECK(b[style] == 3);
      }
      CHECK(std::is_sorted(s.set_a.begin(), s.set_a.end(), [](auto& x, auto& y) { return x.id < y.id; }));
    }
    CHECK(c.stratified_split(9).set_a == c.stratified_split(9).set_a);
    bool differs = false;
    for (std::uint64_t seed = 1; seed < 10 && !differs; ++seed)
      differs = c.stratified_split(seed).set_a != c.stratified_split(0).set_a;
    CHECK(differs);
  }

  TEST_CASE("parse validates records") {
    CHECK_THROWS_AS(Corpus::parse("1\tnot-a-style\tx\n"), Error);
    CHECK_THROWS_AS(Corpus::parse("1\tdeclarative\tx\n1\tdeclarative\ty\n"), Error);
    const auto small = Corpus::parse(
        "# comment\n1\tdeclarative\tA.\n2\tdeclarative\tB.\n3\tpunctuation-only\t.\n4\tpunctuation-only\t!\n");
    CHECK(small.size() == 4);
  }

  TEST_CASE("csv export") {
    const auto csv = Corpus::builtin().to_csv();
    CHECK(csv.rfind("id,style,text\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 37);
  }
}
