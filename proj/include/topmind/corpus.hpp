#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topmind/random.hpp"

namespace topmind::corpus {

enum class PromptStyle {
  ConversationalSoftener,
  ChainOfThought,
  Declarative,
  RhetoricalInquiry,
  InformativeExpository,
  PunctuationOnly,
};

inline constexpr std::array<PromptStyle, 6> kAllStyles{
    PromptStyle::ConversationalSoftener, PromptStyle::ChainOfThought,
    PromptStyle::Declarative,            PromptStyle::RhetoricalInquiry,
    PromptStyle::InformativeExpository,  PromptStyle::PunctuationOnly,
};

/// Kebab-case tag, e.g. "chain-of-thought".
std::string_view to_string(PromptStyle style);
std::optional<PromptStyle> parse_style(std::string_view tag);

struct SeedPrompt {
  int id = 0;
  std::string text;
  PromptStyle style = PromptStyle::PunctuationOnly;

  friend bool operator==(const SeedPrompt&, const SeedPrompt&) = default;
};

/// Two disjoint prompt sets with an equal number of prompts from every style.
/// Both sets are ordered by prompt id.
struct StratifiedSplit {
  std::vector<SeedPrompt> set_a;
  std::vector<SeedPrompt> set_b;
};

/// The seed-prompt corpus. Immutable once built, so one instance can be
/// shared by any number of worker threads.
class Corpus {
 public:
  /// The 36-prompt corpus compiled into the library.
  static const Corpus& builtin();

  /// Parses `id<TAB>style<TAB>text` records; lines starting with '#' are
  /// comments. Ids must be unique, and every style must occur the same even
  /// number of times (so an exact half split exists).
  static Corpus parse(std::string_view tsv);

  std::span<const SeedPrompt> prompts() const { return prompts_; }
  std::size_t size() const { return prompts_.size(); }

  /// Throws std::out_of_range for unknown ids.
  const SeedPrompt& by_id(int id) const;

  /// One prompt, uniformly at random, with replacement.
  const SeedPrompt& sample_uniform(Rng& rng) const;
  const SeedPrompt& sample_uniform(std::uint64_t seed) const;

  /// Per style, a seeded shuffle sends the first half to set A and the rest
  /// to set B.
  StratifiedSplit stratified_split(std::uint64_t seed) const;

  /// SHA-256 over the prompt texts concatenated in id order.
  std::string checksum() const;

  /// `id,style,text` with a header row.
  std::string to_csv() const;

 private:
  std::vector<SeedPrompt> prompts_;
};

}  // namespace topmind::corpus
