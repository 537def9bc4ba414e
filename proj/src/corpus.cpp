#include "topmind/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <stdexcept>

#include "topmind/assets.hpp"
#include "topmind/error.hpp"
#include "topmind/hashing.hpp"
#include "topmind/text_format.hpp"

namespace topmind::corpus {
namespace {

constexpr std::array<std::string_view, 6> kStyleTags{
    "conversational-softener", "chain-of-thought",       "declarative",
    "rhetorical-inquiry",      "informative-expository", "punctuation-only",
};

}  // namespace

std::string_view to_string(PromptStyle style) {
  return kStyleTags[static_cast<std::size_t>(style)];
}

std::optional<PromptStyle> parse_style(std::string_view tag) {
  for (std::size_t i = 0; i < kStyleTags.size(); ++i)
    if (kStyleTags[i] == tag) return kAllStyles[i];
  return std::nullopt;
}

const Corpus& Corpus::builtin() {
  static const Corpus corpus = parse(assets::seed_prompts_tsv());
  return corpus;
}

Corpus Corpus::parse(std::string_view tsv) {
  Corpus corpus;
  std::size_t pos = 0;
  while (pos < tsv.size()) {
    auto nl = tsv.find('\n', pos);
    if (nl == std::string_view::npos) nl = tsv.size();
    std::string_view line = tsv.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw Error("corpus: malformed line: " + std::string(line));

    SeedPrompt prompt;
    const auto id_field = line.substr(0, t1);
    if (std::from_chars(id_field.data(), id_field.data() + id_field.size(), prompt.id).ec != std::errc{})
      throw Error("corpus: bad id: " + std::string(id_field));
    const auto style = parse_style(line.substr(t1 + 1, t2 - t1 - 1));
    if (!style) throw Error("corpus: unknown style in line: " + std::string(line));
    prompt.style = *style;
    prompt.text = std::string(line.substr(t2 + 1));
    corpus.prompts_.push_back(std::move(prompt));
  }

  std::ranges::sort(corpus.prompts_, {}, &SeedPrompt::id);
  if (corpus.prompts_.empty()) throw Error("corpus: no prompts");
  for (std::size_t i = 1; i < corpus.prompts_.size(); ++i)
    if (corpus.prompts_[i].id == corpus.prompts_[i - 1].id)
      throw Error("corpus: duplicate id " + std::to_string(corpus.prompts_[i].id));

  std::map<PromptStyle, std::size_t> per_style;
  for (const auto& p : corpus.prompts_) ++per_style[p.style];
  const std::size_t expected = per_style.begin()->second;
  for (auto [style, count] : per_style)
    if (count != expected || count % 2 != 0)
      throw Error("corpus: style " + std::string(to_string(style)) +
                  " must have the same even prompt count as every other style");
  return corpus;
}

const SeedPrompt& Corpus::by_id(int id) const {
  const auto it = std::ranges::lower_bound(prompts_, id, {}, &SeedPrompt::id);
  if (it == prompts_.end() || it->id != id)
    throw std::out_of_range("no seed prompt with id " + std::to_string(id));
  return *it;
}

const SeedPrompt& Corpus::sample_uniform(Rng& rng) const {
  return prompts_[uniform_index(rng, prompts_.size())];
}

const SeedPrompt& Corpus::sample_uniform(std::uint64_t seed) const {
  Rng rng(seed);
  return sample_uniform(rng);
}

StratifiedSplit Corpus::stratified_split(std::uint64_t seed) const {
  Rng rng(seed);
  StratifiedSplit split;
  for (PromptStyle style : kAllStyles) {
    std::vector<const SeedPrompt*> members;
    for (const auto& p : prompts_)
      if (p.style == style) members.push_back(&p);
    if (members.empty()) continue;
    shuffle(members.begin(), members.end(), rng);
    const std::size_t half = members.size() / 2;
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < half ? split.set_a : split.set_b).push_back(*members[i]);
  }
  std::ranges::sort(split.set_a, {}, &SeedPrompt::id);
  std::ranges::sort(split.set_b, {}, &SeedPrompt::id);
  return split;
}

std::string Corpus::checksum() const {
  std::string all;
  for (const auto& p : prompts_) all += p.text;
  return sha256_hex(all);
}

std::string Corpus::to_csv() const {
  std::string out = "id,style,text\n";
  for (const auto& p : prompts_) {
    out += std::to_string(p.id);
    out += ',';
    out += to_string(p.style);
    out += ',';
    out += csv_field(p.text);
    out += '\n';
  }
  return out;
}

}  // namespace topmind::corpus
