#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace topmind::degen {

/// Thresholds of the degenerate-text rule. A run qualifies when its phrase is
/// at least `min_period` characters, it occurs at least `min_repeats` times
/// back to back, and the repeated span covers at least
/// `min_span_numerator / min_span_denominator` of the whole output. The span
/// fraction is a rational so the boundary test is exact integer arithmetic.
struct Criteria {
  std::size_t min_period = 10;
  std::size_t min_repeats = 5;
  std::size_t min_span_numerator = 1;
  std::size_t min_span_denominator = 20;
};

/// The earliest qualifying tandem repeat in a text. All lengths and offsets
/// count Unicode scalar values.
struct DegeneracyReport {
  std::string phrase;  ///< one copy of the repeating unit, UTF-8
  std::size_t period = 0;
  std::size_t start_index = 0;
  std::size_t repeat_count = 0;
  std::size_t span_length = 0;   ///< period * repeat_count
  double span_fraction = 0.0;    ///< span_length / total_length
  std::size_t total_length = 0;  ///< denominator used for span_fraction

  friend bool operator==(const DegeneracyReport&, const DegeneracyReport&) = default;
};

/// The minimal qualifying run: smallest start index, then smallest period.
/// `repeat_count` is the maximal number of consecutive full copies at that
/// (start, period); partial trailing copies are not counted.
std::optional<DegeneracyReport> detect(std::string_view text, const Criteria& criteria = {});

/// Same search over decoded scalars, with the span fraction measured against
/// `denominator_length` instead of `text.size()`.
std::optional<DegeneracyReport> detect(std::u32string_view text, std::size_t denominator_length,
                                       const Criteria& criteria = {});

struct TruncateResult {
  std::string cleaned;
  std::optional<DegeneracyReport> report;
};

/// Cuts the text at the first occurrence of the repeated phrase.
TruncateResult truncate(std::string_view text, const Criteria& criteria = {});

struct GroupStats {
  std::size_t total = 0;
  std::size_t degenerate = 0;
  double degenerate_ratio = 0.0;
  double mean_start_index = 0.0;    ///< over degenerate records only
  double mean_phrase_length = 0.0;  ///< over degenerate records only
};

struct DegeneracyStats {
  bool empty = true;
  GroupStats overall;
  std::map<std::string, GroupStats> by_group;
};

using GroupedReport = std::pair<std::string, std::optional<DegeneracyReport>>;

DegeneracyStats stats(std::span<const GroupedReport> records);

void to_json(nlohmann::json& j, const DegeneracyReport& r);
void from_json(const nlohmann::json& j, DegeneracyReport& r);
nlohmann::json to_json(const DegeneracyStats& s);

}  // namespace topmind::degen
