#include "topmind/degen.hpp"

#include "topmind/unicode.hpp"

namespace topmind::degen {
namespace {

bool covers_enough(std::size_t span, std::size_t total, const Criteria& c) {
  // span / total >= num / den, cross-multiplied
  return span * c.min_span_denominator >= total * c.min_span_numerator;
}

}  // namespace

std::optional<DegeneracyReport> detect(std::u32string_view text, std::size_t denominator_length,
                                       const Criteria& criteria) {
  const std::size_t n = text.size();
  const std::size_t min_period = criteria.min_period == 0 ? 1 : criteria.min_period;
  const std::size_t repeats = criteria.min_repeats == 0 ? 1 : criteria.min_repeats;
  if (n < min_period * repeats) return std::nullopt;

  bool found = false;
  std::size_t best_start = 0, best_period = 0, best_count = 0;

  // For a fixed period p, position i "matches" when text[i] == text[i + p].
  // A maximal run of matches [a, b) means text[a .. b + p) is periodic with
  // period p, so starting at a there are (b - a) / p + 1 full copies. Any
  // start inside the run has fewer copies, hence the earliest qualifying
  // start for p is the beginning of the first qualifying run. Periods are
  // visited in increasing order and a later period must beat the current
  // best start strictly, which yields (smallest start, smallest period).
  const std::size_t max_period = n / repeats;
  for (std::size_t p = min_period; p <= max_period; ++p) {
    // A run that qualifies must leave room for `repeats` copies.
    std::size_t last_start = n - repeats * p;
    if (found) {
      if (best_start == 0) break;
      last_start = std::min(last_start, best_start - 1);
    }

    std::size_t i = 0;
    while (i <= last_start) {
      if (text[i] != text[i + p]) {
        ++i;
        continue;
      }
      const std::size_t run_start = i;
      while (i + p < n && text[i] == text[i + p]) ++i;
      const std::size_t count = (i - run_start) / p + 1;
      if (count >= repeats && covers_enough(count * p, denominator_length, criteria)) {
        found = true;
        best_start = run_start;
        best_period = p;
        best_count = count;
        break;
      }
    }
  }
  if (!found) return std::nullopt;

  DegeneracyReport report;
  report.phrase = unicode::encode(text.substr(best_start, best_period));
  report.period = best_period;
  report.start_index = best_start;
  report.repeat_count = best_count;
  report.span_length = best_period * best_count;
  report.total_length = denominator_length;
  report.span_fraction = denominator_length == 0
                             ? 0.0
                             : static_cast<double>(report.span_length) /
                                   static_cast<double>(denominator_length);
  return report;
}

std::optional<DegeneracyReport> detect(std::string_view text, const Criteria& criteria) {
  const auto decoded = unicode::decode(text);
  return detect(decoded.chars, decoded.chars.size(), criteria);
}

TruncateResult truncate(std::string_view text, const Criteria& criteria) {
  const auto decoded = unicode::decode(text);
  TruncateResult result;
  result.report = detect(decoded.chars, decoded.chars.size(), criteria);
  if (result.report)
    result.cleaned = std::string(text.substr(0, decoded.byte_offsets[result.report->start_index]));
  else
    result.cleaned = std::string(text);
  return result;
}

namespace {

struct Accumulator {
  std::size_t total = 0;
  std::size_t degenerate = 0;
  double start_sum = 0.0;
  double phrase_sum = 0.0;

  void add(const std::optional<DegeneracyReport>& report) {
    ++total;
    if (!report) return;
    ++degenerate;
    start_sum += static_cast<double>(report->start_index);
    phrase_sum += static_cast<double>(report->period);
  }

  GroupStats finish() const {
    GroupStats s;
    s.total = total;
    s.degenerate = degenerate;
    if (total > 0) s.degenerate_ratio = static_cast<double>(degenerate) / static_cast<double>(total);
    if (degenerate > 0) {
      s.mean_start_index = start_sum / static_cast<double>(degenerate);
      s.mean_phrase_length = phrase_sum / static_cast<double>(degenerate);
    }
    return s;
  }
};

}  // namespace

DegeneracyStats stats(std::span<const GroupedReport> records) {
  DegeneracyStats out;
  out.empty = records.empty();
  Accumulator overall;
  std::map<std::string, Accumulator> groups;
  for (const auto& [group, report] : records) {
    overall.add(report);
    groups[group].add(report);
  }
  out.overall = overall.finish();
  for (const auto& [group, acc] : groups) out.by_group.emplace(group, acc.finish());
  return out;
}

void to_json(nlohmann::json& j, const DegeneracyReport& r) {
  j = nlohmann::json{{"phrase", r.phrase},
                     {"period", r.period},
                     {"start_index", r.start_index},
                     {"repeat_count", r.repeat_count},
                     {"span_length", r.span_length},
                     {"span_fraction", r.span_fraction},
                     {"total_length", r.total_length}};
}

void from_json(const nlohmann::json& j, DegeneracyReport& r) {
  j.at("phrase").get_to(r.phrase);
  j.at("period").get_to(r.period);
  j.at("start_index").get_to(r.start_index);
  j.at("repeat_count").get_to(r.repeat_count);
  j.at("span_length").get_to(r.span_length);
  j.at("span_fraction").get_to(r.span_fraction);
  j.at("total_length").get_to(r.total_length);
}

namespace {

nlohmann::json group_json(const GroupStats& g) {
  return {{"total", g.total},
          {"degenerate", g.degenerate},
          {"degenerate_ratio", g.degenerate_ratio},
          {"mean_start_index", g.mean_start_index},
          {"mean_phrase_length", g.mean_phrase_length}};
}

}  // namespace

nlohmann::json to_json(const DegeneracyStats& s) {
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [name, g] : s.by_group) groups[name] = group_json(g);
  return {{"empty", s.empty}, {"overall", group_json(s.overall)}, {"groups", groups}};
}

}  // namespace topmind::degen
