#include "topmind/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "topmind/error.hpp"
#include "topmind/random.hpp"

namespace topmind::analytics {

using annotate::LabeledRecord;
using annotate::LabelStatus;

std::optional<GroupBy> parse_group_by(std::string_view name) {
  if (name == "family") return GroupBy::Family;
  if (name == "model") return GroupBy::Model;
  return std::nullopt;
}

std::optional<LabelLevel> parse_label_level(std::string_view name) {
  if (name == "category") return LabelLevel::Category;
  if (name == "subcategory") return LabelLevel::Subcategory;
  return std::nullopt;
}

double CategoryDistribution::prob(std::string_view label) const {
  const auto it = std::ranges::lower_bound(support, label);
  if (it == support.end() || *it != label) return 0.0;
  return probs[static_cast<std::size_t>(it - support.begin())];
}

namespace {

const std::string& owner_of(const LabeledRecord& r, GroupBy g) {
  return g == GroupBy::Family ? r.family : r.model_id;
}

// Labels are compared after alias normalization, so "sports" and "sport"
// count as one label.
std::string category_of(const LabeledRecord& r) { return annotate::normalize_label(r.semantic.category); }

std::string label_of(const LabeledRecord& r, LabelLevel level) {
  if (level == LabelLevel::Category) return category_of(r);
  return category_of(r) + "/" + annotate::normalize_label(r.semantic.subcategory);
}

CategoryDistribution make_distribution(std::string owner, const std::map<std::string, std::size_t>& counts,
                                       const std::set<std::string>& support) {
  CategoryDistribution d;
  d.owner = std::move(owner);
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  for (const auto& label : support) {
    d.support.push_back(label);
    const auto it = counts.find(label);
    const std::size_t c = it == counts.end() ? 0 : it->second;
    d.probs.push_back(static_cast<double>(c) / static_cast<double>(total));
  }
  return d;
}

}  // namespace

std::vector<LabeledRecord> usable(std::span<const LabeledRecord> records) {
  std::vector<LabeledRecord> out;
  for (const auto& r : records)
    if (r.semantic.status == LabelStatus::Ok) out.push_back(r);
  return out;
}

std::vector<CategoryDistribution> distribution(std::span<const LabeledRecord> records, GroupBy group_by,
                                               LabelLevel level) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::set<std::string> owners_seen;
  std::set<std::string> support;
  for (const auto& r : records) {
    owners_seen.insert(owner_of(r, group_by));
    if (r.semantic.status != LabelStatus::Ok) continue;
    const auto label = label_of(r, level);
    ++counts[owner_of(r, group_by)][label];
    support.insert(label);
  }
  std::vector<CategoryDistribution> out;
  for (const auto& owner : owners_seen) {
    const auto it = counts.find(owner);
    if (it == counts.end()) {
      spdlog::warn("no usable records for '{}'; omitted from distributions", owner);
      continue;
    }
    out.push_back(make_distribution(owner, it->second, support));
  }
  return out;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("jsd: distributions are not aligned");
  // Each cell contributes 0.5 * [p log2(p/m) + q log2(q/m)], which is
  // symmetric in (p, q) term by term.
  auto term = [](double x, double m) { return x > 0.0 ? x * std::log2(x / m) : 0.0; };
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (m <= 0.0) continue;
    sum += 0.5 * (term(p[i], m) + term(q[i], m));
  }
  return std::clamp(sum, 0.0, 1.0);
}

double jsd(const CategoryDistribution& p, const CategoryDistribution& q) {
  std::vector<std::string> support;
  std::ranges::set_union(p.support, q.support, std::back_inserter(support));
  std::vector<double> pa, qa;
  pa.reserve(support.size());
  qa.reserve(support.size());
  for (const auto& label : support) {
    pa.push_back(p.prob(label));
    qa.push_back(q.prob(label));
  }
  return jsd(pa, qa);
}

SimilarityMatrix similarity_matrix(std::span<const CategoryDistribution> dists) {
  SimilarityMatrix m;
  const std::size_t n = dists.size();
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (const auto& d : dists) m.ids.push_back(d.owner);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.values[i][j] = m.values[j][i] = 1.0 - jsd(dists[i], dists[j]);
  return m;
}

std::vector<RobustnessRow> split_half_robustness(std::span<const LabeledRecord> records, std::size_t n_splits,
                                                 std::uint64_t seed, LabelLevel level,
                                                 const corpus::Corpus& corpus) {
  const auto ok = usable(records);
  std::set<std::string> families;
  for (const auto& r : ok) families.insert(r.family);

  std::map<std::string, std::vector<double>> per_family;
  for (std::size_t s = 0; s < n_splits; ++s) {
    const auto split = corpus.stratified_split(derive_seed(seed, s));
    std::set<int> in_a;
    for (const auto& p : split.set_a) in_a.insert(p.id);

    std::vector<LabeledRecord> half_a, half_b;
    for (const auto& r : ok) (in_a.contains(r.prompt_id) ? half_a : half_b).push_back(r);
    const auto da = distribution(half_a, GroupBy::Family, level);
    const auto db = distribution(half_b, GroupBy::Family, level);

    for (const auto& family : families) {
      const auto ia = std::ranges::find(da, family, &CategoryDistribution::owner);
      const auto ib = std::ranges::find(db, family, &CategoryDistribution::owner);
      if (ia == da.end() || ib == db.end()) {
        spdlog::warn("family '{}' has no records in one half of split {}; skipped", family, s);
        continue;
      }
      per_family[family].push_back(jsd(*ia, *ib));
    }
  }

  std::vector<RobustnessRow> rows;
  for (const auto& [family, values] : per_family) {
    RobustnessRow row;
    row.family = family;
    row.splits_used = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    row.mean_jsd = mean;
    row.std_jsd = std::sqrt(var);
    rows.push_back(row);
  }
  return rows;
}

SubcategoryTable subcategory_table(std::span<const LabeledRecord> records, std::string_view category,
                                   std::size_t top_k, GroupBy group_by) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& r : records)
    if (r.semantic.status == LabelStatus::Ok && category_of(r) == category)
      ++counts[owner_of(r, group_by)][annotate::normalize_label(r.semantic.subcategory)];
  if (counts.empty()) throw Error("no records labelled with category '" + std::string(category) + "'");

  SubcategoryTable table;
  table.category = std::string(category);
  std::map<std::string, double> mean_share;
  for (const auto& [owner, subs] : counts) {
    table.owners.push_back(owner);
    std::size_t total = 0;
    for (const auto& [_, c] : subs) total += c;
    auto& row = table.all_percent[owner];
    for (const auto& [sub, c] : subs) {
      const double pct = 100.0 * static_cast<double>(c) / static_cast<double>(total);
      row[sub] = pct;
      mean_share[sub] += pct;
    }
  }
  for (auto& [_, v] : mean_share) v /= static_cast<double>(counts.size());

  std::vector<std::pair<std::string, double>> ranked(mean_share.begin(), mean_share.end());
  std::ranges::stable_sort(ranked, [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  for (const auto& [sub, _] : ranked) table.subcategories.push_back(sub);

  for (const auto& owner : table.owners) {
    const auto& row = table.all_percent[owner];
    std::vector<double> cells;
    for (const auto& sub : table.subcategories) {
      const auto it = row.find(sub);
      cells.push_back(it == row.end() ? 0.0 : it->second);
    }
    table.percent.push_back(std::move(cells));
  }
  return table;
}

std::vector<LabeledRecord> balanced_subset(std::span<const LabeledRecord> records, std::size_t per_family,
                                           std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_family;
  for (std::size_t i = 0; i < records.size(); ++i) by_family[records[i].family].push_back(i);
  for (const auto& [family, idx] : by_family)
    if (idx.size() < per_family)
      throw Error("family '" + family + "' has " + std::to_string(idx.size()) + " records, fewer than the " +
                  std::to_string(per_family) + " requested");

  Rng rng(seed);
  std::vector<bool> keep(records.size(), false);
  for (auto& [_, idx] : by_family) {
    // Partial Fisher-Yates: the first per_family slots become the sample.
    for (std::size_t i = 0; i < per_family; ++i) {
      const auto j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
      keep[idx[i]] = true;
    }
  }
  std::vector<LabeledRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

std::vector<DepthRow> depth_table(std::span<const LabeledRecord> records, annotate::Domain domain,
                                  GroupBy group_by) {
  using annotate::DifficultyLevel;
  const auto category = annotate::category_of(domain);
  std::map<std::string, DepthRow> rows;
  for (const auto& r : records) {
    if (r.semantic.status != LabelStatus::Ok || category_of(r) != category || !r.difficulty) continue;
    auto& row = rows[owner_of(r, group_by)];
    row.owner = owner_of(r, group_by);
    ++row.counts[r.difficulty->level];
    if (r.difficulty->level != DifficultyLevel::Unclassifiable) ++row.classified;
  }
  std::vector<DepthRow> out;
  for (auto& [owner, row] : rows) {
    if (row.classified == 0) {
      spdlog::warn("'{}' has no classified {} records; omitted from depth table", owner,
                   annotate::to_string(domain));
      continue;
    }
    for (auto level : {DifficultyLevel::Basic, DifficultyLevel::Intermediate, DifficultyLevel::Advanced,
                       DifficultyLevel::Expert}) {
      const auto it = row.counts.find(level);
      const std::size_t c = it == row.counts.end() ? 0 : it->second;
      row.proportion[level] = static_cast<double>(c) / static_cast<double>(row.classified);
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace topmind::analytics
