#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topmind/annotate.hpp"
#include "topmind/corpus.hpp"

namespace topmind::analytics {

enum class GroupBy { Family, Model };
enum class LabelLevel { Category, Subcategory };

std::optional<GroupBy> parse_group_by(std::string_view name);
std::optional<LabelLevel> parse_label_level(std::string_view name);

/// Normalized label frequencies for one owner (a model or a family).
/// `support` is sorted; `probs` is aligned with it and sums to 1.
struct CategoryDistribution {
  std::string owner;
  std::vector<std::string> support;
  std::vector<double> probs;

  /// 0 for labels outside the support.
  double prob(std::string_view label) const;
};

/// Records whose status is not ok are dropped.
std::vector<annotate::LabeledRecord> usable(std::span<const annotate::LabeledRecord> records);

/// One distribution per owner, all over the union of labels seen in
/// `records` (absent labels get probability 0). Records with a non-ok status
/// are ignored; owners left with no records are omitted with a warning.
std::vector<CategoryDistribution> distribution(std::span<const annotate::LabeledRecord> records, GroupBy group_by,
                                               LabelLevel level = LabelLevel::Category);

/// Jensen-Shannon divergence, base 2, over aligned probability vectors.
/// 0 log 0 is 0. Result lies in [0, 1].
double jsd(std::span<const double> p, std::span<const double> q);

/// Aligns both distributions on the union of their supports first.
double jsd(const CategoryDistribution& p, const CategoryDistribution& q);

struct SimilarityMatrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> values;  ///< 1 - jsd
  std::string metric = "1 - JSD(base 2)";
};

SimilarityMatrix similarity_matrix(std::span<const CategoryDistribution> dists);

struct RobustnessRow {
  std::string family;
  double mean_jsd = 0.0;
  double std_jsd = 0.0;  ///< population standard deviation over the splits used
  std::size_t splits_used = 0;
};

/// For each of `n_splits` stratified prompt splits (seeds derived from
/// `seed`), the per-family JSD between the label distribution of records
/// prompted from set A and from set B. A family missing from one half of a
/// split skips that split with a warning.
std::vector<RobustnessRow> split_half_robustness(std::span<const annotate::LabeledRecord> records,
                                                 std::size_t n_splits, std::uint64_t seed,
                                                 LabelLevel level = LabelLevel::Category,
                                                 const corpus::Corpus& corpus = corpus::Corpus::builtin());

/// Subcategory shares within one category. `percent[f][s]` is the share (0-100)
/// of family f's in-category records labelled s. Columns are the `top_k`
/// subcategories with the highest mean share across families, largest first.
struct SubcategoryTable {
  std::string category;
  std::vector<std::string> owners;
  std::vector<std::string> subcategories;
  std::vector<std::vector<double>> percent;
  /// Every subcategory (before the top-k cut), per owner.
  std::map<std::string, std::map<std::string, double>> all_percent;
};

SubcategoryTable subcategory_table(std::span<const annotate::LabeledRecord> records, std::string_view category,
                                   std::size_t top_k, GroupBy group_by = GroupBy::Family);

/// Exactly `per_family` records from every family, uniformly without
/// replacement, in input order. Throws (naming the family) before producing
/// anything when a family is too small.
std::vector<annotate::LabeledRecord> balanced_subset(std::span<const annotate::LabeledRecord> records,
                                                     std::size_t per_family, std::uint64_t seed);

struct DepthRow {
  std::string owner;
  std::map<annotate::DifficultyLevel, std::size_t> counts;  ///< includes unclassifiable
  std::size_t classified = 0;                                ///< denominator: the four graded levels
  std::map<annotate::DifficultyLevel, double> proportion;    ///< basic..expert only
};

/// Level proportions among records of the domain's category that carry a
/// difficulty label. Unclassifiable is excluded from the denominator; owners
/// with no classified records are omitted with a warning.
std::vector<DepthRow> depth_table(std::span<const annotate::LabeledRecord> records, annotate::Domain domain,
                                  GroupBy group_by = GroupBy::Family);

}  // namespace topmind::analytics
