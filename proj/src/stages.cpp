#include "topmind/stages.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "topmind/corpus.hpp"
#include "topmind/degen.hpp"
#include "topmind/error.hpp"
#include "topmind/genclient.hpp"
#include "topmind/hashing.hpp"
#include "topmind/http.hpp"
#include "topmind/jsonl.hpp"
#include "topmind/random.hpp"
#include "topmind/text_format.hpp"

namespace topmind::stages {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string file_sha256(const path& p) { return sha256_hex(jsonl::read_text_file(p)); }

std::string group_key(const json& rec, analytics::GroupBy by) {
  return rec.value(by == analytics::GroupBy::Family ? "family" : "model_id", std::string{});
}

std::unordered_set<std::string> existing_ids(const path& out) {
  std::unordered_set<std::string> ids;
  if (!fs::exists(out)) return ids;
  jsonl::repair_tail(out);
  for (const auto& rec : jsonl::read(out)) ids.insert(rec.at("record_id").get<std::string>());
  return ids;
}

// Runs fn(0..n) on up to `parallel` threads and hands results to sink in
// index order from the calling thread, so output order never depends on
// scheduling.
template <class Fn, class Sink>
void ordered_parallel(std::size_t n, std::size_t parallel, Fn fn, Sink sink) {
  if (n == 0) return;
  parallel = std::clamp<std::size_t>(parallel, 1, n);
  if (parallel == 1) {
    for (std::size_t i = 0; i < n; ++i) sink(fn(i));
    return;
  }
  using Result = decltype(fn(std::size_t{}));
  std::vector<std::optional<Result>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < parallel; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          const auto i = next++;
          if (i >= n || stop) return;
          std::optional<Result> value;
          std::exception_ptr error;
          try {
            value = fn(i);
          } catch (...) {
            error = std::current_exception();
          }
          {
            std::lock_guard lock(mu);
            slots[i] = std::move(value);
            errors[i] = error;
          }
          ready.notify_all();
        }
      });
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return slots[i].has_value() || errors[i]; });
      if (errors[i]) {
        stop = true;
        lock.unlock();
        workers.clear();
        std::rethrow_exception(errors[i]);
      }
      auto value = std::move(*slots[i]);
      slots[i].reset();
      lock.unlock();
      sink(std::move(value));
    }
  }
}

std::string rel_to(const path& target, const path& base_dir) {
  return fs::relative(fs::absolute(target), fs::absolute(base_dir)).generic_string();
}

// Feature rows of `store` whose ids have a labeled record, with their target
// class and the class -> family map.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<std::string> labels;
  std::map<std::string, std::string> family_of;
};

Dataset join_dataset(const embed::EmbeddingStore& store, const std::vector<annotate::LabeledRecord>& records,
                     Target target) {
  std::unordered_map<std::string, const annotate::LabeledRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.record_id, &r);
  std::vector<std::size_t> rows;
  Dataset d;
  for (std::size_t i = 0; i < store.rows(); ++i) {
    const auto it = by_id.find(store.ids[i]);
    if (it == by_id.end()) continue;
    const auto& r = *it->second;
    rows.push_back(i);
    const auto cls = target == Target::Model ? r.model_id : r.family;
    d.labels.push_back(cls);
    d.family_of[cls] = r.family;
  }
  if (rows.empty()) throw Error("no embedded record has a label");
  d.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(store.dim));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = store.row(rows[k]);
    for (std::size_t c = 0; c < store.dim; ++c)
      d.features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = row[c];
  }
  return d;
}

}  // namespace

std::optional<Format> parse_format(std::string_view name) {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  if (name == "text") return Format::Text;
  return std::nullopt;
}

std::vector<annotate::LabeledRecord> read_labeled(const path& in) {
  const auto rows = jsonl::read(in);
  std::vector<annotate::LabeledRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(rows[i].get<annotate::LabeledRecord>());
    } catch (const json::exception& e) {
      throw Error(in.string() + " record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// clean / degen-stats

json to_json(const CleanSummary& s) { return {{"records", s.records}, {"degenerate", s.degenerate}}; }

CleanSummary clean(const path& in, const path& out, const path& report) {
  const auto records = jsonl::read(in);
  jsonl::Writer cleaned(out, jsonl::Writer::Mode::Truncate);
  jsonl::Writer reports(report, jsonl::Writer::Mode::Truncate);
  CleanSummary summary;
  for (auto rec : records) {
    const auto result = degen::truncate(rec.at("output_text").get<std::string>());
    const bool degenerate = result.report.has_value();
    rec["cleaned_text"] = result.cleaned;
    rec["degenerate"] = degenerate;
    cleaned.write(rec);
    reports.write({{"record_id", rec.at("record_id")},
                   {"model_id", rec.value("model_id", "")},
                   {"family", rec.value("family", "")},
                   {"degenerate", degenerate},
                   {"report", degenerate ? json(*result.report) : json()}});
    ++summary.records;
    summary.degenerate += degenerate ? 1 : 0;
  }
  return summary;
}

std::string degen_stats(const path& report, analytics::GroupBy by, Format format) {
  std::vector<degen::GroupedReport> grouped;
  for (const auto& rec : jsonl::read(report)) {
    std::optional<degen::DegeneracyReport> r;
    if (rec.contains("report") && !rec["report"].is_null()) r = rec["report"].get<degen::DegeneracyReport>();
    grouped.emplace_back(group_key(rec, by), std::move(r));
  }
  const auto s = degen::stats(grouped);
  if (format == Format::Json) {
    auto j = degen::to_json(s);
    j["group_by"] = by == analytics::GroupBy::Family ? "family" : "model";
    j["provenance"] = {{"input_sha256", file_sha256(report)}};
    return j.dump(2) + "\n";
  }
  std::string out;
  const auto row = [&](const std::string& name, const degen::GroupStats& g) {
    if (format == Format::Csv) {
      out += csv_field(name) + "," + std::to_string(g.total) + "," + std::to_string(g.degenerate) + "," +
             format_real(g.degenerate_ratio) + "," + format_real(g.mean_start_index) + "," +
             format_real(g.mean_phrase_length) + "\n";
    } else {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-24s %8zu %8zu %7s%% %12.1f %10.1f\n", name.c_str(), g.total, g.degenerate,
                    format_percent(g.degenerate_ratio).c_str(), g.mean_start_index, g.mean_phrase_length);
      out += buf;
    }
  };
  if (format == Format::Csv) {
    out = "group,total,degenerate,degenerate_ratio,mean_start_index,mean_phrase_length\n";
  } else {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %8s %8s %8s %12s %10s\n", "group", "total", "degen", "ratio", "mean_start",
                  "mean_len");
    out = buf;
  }
  for (const auto& [name, g] : s.by_group) row(name, g);
  row("all", s.overall);
  return out;
}

// ---------------------------------------------------------------------------
// artifacts

std::optional<Scope> parse_scope(std::string_view name) {
  if (name == "output") return Scope::Output;
  if (name == "phrase") return Scope::Phrase;
  if (name == "cleaned") return Scope::Cleaned;
  return std::nullopt;
}

std::string_view to_string(Scope scope) {
  switch (scope) {
    case Scope::Output: return "output";
    case Scope::Phrase: return "phrase";
    case Scope::Cleaned: return "cleaned";
  }
  return "output";
}

std::size_t flag_artifacts(const path& clean_in, const path& report_in, const path& out, Scope scope,
                           const artifacts::ClassifyOptions& options) {
  std::unordered_map<std::string, json> reports;
  for (auto& rec : jsonl::read(report_in)) {
    auto id = rec.at("record_id").get<std::string>();
    reports[std::move(id)] = std::move(rec);
  }
  jsonl::Writer writer(out, jsonl::Writer::Mode::Truncate);
  std::size_t n = 0;
  for (const auto& rec : jsonl::read(clean_in)) {
    const auto id = rec.at("record_id").get<std::string>();
    const auto it = reports.find(id);
    if (it == reports.end()) throw Error("record " + id + " has no entry in " + report_in.string());
    const auto& report = it->second.at("report");
    const bool degenerate = !report.is_null();
    std::string text;
    switch (scope) {
      case Scope::Output: text = rec.at("output_text").get<std::string>(); break;
      case Scope::Cleaned: text = rec.at("cleaned_text").get<std::string>(); break;
      case Scope::Phrase: text = degenerate ? report.at("phrase").get<std::string>() : std::string{}; break;
    }
    writer.write({{"record_id", id},
                  {"model_id", rec.value("model_id", "")},
                  {"family", rec.value("family", "")},
                  {"degenerate", degenerate},
                  {"scope", to_string(scope)},
                  {"flags", artifacts::classify(text, options)}});
    ++n;
  }
  return n;
}

std::string artifact_summary(const path& flags, artifacts::Denominator denominator, Format format) {
  std::vector<artifacts::FlaggedRecord> records;
  for (const auto& rec : jsonl::read(flags))
    records.push_back({rec.at("family").get<std::string>(), rec.at("degenerate").get<bool>(),
                       rec.at("flags").get<artifacts::ArtifactFlags>()});
  const auto rows = artifacts::artifact_rates(records, denominator);
  const std::string denom_name = denominator == artifacts::Denominator::All ? "all" : "degenerate_only";
  if (format == Format::Json) {
    json j{{"denominator", denom_name}, {"rows", json::array()}};
    for (const auto& r : rows) j["rows"].push_back(artifacts::to_json(r));
    j["provenance"] = {{"input_sha256", file_sha256(flags)}};
    return j.dump(2) + "\n";
  }
  const auto cell = [&](const std::optional<double>& v) -> std::string {
    if (!v) return format == Format::Csv ? "" : "-";
    return format == Format::Csv ? format_real(*v) : format_percent(*v) + "%";
  };
  std::string out = format == Format::Csv
                        ? "family,denominator,conversational,question_answer,cjk,emoji,pii,emoji_given_conversational\n"
                        : "family\tdenominator\tconversational\tquestion_answer\tcjk\temoji\tpii\temoji|conv\n";
  const char sep = format == Format::Csv ? ',' : '\t';
  for (const auto& r : rows) {
    out += (format == Format::Csv ? csv_field(r.family) : r.family) + sep + std::to_string(r.denominator) + sep +
           cell(r.conversational) + sep + cell(r.question_answer) + sep + cell(r.cjk) + sep + cell(r.emoji) + sep +
           cell(r.pii) + sep + cell(r.emoji_given_conversational) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// label / grade

json to_json(const LabelSummary& s) {
  return {{"requested", s.requested}, {"labeled", s.labeled}, {"skipped_existing", s.skipped_existing},
          {"by_status", s.by_status}};
}

LabelSummary label(const path& in, const path& out, const annotate::JudgeFn& judge, const std::string& labeler_model,
                   int parse_retries, std::size_t parallel) {
  const auto records = jsonl::read(in);
  const auto done = existing_ids(out);
  LabelSummary summary;
  summary.requested = records.size();
  std::vector<const json*> todo;
  for (const auto& rec : records) {
    if (done.contains(rec.at("record_id").get<std::string>()))
      ++summary.skipped_existing;
    else
      todo.push_back(&rec);
  }
  jsonl::Writer writer(out, jsonl::Writer::Mode::Append);
  ordered_parallel(
      todo.size(), parallel,
      [&](std::size_t k) {
        const auto& rec = *todo[k];
        annotate::LabeledRecord r;
        r.record_id = rec.at("record_id").get<std::string>();
        r.model_id = rec.value("model_id", "");
        r.family = rec.value("family", "");
        r.prompt_id = rec.value("prompt_id", 0);
        r.cleaned_text = rec.at("cleaned_text").get<std::string>();
        r.labeler_model = labeler_model;
        r.semantic = annotate::label_semantic(r.cleaned_text, judge, parse_retries);
        return r;
      },
      [&](annotate::LabeledRecord r) {
        ++summary.by_status[std::string(annotate::to_string(r.semantic.status))];
        ++summary.labeled;
        writer.write(json(r));
      });
  return summary;
}

json to_json(const GradeSummary& s) {
  return {{"records", s.records}, {"graded", s.graded}, {"skipped_existing", s.skipped_existing},
          {"by_level", s.by_level}};
}

GradeSummary grade(const path& in, const path& out, const std::vector<annotate::Domain>& domains,
                   const annotate::JudgeFn& judge, int parse_retries, std::size_t parallel) {
  const auto records = read_labeled(in);
  const auto done = existing_ids(out);
  GradeSummary summary;
  summary.records = records.size();
  std::vector<const annotate::LabeledRecord*> todo;
  for (const auto& r : records) {
    if (done.contains(r.record_id))
      ++summary.skipped_existing;
    else
      todo.push_back(&r);
  }
  const auto domain_of = [&](const annotate::LabeledRecord& r) -> std::optional<annotate::Domain> {
    if (r.semantic.status != annotate::LabelStatus::Ok) return std::nullopt;
    const auto category = annotate::normalize_label(r.semantic.category);
    for (const auto d : domains)
      if (category == annotate::category_of(d)) return d;
    return std::nullopt;
  };
  jsonl::Writer writer(out, jsonl::Writer::Mode::Append);
  ordered_parallel(
      todo.size(), parallel,
      [&](std::size_t k) {
        auto r = *todo[k];
        if (const auto d = domain_of(r); d && !r.difficulty)
          r.difficulty = annotate::grade_difficulty(r.cleaned_text, *d, judge, parse_retries);
        return r;
      },
      [&](annotate::LabeledRecord r) {
        if (r.difficulty) {
          ++summary.graded;
          ++summary.by_level[std::string(annotate::to_string(r.difficulty->level))];
        }
        writer.write(json(r));
      });
  return summary;
}

// ---------------------------------------------------------------------------
// analyze

void Table::add(std::string owner, std::string label, double value) {
  owners.push_back(std::move(owner));
  labels.push_back(std::move(label));
  values.push_back(value);
}

std::string Table::render(Format format) const {
  if (format == Format::Json) return detail.dump(2) + "\n";
  std::string out = format == Format::Csv ? "owner,label,value\n" : "";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (format == Format::Csv) {
      out += csv_field(owners[i]) + "," + csv_field(labels[i]) + "," + format_real(values[i]) + "\n";
    } else {
      out += owners[i] + "\t" + labels[i] + "\t" +
             (values_are_fractions ? format_percent(values[i]) + "%" : format_real(values[i])) + "\n";
    }
  }
  return out;
}

namespace {

std::string_view group_name(analytics::GroupBy by) { return by == analytics::GroupBy::Family ? "family" : "model"; }
std::string_view level_name(analytics::LabelLevel level) {
  return level == analytics::LabelLevel::Category ? "category" : "subcategory";
}

}  // namespace

Table analyze(std::string_view kind, const path& in, const AnalyzeOptions& o) {
  if (std::find(kAnalyses.begin(), kAnalyses.end(), kind) == kAnalyses.end())
    throw UsageError("unknown analysis: " + std::string(kind));
  const auto records = read_labeled(in);
  Table t;
  t.detail = {{"kind", kind}, {"provenance", {{"input_sha256", file_sha256(in)}}}};
  auto& prov = t.detail["provenance"];

  if (kind == "dist") {
    prov["group_by"] = group_name(o.by);
    prov["level"] = level_name(o.level);
    t.values_are_fractions = true;
    json dists = json::array();
    for (const auto& d : analytics::distribution(records, o.by, o.level)) {
      for (std::size_t i = 0; i < d.support.size(); ++i) t.add(d.owner, d.support[i], d.probs[i]);
      dists.push_back({{"owner", d.owner}, {"labels", d.support}, {"probs", d.probs}});
    }
    t.detail["distributions"] = dists;
  } else if (kind == "similarity") {
    prov["group_by"] = group_name(o.by);
    prov["level"] = level_name(o.level);
    const auto dists = analytics::distribution(records, o.by, o.level);
    const auto m = analytics::similarity_matrix(dists);
    for (std::size_t i = 0; i < m.ids.size(); ++i)
      for (std::size_t j = 0; j < m.ids.size(); ++j) t.add(m.ids[i], m.ids[j], m.values[i][j]);
    t.detail["ids"] = m.ids;
    t.detail["values"] = m.values;
    t.detail["metric"] = m.metric;
  } else if (kind == "robustness") {
    prov["seed"] = o.seed;
    prov["splits"] = o.splits;
    prov["level"] = level_name(o.level);
    json rows = json::array();
    for (const auto& r : analytics::split_half_robustness(records, o.splits, o.seed, o.level)) {
      t.add(r.family, "mean_jsd", r.mean_jsd);
      t.add(r.family, "std_jsd", r.std_jsd);
      t.add(r.family, "splits_used", static_cast<double>(r.splits_used));
      rows.push_back({{"family", r.family}, {"mean_jsd", r.mean_jsd}, {"std_jsd", r.std_jsd},
                      {"splits_used", r.splits_used}});
    }
    t.detail["rows"] = rows;
  } else if (kind == "subcat") {
    if (o.category.empty()) throw UsageError("analyze subcat needs --category");
    prov["group_by"] = group_name(o.by);
    prov["category"] = o.category;
    prov["top_k"] = o.top_k;
    t.values_are_fractions = true;
    const auto table = analytics::subcategory_table(records, o.category, o.top_k, o.by);
    for (std::size_t f = 0; f < table.owners.size(); ++f)
      for (std::size_t s = 0; s < table.subcategories.size(); ++s)
        t.add(table.owners[f], table.subcategories[s], table.percent[f][s] / 100.0);
    t.detail["category"] = table.category;
    t.detail["owners"] = table.owners;
    t.detail["subcategories"] = table.subcategories;
    t.detail["percent"] = table.percent;
  } else if (kind == "depth") {
    prov["group_by"] = group_name(o.by);
    prov["domain"] = annotate::to_string(o.domain);
    t.values_are_fractions = true;
    json rows = json::array();
    for (const auto& r : analytics::depth_table(records, o.domain, o.by)) {
      json counts = json::object();
      json props = json::object();
      for (const auto& [level, n] : r.counts) counts[std::string(annotate::to_string(level))] = n;
      for (const auto& [level, p] : r.proportion) {
        t.add(r.owner, std::string(annotate::to_string(level)), p);
        props[std::string(annotate::to_string(level))] = p;
      }
      rows.push_back({{"owner", r.owner}, {"classified", r.classified}, {"counts", counts}, {"proportion", props}});
    }
    t.detail["rows"] = rows;
  } else {  // balance
    if (o.per_family == 0) throw UsageError("analyze balance needs --per-family N (N > 0)");
    prov["seed"] = o.seed;
    prov["per_family"] = o.per_family;
    const auto subset = analytics::balanced_subset(records, o.per_family, o.seed);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : subset) ++counts[r.family];
    for (const auto& [family, n] : counts) t.add(family, "count", static_cast<double>(n));
    t.detail["counts"] = counts;
    if (o.subset_out) {
      jsonl::Writer writer(*o.subset_out, jsonl::Writer::Mode::Truncate);
      for (const auto& r : subset) writer.write(json(r));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// fingerprint

std::optional<Target> parse_target(std::string_view name) {
  if (name == "model") return Target::Model;
  if (name == "family") return Target::Family;
  return std::nullopt;
}

fingerprint::EvalReport fingerprint_train(const path& embeddings, const path& labels, Target target,
                                          const fingerprint::TrainConfig& config, const path& out) {
  const auto store = embed::read_store(embeddings);
  const auto data = join_dataset(store, read_labeled(labels), target);
  const auto result = fingerprint::train(data.features, data.labels, data.family_of, config);
  const auto model_dir = fs::absolute(out).parent_path();
  const json extra{{"embeddings", rel_to(embeddings, model_dir)},
                   {"labels", rel_to(labels, model_dir)},
                   {"target", target == Target::Model ? "model" : "family"},
                   {"embedding_model", store.model_id},
                   {"rows", data.labels.size()},
                   {"train_rows", result.split.train.size()},
                   {"test_rows", result.split.test.size()},
                   {"final_loss", result.loss_history.empty() ? 0.0 : result.loss_history.back()}};
  fingerprint::save_model(out, result.model, extra);
  auto report = fingerprint::to_json(result.report);
  report["provenance"] = {{"seed", config.seed}, {"labels_sha256", file_sha256(labels)},
                          {"embeddings_sha256", file_sha256(embed::matrix_path(embeddings))}};
  jsonl::write_text_file(path(out).concat(".report.json"), report.dump(2) + "\n");
  return result.report;
}

fingerprint::EvalReport fingerprint_eval(const path& model_prefix) {
  json extra;
  const auto model = fingerprint::load_model(model_prefix, &extra);
  const auto model_dir = fs::absolute(model_prefix).parent_path();
  const auto target = parse_target(extra.value("target", "model"));
  if (!target || !extra.contains("embeddings") || !extra.contains("labels"))
    throw UsageError("model " + model_prefix.string() + " does not record its training data");
  const auto store = embed::read_store(model_dir / extra["embeddings"].get<std::string>());
  const auto data = join_dataset(store, read_labeled(model_dir / extra["labels"].get<std::string>()), *target);
  std::map<std::string, int> index_of;
  for (std::size_t c = 0; c < model.class_ids.size(); ++c) index_of[model.class_ids[c]] = static_cast<int>(c);
  std::vector<int> y;
  for (const auto& l : data.labels) {
    const auto it = index_of.find(l);
    if (it == index_of.end()) throw Error("label " + l + " is not a class of model " + model_prefix.string());
    y.push_back(it->second);
  }
  const auto split = fingerprint::stratified_split(y, model.num_classes(), model.train_config.test_fraction,
                                                   model.train_config.seed);
  return fingerprint::evaluate(model, data.features, data.labels, split.test);
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

http::ClientOptions client_options(const config::PipelineConfig& c) {
  http::ClientOptions o;
  o.timeout = std::chrono::seconds(c.timeout_s);
  o.retry.max_retries = c.max_retries;
  o.retry.base_delay = std::chrono::milliseconds(c.base_delay_ms);
  o.retry.max_delay = std::chrono::milliseconds(c.max_delay_ms);
  o.bearer_token = http::api_key_from_env();
  return o;
}

annotate::JudgeConfig judge_config(const config::PipelineConfig& c) {
  annotate::JudgeConfig j;
  j.endpoint_url = c.judge_endpoint;
  j.model_id = c.judge_model;
  j.parse_retries = c.judge_parse_retries;
  j.client = client_options(c);
  return j;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

json output_hashes(const path& work_dir) {
  std::vector<path> found;
  for (const auto& entry : fs::recursive_directory_iterator(work_dir))
    if (entry.is_regular_file() && entry.path().filename() != files::kManifest) found.push_back(entry.path());
  std::sort(found.begin(), found.end());
  json out = json::object();
  for (const auto& p : found) out[fs::relative(p, work_dir).generic_string()] = file_sha256(p);
  return out;
}

void write_analysis(const path& dir, const std::string& name, const std::string& csv, const std::string& js) {
  jsonl::write_text_file(dir / (name + ".csv"), csv);
  jsonl::write_text_file(dir / (name + ".json"), js);
}

}  // namespace

std::vector<StageResult> run_pipeline(const config::PipelineConfig& c) {
  const auto& wd = c.work_dir;
  const auto at = [&](const char* name) { return wd / name; };

  std::vector<std::string> stages;
  for (const auto& s : config::kAllStages)
    if (std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end()) stages.push_back(s);
  require(!stages.empty(), "pipeline: no stages selected");

  // Preflight: settings and inputs for every stage before any work starts.
  std::set<path> produced;
  const auto need = [&](const path& p) {
    require(produced.contains(p) || fs::exists(p), "missing input file: " + p.string());
  };
  for (const auto& s : stages) {
    if (s == "generate") {
      require(!c.generation_endpoint.empty(), "config: generation.endpoint is required for generate");
      require(!c.models.empty(), "config: generation.models is required for generate");
      produced.insert(at(files::kGenerations));
    } else if (s == "clean") {
      need(at(files::kGenerations));
      produced.insert(at(files::kClean));
      produced.insert(at(files::kDegenReport));
    } else if (s == "artifacts") {
      need(at(files::kClean));
      need(at(files::kDegenReport));
      produced.insert(at(files::kArtifactFlags));
    } else if (s == "label") {
      require(!c.judge_endpoint.empty() && !c.judge_model.empty(),
              "config: judge.endpoint and judge.model are required for label");
      need(at(files::kClean));
      produced.insert(at(files::kLabeled));
    } else if (s == "grade") {
      require(!c.judge_endpoint.empty() && !c.judge_model.empty(),
              "config: judge.endpoint and judge.model are required for grade");
      need(at(files::kLabeled));
      produced.insert(at(files::kGraded));
    } else if (s == "embed") {
      require(!c.embedding_endpoint.empty() && !c.embedding_model.empty(),
              "config: embedding.endpoint and embedding.model are required for embed");
      need(at(files::kLabeled));
      produced.insert(embed::meta_path(at(files::kEmbeddings)));
    } else if (s == "analyze") {
      need(at(files::kDegenReport));
    } else if (s == "fingerprint") {
      need(embed::meta_path(at(files::kEmbeddings)));
      need(at(files::kLabeled));
    }
  }
  fs::create_directories(wd);

  std::vector<StageResult> results;
  for (const auto& s : stages) {
    spdlog::info("stage {}", s);
    json summary;
    if (s == "generate") {
      summary = json::array();
      for (std::size_t m = 0; m < c.models.size(); ++m) {
        gen::GenerationConfig g;
        g.temperature = c.temperature;
        g.top_p = c.top_p;
        g.max_tokens = c.max_tokens;
        g.endpoint_url = c.generation_endpoint;
        g.model_id = c.models[m].model_id;
        g.family = c.models[m].family;
        gen::BatchOptions b;
        b.n = c.samples_per_model;
        b.seed = derive_seed(c.seed, m);
        b.out = at(files::kGenerations);
        b.parallel = c.generation_parallel;
        b.generate.client = client_options(c);
        b.generate.fixed_time = c.fixed_time;
        auto one = gen::to_json(gen::generate_batch(b, g));
        one["model_id"] = g.model_id;
        one["seed"] = b.seed;
        summary.push_back(one);
      }
    } else if (s == "clean") {
      summary = to_json(clean(at(files::kGenerations), at(files::kClean), at(files::kDegenReport)));
    } else if (s == "artifacts") {
      summary = {{"records", flag_artifacts(at(files::kClean), at(files::kDegenReport), at(files::kArtifactFlags),
                                            Scope::Output)}};
    } else if (s == "label") {
      const auto jc = judge_config(c);
      summary = to_json(label(at(files::kClean), at(files::kLabeled), annotate::http_judge(jc), c.judge_model,
                              c.judge_parse_retries, c.judge_parallel));
    } else if (s == "grade") {
      const auto jc = judge_config(c);
      summary = to_json(grade(at(files::kLabeled), at(files::kGraded),
                              {annotate::Domain::Math, annotate::Domain::Programming}, annotate::http_judge(jc),
                              c.judge_parse_retries, c.judge_parallel));
    } else if (s == "embed") {
      embed::EmbedConfig ec;
      ec.endpoint_url = c.embedding_endpoint;
      ec.model_id = c.embedding_model;
      ec.batch_size = c.embedding_batch_size;
      ec.client = client_options(c);
      const auto records = read_labeled(at(files::kLabeled));
      summary = embed::to_json(embed::embed_batch(records, ec, at(files::kEmbeddings)));
    } else if (s == "analyze") {
      const auto dir = at(files::kAnalysisDir);
      fs::create_directories(dir);
      std::vector<std::string> written;
      const auto emit_stats = [&](const std::string& name, analytics::GroupBy by) {
        write_analysis(dir, name, degen_stats(at(files::kDegenReport), by, Format::Csv),
                       degen_stats(at(files::kDegenReport), by, Format::Json));
        written.push_back(name);
      };
      emit_stats("degen_stats_family", analytics::GroupBy::Family);
      emit_stats("degen_stats_model", analytics::GroupBy::Model);
      if (fs::exists(at(files::kArtifactFlags))) {
        const auto flags = at(files::kArtifactFlags);
        write_analysis(dir, "artifact_rates_degenerate",
                       artifact_summary(flags, artifacts::Denominator::DegenerateOnly, Format::Csv),
                       artifact_summary(flags, artifacts::Denominator::DegenerateOnly, Format::Json));
        write_analysis(dir, "artifact_rates_all", artifact_summary(flags, artifacts::Denominator::All, Format::Csv),
                       artifact_summary(flags, artifacts::Denominator::All, Format::Json));
        written.insert(written.end(), {"artifact_rates_degenerate", "artifact_rates_all"});
      }
      const auto labeled = fs::exists(at(files::kGraded))    ? at(files::kGraded)
                           : fs::exists(at(files::kLabeled)) ? at(files::kLabeled)
                                                             : path();
      if (!labeled.empty()) {
        const auto emit = [&](const std::string& name, std::string_view kind, AnalyzeOptions o) {
          o.seed = c.seed;
          o.splits = c.analyze_splits;
          o.top_k = c.analyze_top_k;
          const auto t = analyze(kind, labeled, o);
          write_analysis(dir, name, t.render(Format::Csv), t.render(Format::Json));
          written.push_back(name);
        };
        AnalyzeOptions by_family;
        AnalyzeOptions by_model;
        by_model.by = analytics::GroupBy::Model;
        emit("dist_family", "dist", by_family);
        emit("dist_model", "dist", by_model);
        emit("similarity_model", "similarity", by_model);
        emit("robustness", "robustness", by_family);
        const auto records = read_labeled(labeled);
        for (const auto domain : {annotate::Domain::Math, annotate::Domain::Programming}) {
          const std::string category(annotate::category_of(domain));
          const bool present = std::any_of(records.begin(), records.end(), [&](const auto& r) {
            return r.semantic.status == annotate::LabelStatus::Ok && annotate::normalize_label(r.semantic.category) == category;
          });
          if (!present) continue;
          AnalyzeOptions o;
          o.category = category;
          o.domain = domain;
          emit("subcat_" + category, "subcat", o);
          emit("depth_" + std::string(annotate::to_string(domain)), "depth", o);
        }
      }
      summary = {{"written", written}};
    } else if (s == "fingerprint") {
      fingerprint::TrainConfig tc;
      tc.seed = c.seed;
      tc.epochs = c.fingerprint_epochs;
      tc.learning_rate = c.fingerprint_learning_rate;
      tc.l2 = c.fingerprint_l2;
      tc.l2_normalize = c.fingerprint_l2_normalize;
      const auto report =
          fingerprint_train(at(files::kEmbeddings), at(files::kLabeled), *parse_target(c.fingerprint_target), tc,
                            at(files::kModel));
      summary = {{"individual_accuracy", report.individual_accuracy},
                 {"family_accuracy", report.family_accuracy},
                 {"test_count", report.test_count}};
    }
    results.push_back({s, summary});
  }

  json stage_json = json::array();
  for (const auto& r : results) stage_json.push_back({{"stage", r.stage}, {"summary", r.summary}});
  const json manifest{{"config", c.snapshot()},
                      {"corpus_sha256", corpus::Corpus::builtin().checksum()},
                      {"stages", stage_json},
                      {"outputs", output_hashes(wd)}};
  jsonl::write_text_file(at(files::kManifest), manifest.dump(2) + "\n");
  return results;
}

}  // namespace topmind::stages
