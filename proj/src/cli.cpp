#include "topmind/cli.hpp"

#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "topmind/config.hpp"
#include "topmind/corpus.hpp"
#include "topmind/error.hpp"
#include "topmind/genclient.hpp"
#include "topmind/jsonl.hpp"
#include "topmind/mock_server.hpp"
#include "topmind/stages.hpp"

namespace topmind::cli {

using nlohmann::json;

namespace {

void use_stderr_logger() {
  if (spdlog::get("topmind")) return;
  auto logger = spdlog::stderr_color_mt("topmind");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
}

template <class T, class Parse>
T parse_or_usage(const std::string& value, Parse parse, const std::string& what) {
  if (auto v = parse(value)) return *v;
  throw UsageError("invalid " + what + ": " + value);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    if (comma > pos) out.push_back(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

// Prints to `out` or writes to `file` when one was given.
void emit(std::ostream& out, const std::string& file, const std::string& text) {
  if (file.empty())
    out << text;
  else
    jsonl::write_text_file(file, text);
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args);

 private:
  config::PipelineConfig pipeline_config() const {
    config::KeyValues kv;
    if (!g_.config_path.empty()) kv = config::KeyValues::load(g_.config_path);
    kv.apply_env_overrides(config::PipelineConfig::known_keys());
    auto c = config::PipelineConfig::from(kv);
    if (g_.seed) c.seed = *g_.seed;
    return c;
  }

  std::uint64_t seed() const { return g_.seed ? *g_.seed : pipeline_config().seed; }

  stages::Format format() const {
    return parse_or_usage<stages::Format>(g_.format, stages::parse_format, "--format");
  }

  http::ClientOptions client(const config::PipelineConfig& c) const {
    http::ClientOptions o;
    o.timeout = std::chrono::seconds(c.timeout_s);
    o.retry.max_retries = c.max_retries;
    o.retry.base_delay = std::chrono::milliseconds(c.base_delay_ms);
    o.retry.max_delay = std::chrono::milliseconds(c.max_delay_ms);
    o.bearer_token = http::api_key_from_env();
    return o;
  }

  static const std::string& pick(const std::string& flag, const std::string& fallback, const char* name) {
    if (!flag.empty()) return flag;
    if (!fallback.empty()) return fallback;
    throw UsageError(std::string("missing required option ") + name);
  }

  std::ostream& out_;
  std::ostream& err_;
  Globals g_;
};

int Runner::run(const std::vector<std::string>& args) {
  CLI::App app{"topmind: top-of-mind generation and analysis toolkit", "topmind"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--config", g_.config_path, "Pipeline configuration file (key = value)");
  app.add_option("--seed", g_.seed, "Seed for every randomized step");
  app.add_option("--format", g_.format, "Output format: csv, json or text")->check(CLI::IsMember({"csv", "json", "text"}));

  std::function<void()> action;

  // generate
  struct {
    std::string endpoint, model, family, out, fixed_time;
    std::size_t n = 0;
    double temperature = 1.0, top_p = 0.9;
    int max_tokens = 4096;
    std::size_t parallel = 1;
  } gen_o;
  auto* gen = app.add_subcommand("generate", "Sample raw continuations of seed prompts");
  gen->add_option("--endpoint", gen_o.endpoint, "Completions endpoint URL");
  gen->add_option("--model", gen_o.model, "Model id")->required();
  gen->add_option("--family", gen_o.family, "Model family")->required();
  gen->add_option("--n", gen_o.n, "Number of samples")->required();
  gen->add_option("--out", gen_o.out, "Output JSONL")->required();
  gen->add_option("--temperature", gen_o.temperature);
  gen->add_option("--top-p", gen_o.top_p);
  gen->add_option("--max-tokens", gen_o.max_tokens);
  gen->add_option("--parallel", gen_o.parallel);
  gen->add_option("--fixed-time", gen_o.fixed_time, "Use this created_at instead of the clock");
  gen->callback([&] {
    action = [&] {
      const auto c = pipeline_config();
      gen::GenerationConfig g;
      g.endpoint_url = pick(gen_o.endpoint, c.generation_endpoint, "--endpoint");
      g.model_id = gen_o.model;
      g.family = gen_o.family;
      g.temperature = gen_o.temperature;
      g.top_p = gen_o.top_p;
      g.max_tokens = gen_o.max_tokens;
      gen::BatchOptions b;
      b.n = gen_o.n;
      b.seed = seed();
      b.out = gen_o.out;
      b.parallel = gen_o.parallel;
      b.generate.client = client(c);
      if (!gen_o.fixed_time.empty()) b.generate.fixed_time = gen_o.fixed_time;
      out_ << gen::to_json(gen::generate_batch(b, g)).dump(2) << "\n";
    };
  });

  // clean
  std::string clean_in, clean_out, clean_report;
  auto* cln = app.add_subcommand("clean", "Truncate degenerate outputs");
  cln->add_option("--in", clean_in, "Generation JSONL")->required();
  cln->add_option("--out", clean_out, "Cleaned JSONL")->required();
  cln->add_option("--report", clean_report, "Per-record degeneracy report JSONL")->required();
  cln->callback([&] {
    action = [&] { out_ << stages::to_json(stages::clean(clean_in, clean_out, clean_report)).dump(2) << "\n"; };
  });

  // degen-stats
  std::string ds_in, ds_by = "family";
  auto* ds = app.add_subcommand("degen-stats", "Degeneracy ratio and positions per group");
  ds->add_option("--in", ds_in, "Report JSONL from clean")->required();
  ds->add_option("--by", ds_by)->check(CLI::IsMember({"family", "model"}));
  ds->callback([&] {
    action = [&] {
      out_ << stages::degen_stats(ds_in, *analytics::parse_group_by(ds_by), format());
    };
  });

  // artifacts
  struct {
    std::string in, report, out, scope = "output", summary, denominator = "degenerate";
    std::size_t cjk_threshold = 10;
  } art_o;
  auto* art = app.add_subcommand("artifacts", "Flag conversational, QA, CJK, emoji and PII artifacts");
  art->add_option("--in", art_o.in, "Cleaned JSONL");
  art->add_option("--degen-report", art_o.report, "Report JSONL from clean");
  art->add_option("--out", art_o.out, "Flags JSONL")->required();
  art->add_option("--scope", art_o.scope, "Text to classify")->check(CLI::IsMember({"output", "phrase", "cleaned"}));
  art->add_option("--cjk-threshold", art_o.cjk_threshold);
  art->add_option("--summary", art_o.summary, "Print the rate table: csv, json or text")
      ->check(CLI::IsMember({"csv", "json", "text"}));
  art->add_option("--denominator", art_o.denominator)->check(CLI::IsMember({"degenerate", "all"}));
  art->callback([&] {
    action = [&] {
      if (art_o.in.empty() != art_o.report.empty())
        throw UsageError("artifacts: --in and --degen-report go together");
      if (!art_o.in.empty()) {
        const auto n = stages::flag_artifacts(art_o.in, art_o.report, art_o.out, *stages::parse_scope(art_o.scope),
                                              {art_o.cjk_threshold});
        if (art_o.summary.empty()) out_ << json{{"records", n}}.dump(2) << "\n";
      } else if (art_o.summary.empty()) {
        throw UsageError("artifacts: nothing to do without --in or --summary");
      }
      if (!art_o.summary.empty()) {
        const auto denom =
            art_o.denominator == "all" ? artifacts::Denominator::All : artifacts::Denominator::DegenerateOnly;
        out_ << stages::artifact_summary(art_o.out, denom, *stages::parse_format(art_o.summary));
      }
    };
  });

  // label / grade
  struct {
    std::string in, out, endpoint, model, domain = "math,programming";
    int parse_retries = 3;
    std::size_t parallel = 4;
  } lab_o;
  const auto judge_options = [&](CLI::App* sub) {
    sub->add_option("--in", lab_o.in)->required();
    sub->add_option("--out", lab_o.out)->required();
    sub->add_option("--judge-endpoint", lab_o.endpoint, "Chat-completions endpoint URL");
    sub->add_option("--judge-model", lab_o.model);
    sub->add_option("--parse-retries", lab_o.parse_retries);
    sub->add_option("--parallel", lab_o.parallel);
  };
  const auto judge = [&](const config::PipelineConfig& c) {
    annotate::JudgeConfig jc;
    jc.endpoint_url = pick(lab_o.endpoint, c.judge_endpoint, "--judge-endpoint");
    jc.model_id = pick(lab_o.model, c.judge_model, "--judge-model");
    jc.parse_retries = lab_o.parse_retries;
    jc.client = client(c);
    return jc;
  };
  auto* lab = app.add_subcommand("label", "Semantic category labels from a judge model");
  judge_options(lab);
  lab->callback([&] {
    action = [&] {
      const auto jc = judge(pipeline_config());
      out_ << stages::to_json(stages::label(lab_o.in, lab_o.out, annotate::http_judge(jc), jc.model_id,
                                            jc.parse_retries, lab_o.parallel))
                  .dump(2)
           << "\n";
    };
  });
  auto* grd = app.add_subcommand("grade", "Difficulty grades for mathematics and programming records");
  judge_options(grd);
  grd->add_option("--domain", lab_o.domain, "math, programming, or both comma separated");
  grd->callback([&] {
    action = [&] {
      std::vector<annotate::Domain> domains;
      for (const auto& d : split_commas(lab_o.domain))
        domains.push_back(parse_or_usage<annotate::Domain>(d, annotate::parse_domain, "--domain"));
      if (domains.empty()) throw UsageError("grade: --domain is empty");
      const auto jc = judge(pipeline_config());
      out_ << stages::to_json(stages::grade(lab_o.in, lab_o.out, domains, annotate::http_judge(jc),
                                            jc.parse_retries, lab_o.parallel))
                  .dump(2)
           << "\n";
    };
  });

  // embed
  struct {
    std::string in, endpoint, model, out;
    std::size_t batch_size = 32;
  } emb_o;
  auto* emb = app.add_subcommand("embed", "Embed cleaned texts into a float32 store");
  emb->add_option("--in", emb_o.in, "Labeled JSONL")->required();
  emb->add_option("--endpoint", emb_o.endpoint, "Embeddings endpoint URL");
  emb->add_option("--model", emb_o.model);
  emb->add_option("--out", emb_o.out, "Store prefix")->required();
  emb->add_option("--batch-size", emb_o.batch_size);
  emb->callback([&] {
    action = [&] {
      const auto c = pipeline_config();
      embed::EmbedConfig ec;
      ec.endpoint_url = pick(emb_o.endpoint, c.embedding_endpoint, "--endpoint");
      ec.model_id = pick(emb_o.model, c.embedding_model, "--model");
      ec.batch_size = emb_o.batch_size;
      ec.client = client(c);
      const auto summary = embed::embed_batch(stages::read_labeled(emb_o.in), ec, emb_o.out);
      out_ << embed::to_json(summary).dump(2) << "\n";
      if (!summary.missing.empty())
        spdlog::warn("{} records could not be embedded; re-run to retry them", summary.missing.size());
    };
  });

  // analyze
  struct {
    std::string kind, in, out, subset, by = "family", level = "category", category, domain = "math";
    std::size_t splits = 10, top_k = 9, per_family = 0;
  } an_o;
  auto* an = app.add_subcommand("analyze", "Label distributions, similarity, robustness and depth tables");
  an->add_option("kind", an_o.kind, "dist|similarity|robustness|subcat|depth|balance")
      ->required()
      ->check(CLI::IsMember(stages::kAnalyses));
  an->add_option("--in", an_o.in, "Labeled JSONL")->required();
  an->add_option("--out", an_o.out, "Write the table here instead of stdout");
  an->add_option("--by", an_o.by)->check(CLI::IsMember({"family", "model"}));
  an->add_option("--level", an_o.level)->check(CLI::IsMember({"category", "subcategory"}));
  an->add_option("--splits", an_o.splits);
  an->add_option("--category", an_o.category);
  an->add_option("--top-k", an_o.top_k);
  an->add_option("--domain", an_o.domain)->check(CLI::IsMember({"math", "mathematics", "programming"}));
  an->add_option("--per-family", an_o.per_family);
  an->add_option("--subset", an_o.subset, "balance: write the subset JSONL here");
  an->callback([&] {
    action = [&] {
      stages::AnalyzeOptions o;
      o.by = *analytics::parse_group_by(an_o.by);
      o.level = *analytics::parse_label_level(an_o.level);
      o.splits = an_o.splits;
      o.seed = seed();
      o.category = an_o.category;
      o.top_k = an_o.top_k;
      o.domain = *annotate::parse_domain(an_o.domain);
      o.per_family = an_o.per_family;
      if (!an_o.subset.empty()) o.subset_out = an_o.subset;
      emit(out_, an_o.out, stages::analyze(an_o.kind, an_o.in, o).render(format()));
    };
  });

  // fingerprint
  struct {
    std::string embeddings, labels, out, model, target = "model";
    int epochs = 500;
    double lr = 0.1, l2 = 1e-4;
    bool normalize = false;
  } fp_o;
  auto* fp = app.add_subcommand("fingerprint", "Attribute texts to their source model from embeddings");
  fp->require_subcommand(1);
  auto* fpt = fp->add_subcommand("train", "Train and evaluate on a stratified held-out split");
  fpt->add_option("--embeddings", fp_o.embeddings, "Store prefix")->required();
  fpt->add_option("--labels", fp_o.labels, "Labeled JSONL")->required();
  fpt->add_option("--out", fp_o.out, "Model prefix")->required();
  fpt->add_option("--target", fp_o.target)->check(CLI::IsMember({"model", "family"}));
  fpt->add_option("--epochs", fp_o.epochs);
  fpt->add_option("--lr", fp_o.lr);
  fpt->add_option("--l2", fp_o.l2);
  fpt->add_flag("--normalize", fp_o.normalize, "L2-normalize feature vectors");
  fpt->callback([&] {
    action = [&] {
      fingerprint::TrainConfig tc;
      tc.seed = seed();
      tc.epochs = fp_o.epochs;
      tc.learning_rate = fp_o.lr;
      tc.l2 = fp_o.l2;
      tc.l2_normalize = fp_o.normalize;
      const auto report =
          stages::fingerprint_train(fp_o.embeddings, fp_o.labels, *stages::parse_target(fp_o.target), tc, fp_o.out);
      out_ << fingerprint::to_json(report).dump(2) << "\n";
    };
  });
  auto* fpe = fp->add_subcommand("eval", "Re-evaluate a saved model on its held-out split");
  fpe->add_option("--model", fp_o.model, "Model prefix")->required();
  fpe->add_option("--out", fp_o.out, "Report JSON (stdout when absent)");
  fpe->callback([&] {
    action = [&] { emit(out_, fp_o.out, fingerprint::to_json(stages::fingerprint_eval(fp_o.model)).dump(2) + "\n"); };
  });

  // pipeline
  std::string pl_work_dir, pl_stages;
  auto* pl = app.add_subcommand("pipeline", "Run the configured stages in order");
  pl->add_option("--work-dir", pl_work_dir, "Overrides work_dir");
  pl->add_option("--stages", pl_stages, "Comma-separated subset of stages");
  pl->callback([&] {
    action = [&] {
      if (g_.config_path.empty()) throw UsageError("pipeline needs --config");
      auto kv = config::KeyValues::load(g_.config_path);
      kv.apply_env_overrides(config::PipelineConfig::known_keys());
      if (!pl_work_dir.empty()) kv.set("work_dir", pl_work_dir);
      if (!pl_stages.empty()) kv.set("stages", pl_stages);
      auto c = config::PipelineConfig::from(kv);
      if (g_.seed) c.seed = *g_.seed;
      json summary = json::array();
      for (const auto& r : stages::run_pipeline(c)) summary.push_back({{"stage", r.stage}, {"summary", r.summary}});
      out_ << summary.dump(2) << "\n";
    };
  });

  // mock-serve
  std::string ms_fixtures, ms_host = "127.0.0.1";
  int ms_port = 8089;
  auto* ms = app.add_subcommand("mock-serve", "Serve canned completions, judge replies and embeddings");
  ms->add_option("--fixtures", ms_fixtures, "Fixture JSON")->required();
  ms->add_option("--port", ms_port);
  ms->add_option("--host", ms_host);
  ms->callback([&] {
    action = [&] {
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      mock::MockServer server(mock::Fixtures::load(ms_fixtures));
      server.start(ms_host, ms_port);
      out_ << server.url("") << std::endl;
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    };
  });

  // corpus
  std::string corpus_out;
  auto* cor = app.add_subcommand("corpus", "Inspect the seed-prompt corpus");
  cor->require_subcommand(1);
  auto* exp = cor->add_subcommand("export", "Write the corpus as CSV");
  exp->add_option("--out", corpus_out);
  exp->callback([&] { action = [&] { emit(out_, corpus_out, corpus::Corpus::builtin().to_csv()); }; });
  auto* sum = cor->add_subcommand("checksum", "SHA-256 of the prompt texts");
  sum->callback([&] { action = [&] { out_ << corpus::Corpus::builtin().checksum() << "\n"; }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out_, err_);
    return code == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    err_ << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err_ << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  use_stderr_logger();
  return Runner(out, err).run(args);
}

}  // namespace topmind::cli
