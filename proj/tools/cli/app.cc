#include "cli/app.h"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "cli/config_json.h"
#include "grace/artifacts.h"
#include "grace/dataset.h"
#include "grace/digest.h"
#include "grace/errors.h"
#include "grace/evaluation.h"
#include "grace/mining.h"
#include "grace/random.h"

#ifndef GRACE_VERSION
#define GRACE_VERSION "0.0.0"
#endif

namespace grace::cli {

std::string_view tool_version() { return GRACE_VERSION; }

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::size_t default_jobs() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

struct Globals {
  std::size_t jobs = default_jobs();
  std::string manifest;
  std::string log_level{"info"};
};

// Files read and written by one command, for the run manifest.
struct Io {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  fs::path manifest;
};

ojson option_values(const CLI::App& app) {
  ojson j = ojson::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "version") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_expected_min() == 0 && r.size() == 1 && (r[0].empty() || r[0] == "true")) {
        j[name] = true;
      } else {
        j[name] = r.size() == 1 ? ojson(r[0]) : ojson(r);
      }
    } else if (opt->get_expected_min() == 0) {
      j[name] = false;
    } else {
      const std::string def = opt->get_default_str();
      j[name] = def.empty() ? ojson(nullptr) : ojson(def);
    }
  }
  return j;
}

ojson file_entry(const fs::path& p) {
  ojson e;
  e["path"] = p.string();
  e["sha256"] = fs::is_regular_file(p) ? ojson(sha256_file_hex(p)) : ojson(nullptr);
  return e;
}

void write_manifest(const std::vector<std::string>& args, const CLI::App& root,
                    const CLI::App& sub, const Io& io, double wall_ms) {
  ojson m;
  m["tool_version"] = tool_version();
  m["prng"] = kPrngName;
  m["command"] = args;
  ojson cfg = option_values(root);
  cfg[sub.get_name()] = option_values(sub);
  m["config"] = std::move(cfg);
  m["inputs"] = ojson::array();
  for (const auto& p : io.inputs) m["inputs"].push_back(file_entry(p));
  m["outputs"] = ojson::array();
  for (const auto& p : io.outputs) m["outputs"].push_back(file_entry(p));
  m["wall_time_ms"] = wall_ms;
  std::ofstream out(io.manifest, std::ios::binary | std::ios::trunc);
  out << m.dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest " + io.manifest.string());
}

fs::path manifest_for(const Globals& g, const fs::path& primary) {
  if (!g.manifest.empty()) return g.manifest;
  return fs::path(primary.string() + ".manifest.json");
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Shared option groups

const std::map<std::string, AssociationStrategy> kBuildStrategies{
    {"spatial", AssociationStrategy::kSpatial}, {"temporal", AssociationStrategy::kTemporal}};
const std::map<std::string, PromptStyle> kStyles{
    {"tag", PromptStyle::kTag}, {"no-edit", PromptStyle::kNoEdit}, {"comment", PromptStyle::kComment}};
const std::map<std::string, PromptStyle> kFinetuneStyles{{"tag", PromptStyle::kTag},
                                                         {"no-edit", PromptStyle::kNoEdit}};
const std::map<std::string, BackendKind> kBackends{{"mirror", BackendKind::kMirror},
                                                   {"echo", BackendKind::kEcho},
                                                   {"remote", BackendKind::kRemoteInsertion}};
const std::map<std::string, Protocol> kProtocols{{"exact", Protocol::kNormalizedExact},
                                                 {"futures", Protocol::kAnyOfFutureVersions}};
const std::map<std::string, PoolFilter> kPools{{"filtered", PoolFilter::kFilteredOnly},
                                               {"unfiltered", PoolFilter::kUnfiltered}};
const std::map<std::string, AblationMode> kModes{
    {"none", AblationMode::kNone},
    {"spatial", AblationMode::kSpatial},
    {"temporal", AblationMode::kTemporal},
    {"random-same-repo", AblationMode::kRandomSameRepo},
    {"random-other-repo", AblationMode::kRandomOtherRepo},
    {"noise", AblationMode::kNoise}};

template <typename E>
std::vector<std::string> names(const std::map<std::string, E>& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

// Option values are validated against `names(m)` at parse time.
template <typename E>
E lookup(const std::map<std::string, E>& m, const std::string& key) {
  return m.at(key);
}

struct BackendArgs {
  BackendConfig config;
  InferenceParams params;
  std::string kind{"mirror"};
  int beam_width = 5;
};

void add_backend_options(CLI::App* sub, BackendArgs& b) {
  sub->add_option("--backend", b.kind, "mirror | echo | remote")
      ->check(CLI::IsMember(names(kBackends)));
  sub->add_option("--endpoint", b.config.endpoint, "Remote insertion endpoint URL");
  sub->add_option("--model", b.config.model_name, "Model name sent to the remote endpoint");
  sub->add_option("--n", b.params.n, "Completions per prompt")->check(CLI::PositiveNumber);
  sub->add_option("--temperature", b.params.temperature)->check(CLI::NonNegativeNumber);
  sub->add_option("--max-tokens", b.params.max_tokens, "Completion token limit")
      ->check(CLI::PositiveNumber);
  sub->add_option("--stop", b.params.stop, "Stop marker");
  sub->add_option("--beam-width", b.beam_width)->check(CLI::PositiveNumber);
  sub->add_option("--max-concurrency", b.config.max_concurrency, "In-flight request bound")
      ->check(CLI::PositiveNumber);
  sub->add_option("--retries", b.config.retry.max_attempts, "Attempts per request")
      ->check(CLI::PositiveNumber);
  sub->add_option("--backoff-ms", b.config.retry.base_backoff_ms)->check(CLI::NonNegativeNumber);
  sub->add_option("--timeout-ms", b.config.timeout_ms)->check(CLI::PositiveNumber);
}

void finish_backend_args(BackendArgs& b) {
  b.config.kind = lookup(kBackends, b.kind);
  b.params.beam_width = b.beam_width;
  if (b.config.kind == BackendKind::kRemoteInsertion) {
    const char* key = std::getenv(std::string(kApiKeyEnv).c_str());
    if (!key || !*key) {
      throw AuthError("AuthError: environment variable " + std::string(kApiKeyEnv) +
                      " is not set");
    }
  }
}

std::size_t backend_jobs(const Globals& g, const BackendArgs& b) {
  if (b.config.kind != BackendKind::kRemoteInsertion) return g.jobs;
  return std::min<std::size_t>(g.jobs, static_cast<std::size_t>(b.config.max_concurrency));
}

TokenBudget make_budget(std::size_t max_tokens, const std::string& counter) {
  TokenBudget budget;
  budget.max_tokens = max_tokens;
  budget.counter = make_token_counter(counter);
  return budget;
}

// ---------------------------------------------------------------------------
// Commands

struct MineArgs {
  std::string source;
  std::string glob{"*"};
  std::string repo_id;
  std::string out;
};

Io cmd_mine(const MineArgs& a, const Globals& g) {
  MineOptions opts;
  opts.file_glob = a.glob;
  if (!a.repo_id.empty()) opts.repo_id = a.repo_id;
  opts.jobs = g.jobs;
  const auto pairs = mine_revisions(a.source, opts);
  write_pairs(a.out, pairs);
  spdlog::info("mined {} version pairs", pairs.size());
  return {{a.source}, {a.out}, manifest_for(g, a.out)};
}

struct BuildArgs {
  std::string pairs;
  std::string out;
  std::string strategy{"spatial"};
  std::size_t radius = 10;
  std::size_t max_edits = 3;
  std::size_t merge_gap = 2;
  std::size_t context_lines = 10;
  std::string parse_check;
  std::uint64_t seed = 0;
};

Io cmd_build(const BuildArgs& a, const Globals& g) {
  GranularityConfig gran;
  gran.merge_gap = a.merge_gap;
  gran.context_lines = a.context_lines;
  if (!a.parse_check.empty()) gran.parse_check = a.parse_check;
  AssociationSpec spec;
  spec.strategy = lookup(kBuildStrategies, a.strategy);
  spec.radius_lines = a.radius;
  spec.max_edits = a.max_edits;
  spec.seed = a.seed;
  const auto pairs = read_pairs(a.pairs);
  const RecordMeta meta = meta_for(spec, gran);
  JsonlWriter writer(a.out);
  std::size_t n = 0;
  for (auto& ex : build_examples(pairs, gran, spec)) {
    writer.write({std::string(kSchemaVersion), std::move(ex), meta});
    ++n;
  }
  writer.close();
  spdlog::info("built {} examples from {} pairs", n, pairs.size());
  return {{a.pairs}, {a.out}, manifest_for(g, a.out)};
}

struct FilterArgs {
  std::string in;
  std::string out;
  std::string dropped;
  std::string profile{"filtered"};
  bool drop_simple = true;
  bool drop_alien = true;
  bool require_parse = false;
  std::string parse_hook{kBalancedDelimiters};
};

Io cmd_filter(FilterArgs a, const CLI::App& sub, const Globals& g) {
  const bool filtered = a.profile == "filtered";
  FilterRules rules;
  rules.drop_simple = sub.count("--drop-simple") ? a.drop_simple : filtered;
  rules.drop_alien = sub.count("--drop-alien") ? a.drop_alien : filtered;
  rules.require_parse = a.require_parse;
  rules.parse_hook = a.parse_hook;

  const auto records = read_jsonl(a.in);
  std::map<std::string, RecordMeta, std::less<>> meta;
  for (const auto& r : records) meta[r.example.id] = r.meta;
  const auto result = filter_examples(examples_of(records), rules);

  JsonlWriter kept(a.out);
  for (const auto& ex : result.kept) kept.write({std::string(kSchemaVersion), ex, meta[ex.id]});
  kept.close();
  Io io{{a.in}, {a.out}, manifest_for(g, a.out)};
  if (!a.dropped.empty()) {
    JsonlWriter dropped(a.dropped);
    for (const auto& d : result.dropped) {
      dropped.write({std::string(kSchemaVersion), d.example, meta[d.example.id]});
    }
    dropped.close();
    io.outputs.push_back(a.dropped);
  }
  std::map<std::string, std::size_t> reasons;
  for (const auto& d : result.dropped) ++reasons[d.reason];
  spdlog::info("kept {} of {} examples", result.kept.size(), records.size());
  for (const auto& [reason, count] : reasons) spdlog::info("  dropped {}: {}", reason, count);
  return io;
}

struct SplitArgs {
  std::string in;
  std::string out_dir;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  bool group_by_repo = false;
};

Io cmd_split(const SplitArgs& a, const Globals& g) {
  if (a.ratios.size() != 3) throw BadRatios("expected three ratios: train,eval,test");
  const auto records = read_jsonl(a.in);
  std::map<std::string, RecordMeta, std::less<>> meta;
  for (const auto& r : records) meta[r.example.id] = r.meta;
  const Splits s = split_dataset(examples_of(records), {a.ratios[0], a.ratios[1], a.ratios[2]},
                                 a.seed, a.group_by_repo);
  fs::create_directories(a.out_dir);
  Io io{{a.in}, {}, g.manifest.empty() ? fs::path(a.out_dir) / "manifest.json" : fs::path(g.manifest)};
  for (const auto& [name, part] : {std::pair{"train", &s.train}, std::pair{"eval", &s.eval},
                                   std::pair{"test", &s.test}}) {
    const fs::path path = fs::path(a.out_dir) / (std::string(name) + ".jsonl");
    JsonlWriter w(path);
    for (const auto& ex : *part) w.write({std::string(kSchemaVersion), ex, meta[ex.id]});
    w.close();
    io.outputs.push_back(path);
  }
  spdlog::info("split {} examples into {}/{}/{}", records.size(), s.train.size(), s.eval.size(),
               s.test.size());
  return io;
}

struct PromptArgs {
  std::string in;
  std::string out;
  std::string style{"tag"};
  std::size_t max_tokens = 1024;
  std::string counter{"default"};
};

Io cmd_prompt(const PromptArgs& a, const Globals& g) {
  const TokenBudget budget = make_budget(a.max_tokens, a.counter);
  JsonlReader reader(a.in);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + a.out);
  std::size_t n = 0;
  std::size_t failed = 0;
  while (auto rec = reader.next()) {
    const Example& ex = rec->example;
    PromptRecord pr;
    pr.id = ex.id;
    pr.style = lookup(kStyles, a.style);
    try {
      switch (pr.style) {
        case PromptStyle::kTag:
          pr.prompt = build_tag_prompt(ex, budget);
          break;
        case PromptStyle::kNoEdit:
          pr.prompt = build_no_edit_prompt(ex, budget);
          break;
        case PromptStyle::kComment:
          pr.prompt.prompt = build_comment_prompt(ex, budget);
          break;
      }
    } catch (const BudgetImpossible& e) {
      pr.prompt = {};
      pr.error = e.what();
      ++failed;
    }
    out << encode_prompt(pr) << '\n';
    ++n;
  }
  out.close();
  if (out.fail()) throw DataError("write failed: " + a.out);
  if (failed) spdlog::warn("{} of {} prompts exceed the token budget", failed, n);
  return {{a.in}, {a.out}, manifest_for(g, a.out)};
}

struct FinetuneArgs {
  std::string in;
  std::string out;
  std::string style{"tag"};
  std::string sentinel{kDefaultSentinel};
  std::size_t max_tokens = 0;
  std::string counter{"default"};
};

Io cmd_finetune(const FinetuneArgs& a, const Globals& g) {
  FinetuneOptions opts;
  opts.style = lookup(kFinetuneStyles, a.style);
  opts.sentinel = a.sentinel;
  if (a.max_tokens > 0) opts.budget = make_budget(a.max_tokens, a.counter);
  JsonlReader reader(a.in);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + a.out);
  std::size_t skipped = 0;
  while (auto rec = reader.next()) {
    try {
      out << encode_finetune(rec->example.id, build_finetune_record(rec->example, opts)) << '\n';
    } catch (const BudgetImpossible&) {
      ++skipped;
    }
  }
  out.close();
  if (out.fail()) throw DataError("write failed: " + a.out);
  if (skipped) spdlog::warn("skipped {} examples that exceed the token budget", skipped);
  return {{a.in}, {a.out}, manifest_for(g, a.out)};
}

struct PredictArgs {
  std::string prompts;
  std::string out;
  BackendArgs backend;
};

Io cmd_predict(PredictArgs a, const Globals& g) {
  finish_backend_args(a.backend);
  validate(a.backend.params);
  const auto prompts = read_prompts(a.prompts);
  auto backend = make_backend(a.backend.config);
  std::vector<PredictionRecord> results(prompts.size());
  parallel_for(prompts.size(), backend_jobs(g, a.backend), [&](std::size_t i) {
    const PromptRecord& p = prompts[i];
    results[i].id = p.id;
    if (p.error) {
      results[i].set.error = *p.error;
      return;
    }
    try {
      results[i].set.predictions = backend->predict(p.prompt, a.backend.params);
    } catch (const AuthError&) {
      throw;
    } catch (const BackendFailure& e) {
      results[i].set.error = e.what();
    }
  });
  std::vector<std::string> lines;
  std::size_t failed = 0;
  for (const auto& r : results) {
    failed += r.set.error.has_value();
    lines.push_back(encode_predictions(r));
  }
  write_lines(a.out, lines);
  if (failed) spdlog::warn("{} of {} items have no predictions", failed, results.size());
  return {{a.prompts}, {a.out}, manifest_for(g, a.out)};
}

struct EvalArgs {
  std::string dataset;
  std::string predictions;
  std::string report;
  std::string out;
  EvalConfig cfg;
  std::string protocol{"exact"};
};

void log_summary(const EvalReport& r) {
  spdlog::info("top1 {:.2f}  top{} {:.2f}  spread {:.2f}  (n={})", r.top1, r.config.topk, r.topk,
               r.spread, r.counted);
}

void write_report(const std::string& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << report_to_json(r);
  out.close();
  if (out.fail()) throw DataError("cannot write " + path);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Io cmd_eval(EvalArgs a, const CLI::App& sub, const Globals& g) {
  a.cfg.protocol = lookup(kProtocols, a.protocol);
  Io io{{}, {a.out}, manifest_for(g, a.out)};
  EvalReport report;
  if (!a.report.empty()) {
    report = report_from_json(slurp(a.report));
    if (sub.count("--topk")) report.config.topk = a.cfg.topk;
    if (sub.count("--exclude-errored")) report.config.exclude_errored = a.cfg.exclude_errored;
    aggregate(report);
    io.inputs.push_back(a.report);
  } else {
    if (a.dataset.empty() || a.predictions.empty()) {
      throw CLI::RequiredError("eval needs --dataset and --predictions, or --report");
    }
    const auto records = read_jsonl(a.dataset);
    const auto examples = examples_of(records);
    report = evaluate(examples, read_predictions(a.predictions), a.cfg);
    io.inputs = {a.dataset, a.predictions};
  }
  write_report(a.out, report);
  log_summary(report);
  return io;
}

struct AblateArgs {
  std::string dataset;
  std::string out;
  AssociationSpec spec;
  std::size_t max_prompt_tokens = 1024;
  std::string counter{"default"};
  BackendArgs backend;
  EvalConfig cfg;
  std::string protocol{"exact"};
  std::string mode{"spatial"};
  std::string pool{"filtered"};
  std::string style{"tag"};
};

Io cmd_ablate(AblateArgs a, const Globals& g) {
  finish_backend_args(a.backend);
  const auto records = read_jsonl(a.dataset);
  const auto examples = examples_of(records);
  a.spec.pool_filter = lookup(kPools, a.pool);
  a.cfg.protocol = lookup(kProtocols, a.protocol);
  const AssociationSpec spec = spec_for_mode(lookup(kModes, a.mode), a.spec);
  auto backend = make_backend(a.backend.config);
  AblationOptions opts;
  opts.style = lookup(kStyles, a.style);
  opts.budget = make_budget(a.max_prompt_tokens, a.counter);
  opts.jobs = backend_jobs(g, a.backend);
  const EvalReport report =
      run_ablation(examples, spec, *backend, a.backend.params, a.cfg, opts);
  write_report(a.out, report);
  log_summary(report);
  return {{a.dataset}, {a.out}, manifest_for(g, a.out)};
}

// ---------------------------------------------------------------------------

bool is_json_path(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string value;
    if (args[i] == "--config" && i + 1 < args.size()) {
      value = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      value = args[i].substr(9);
    } else {
      continue;
    }
    return fs::path(value).extension() == ".json";
  }
  return false;
}

void add_eval_options(CLI::App* sub, EvalConfig& cfg, std::string& protocol) {
  sub->add_option("--protocol", protocol, "exact | futures")
      ->check(CLI::IsMember(names(kProtocols)));
  sub->add_option("--topk", cfg.topk, "Top-k cutoff")->check(CLI::PositiveNumber);
  sub->add_option("--k-futures", cfg.k_futures, "Future versions considered")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--exclude-errored", cfg.exclude_errored,
                "Leave backend-errored items out of the denominator");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("grace", sink);
  logger->set_pattern("%l: %v");
  const auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> l;
    ~Restore() { spdlog::set_default_logger(l); }
  } restore{previous};

  CLI::App app{"Associated code update toolkit: mine edits, build prompts, predict, evaluate.",
               "grace"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version",
                       std::string("grace ") + std::string(tool_version()) + " (prng " +
                           std::string(kPrngName) + ")");
  app.set_config("--config", "", "TOML or JSON configuration file; flags override it");
  if (is_json_path(args)) app.config_formatter(std::make_shared<ConfigJSON>());

  Globals g;
  app.add_option("--jobs", g.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--manifest", g.manifest, "Run manifest path (default: <output>.manifest.json)");
  app.add_option("--log-level", g.log_level)
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  MineArgs mine;
  auto* s_mine = app.add_subcommand("mine", "Extract (parent, child) file versions");
  s_mine->add_option("source", mine.source, "git work tree or patch-series directory")
      ->required();
  s_mine->add_option("--glob", mine.glob, "File pattern");
  s_mine->add_option("--repo-id", mine.repo_id, "Repository id (default: directory name)");
  s_mine->add_option("--out", mine.out, "Version-pair JSONL")->required();

  BuildArgs build;
  auto* s_build = app.add_subcommand("build", "Assemble examples with associated edits");
  s_build->add_option("--pairs", build.pairs, "Version-pair JSONL")->required();
  s_build->add_option("--out", build.out, "Dataset JSONL")->required();
  s_build->add_option("--strategy", build.strategy, "spatial | temporal")
      ->check(CLI::IsMember(names(kBuildStrategies)));
  s_build->add_option("--radius", build.radius, "Spatial window in lines");
  s_build->add_option("--max-edits", build.max_edits, "Associated edits per example");
  s_build->add_option("--merge-gap", build.merge_gap, "Merge hunks this close");
  s_build->add_option("--context-lines", build.context_lines, "Prefix/suffix lines");
  s_build->add_option("--parse-check", build.parse_check, "Validation hook for merged edits");
  s_build->add_option("--seed", build.seed, "Recorded in record metadata");

  FilterArgs filter;
  auto* s_filter = app.add_subcommand("filter", "Drop simple and alien-insertion targets");
  s_filter->add_option("--in", filter.in, "Dataset JSONL")->required();
  s_filter->add_option("--out", filter.out, "Kept examples")->required();
  s_filter->add_option("--dropped", filter.dropped, "Dropped examples with reason tags");
  s_filter->add_option("--profile", filter.profile, "filtered | unfiltered")
      ->check(CLI::IsMember({"filtered", "unfiltered"}));
  s_filter->add_option("--drop-simple", filter.drop_simple, "Override the profile");
  s_filter->add_option("--drop-alien", filter.drop_alien, "Override the profile");
  s_filter->add_flag("--require-parse", filter.require_parse, "Drop targets failing the hook");
  s_filter->add_option("--parse-hook", filter.parse_hook, "balanced-delimiters | cmd:<shell>");

  SplitArgs split;
  auto* s_split = app.add_subcommand("split", "Split into train/eval/test");
  s_split->add_option("--in", split.in, "Dataset JSONL")->required();
  s_split->add_option("--out-dir", split.out_dir, "Receives train/eval/test.jsonl")->required();
  s_split->add_option("--ratios", split.ratios, "train,eval,test")->delimiter(',')->expected(3);
  s_split->add_option("--seed", split.seed);
  s_split->add_flag("--group-by-repo", split.group_by_repo, "Keep each repository in one split");

  PromptArgs prompt;
  auto* s_prompt = app.add_subcommand("prompt", "Render prompts");
  s_prompt->add_option("--in", prompt.in, "Dataset JSONL")->required();
  s_prompt->add_option("--out", prompt.out, "Prompt JSONL")->required();
  s_prompt->add_option("--style", prompt.style, "tag | comment | no-edit")
      ->check(CLI::IsMember(names(kStyles)));
  s_prompt->add_option("--max-tokens", prompt.max_tokens, "Prompt token budget");
  s_prompt->add_option("--counter", prompt.counter, "default | cmd:<shell>");

  FinetuneArgs ft;
  auto* s_ft = app.add_subcommand("finetune-prep", "Emit sentinel-masked training records");
  s_ft->add_option("--in", ft.in, "Dataset JSONL")->required();
  s_ft->add_option("--out", ft.out, "Training JSONL")->required();
  s_ft->add_option("--style", ft.style, "tag | no-edit")
      ->check(CLI::IsMember(names(kFinetuneStyles)));
  s_ft->add_option("--sentinel", ft.sentinel, "Mask marker");
  s_ft->add_option("--max-tokens", ft.max_tokens, "Token budget (0: none)");
  s_ft->add_option("--counter", ft.counter, "default | cmd:<shell>");

  PredictArgs predict;
  auto* s_predict = app.add_subcommand("predict", "Obtain ranked predictions");
  s_predict->add_option("--prompts", predict.prompts, "Prompt JSONL")->required();
  s_predict->add_option("--out", predict.out, "Prediction JSONL")->required();
  add_backend_options(s_predict, predict.backend);

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "Score predictions");
  s_eval->add_option("--dataset", eval.dataset, "Dataset JSONL");
  s_eval->add_option("--predictions", eval.predictions, "Prediction JSONL");
  s_eval->add_option("--report", eval.report, "Re-aggregate an existing report");
  s_eval->add_option("--out", eval.out, "Report JSON")->required();
  s_eval->add_flag("--strict", eval.cfg.strict, "Fail on examples without predictions");
  add_eval_options(s_eval, eval.cfg, eval.protocol);

  AblateArgs ablate;
  auto* s_ablate = app.add_subcommand("ablate", "Re-associate, predict and score");
  s_ablate->add_option("--dataset", ablate.dataset, "Dataset JSONL")->required();
  s_ablate->add_option("--out", ablate.out, "Report JSON")->required();
  s_ablate->add_option("--mode", ablate.mode,
                       "none | spatial | temporal | random-same-repo | random-other-repo | noise")
      ->check(CLI::IsMember(names(kModes)));
  s_ablate->add_option("--seed", ablate.spec.seed);
  s_ablate->add_option("--radius", ablate.spec.radius_lines);
  s_ablate->add_option("--max-edits", ablate.spec.max_edits);
  s_ablate->add_option("--pool", ablate.pool, "filtered | unfiltered")
      ->check(CLI::IsMember(names(kPools)));
  s_ablate->add_option("--style", ablate.style, "tag | comment | no-edit")
      ->check(CLI::IsMember(names(kStyles)));
  s_ablate->add_option("--max-prompt-tokens", ablate.max_prompt_tokens);
  s_ablate->add_option("--counter", ablate.counter);
  add_backend_options(s_ablate, ablate.backend);
  add_eval_options(s_ablate, ablate.cfg, ablate.protocol);

  // CLI11 consumes arguments from the back.
  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(std::move(rest));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto chosen = app.get_subcommands();
    err << (chosen.empty() ? app.help() : chosen.front()->help());
    return kUsage;
  }
  logger->set_level(spdlog::level::from_str(g.log_level));

  CLI::App* sub = app.get_subcommands().front();
  const auto start = std::chrono::steady_clock::now();
  try {
    Io io;
    const std::string name = sub->get_name();
    if (name == "mine") {
      io = cmd_mine(mine, g);
    } else if (name == "build") {
      io = cmd_build(build, g);
    } else if (name == "filter") {
      io = cmd_filter(filter, *sub, g);
    } else if (name == "split") {
      io = cmd_split(split, g);
    } else if (name == "prompt") {
      io = cmd_prompt(prompt, g);
    } else if (name == "finetune-prep") {
      io = cmd_finetune(ft, g);
    } else if (name == "predict") {
      io = cmd_predict(predict, g);
    } else if (name == "eval") {
      io = cmd_eval(eval, *sub, g);
    } else {
      io = cmd_ablate(ablate, g);
    }
    const double wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    write_manifest(args, app, *sub, io, wall_ms);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kUsage;
  } catch (const BackendFailure& e) {
    err << "error: " << e.what() << '\n';
    return kBackend;
  } catch (const SchemaError& e) {
    err << "error: SchemaError: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

}  // namespace grace::cli
