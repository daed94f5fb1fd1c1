#include "grace/evaluation.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "grace/errors.h"

namespace grace {

std::string_view to_string(Protocol p) {
  return p == Protocol::kAnyOfFutureVersions ? "futures" : "exact";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "exact") return Protocol::kNormalizedExact;
  if (s == "futures") return Protocol::kAnyOfFutureVersions;
  return std::nullopt;
}

bool exact_match(const Lines& pred, const Lines& truth) {
  return normalize_ws(join_lines(pred)) == normalize_ws(join_lines(truth));
}

bool versions_match(const Version& a, const Version& b) {
  return normalize_ws(join_lines(a.lines())) == normalize_ws(join_lines(b.lines()));
}

bool match_any_future(const Version& edit_applied, std::span<const Version> futures,
                      std::size_t k) {
  const std::string applied = normalize_ws(join_lines(edit_applied.lines()));
  const std::size_t limit = std::min(k, futures.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (normalize_ws(join_lines(futures[i].lines())) == applied) return true;
  }
  return false;
}

bool prediction_matches(const Example& ex, const Prediction& pred, const EvalConfig& cfg) {
  if (cfg.protocol == Protocol::kNormalizedExact) return exact_match(pred.text, ex.current.after);
  if (!ex.future_versions) return false;
  Edit applied = ex.current;
  applied.after = pred.text;
  if (ex.source) return match_any_future(apply_edit(applied, *ex.source), *ex.future_versions,
                                         cfg.k_futures);
  Lines window = applied.prefix;
  window.insert(window.end(), applied.after.begin(), applied.after.end());
  window.insert(window.end(), applied.suffix.begin(), applied.suffix.end());
  return match_any_future(Version(std::move(window)), *ex.future_versions, cfg.k_futures);
}

void aggregate(EvalReport& report) {
  report.counted = 0;
  report.top1_hits = 0;
  report.topk_hits = 0;
  for (const ItemVerdict& item : report.per_item) {
    if (item.errored && report.config.exclude_errored) continue;
    ++report.counted;
    if (!item.first_match_rank) continue;
    if (*item.first_match_rank == 1) ++report.top1_hits;
    if (static_cast<std::size_t>(*item.first_match_rank) <= report.config.topk) ++report.topk_hits;
  }
  if (report.counted == 0) {
    report.top1 = report.topk = report.spread = 0;
    return;
  }
  const double n = static_cast<double>(report.counted);
  report.top1 = 100.0 * static_cast<double>(report.top1_hits) / n;
  report.topk = 100.0 * static_cast<double>(report.topk_hits) / n;
  report.spread = 100.0 * static_cast<double>(report.topk_hits - report.top1_hits) / n;
}

EvalReport evaluate(std::span<const Example> dataset, const PredictionTable& preds,
                    const EvalConfig& cfg) {
  if (cfg.topk < 1) throw DataError("topk must be >= 1");
  if (cfg.k_futures < 1) throw DataError("k_futures must be >= 1");
  EvalReport report;
  report.config = cfg;
  report.per_item.reserve(dataset.size());
  for (const Example& ex : dataset) {
    ItemVerdict item;
    item.example_id = ex.id;
    const auto it = preds.find(ex.id);
    if (it == preds.end()) {
      if (cfg.strict) throw MissingPredictions("no predictions for example " + ex.id);
      item.missing = true;
    } else {
      const PredictionSet& set = it->second;
      item.errored = set.error.has_value();
      std::vector<const Prediction*> ranked;
      for (const auto& p : set.predictions) ranked.push_back(&p);
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const Prediction* a, const Prediction* b) { return a->rank < b->rank; });
      for (const Prediction* p : ranked) {
        const bool ok = prediction_matches(ex, *p, cfg);
        item.verdicts.push_back(ok);
        if (ok && !item.first_match_rank) item.first_match_rank = p->rank;
      }
    }
    report.per_item.push_back(std::move(item));
  }
  aggregate(report);
  return report;
}

// ---------------------------------------------------------------------------
// Ablations

std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kNone:
      return "none";
    case AblationMode::kSpatial:
      return "spatial";
    case AblationMode::kTemporal:
      return "temporal";
    case AblationMode::kRandomSameRepo:
      return "random-same-repo";
    case AblationMode::kRandomOtherRepo:
      return "random-other-repo";
    case AblationMode::kNoise:
      break;
  }
  return "noise";
}

std::optional<AblationMode> parse_ablation_mode(std::string_view s) {
  for (auto m : {AblationMode::kNone, AblationMode::kSpatial, AblationMode::kTemporal,
                 AblationMode::kRandomSameRepo, AblationMode::kRandomOtherRepo,
                 AblationMode::kNoise}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

AssociationSpec spec_for_mode(AblationMode mode, AssociationSpec base) {
  base.inject_noise = false;
  switch (mode) {
    case AblationMode::kNone:
      base.strategy = AssociationStrategy::kNone;
      break;
    case AblationMode::kSpatial:
      base.strategy = AssociationStrategy::kSpatial;
      break;
    case AblationMode::kTemporal:
      base.strategy = AssociationStrategy::kTemporal;
      break;
    case AblationMode::kRandomSameRepo:
      base.strategy = AssociationStrategy::kRandomSameRepo;
      break;
    case AblationMode::kRandomOtherRepo:
      base.strategy = AssociationStrategy::kRandomOtherRepo;
      break;
    case AblationMode::kNoise:
      base.strategy = AssociationStrategy::kSpatial;
      base.pool_filter = PoolFilter::kUnfiltered;
      base.inject_noise = true;
      break;
  }
  return base;
}

namespace {

// Candidate edits drawn from a dataset, deduplicated by location.
class EditIndex {
 public:
  explicit EditIndex(std::span<const Example> dataset) {
    std::unordered_set<std::string> seen;
    auto add = [&](const Edit& e) {
      if (!seen.insert(edit_key(e)).second) return;
      all_.push_back(e);
    };
    for (const Example& ex : dataset) {
      add(ex.current);
      for (const Edit& c : ex.ctx_edits) add(c);
    }
    for (std::size_t i = 0; i < all_.size(); ++i) {
      by_revision_[revision_key(all_[i])].push_back(i);
      by_file_[file_key(all_[i])].push_back(i);
    }
  }

  const std::vector<Edit>& all() const { return all_; }

  std::vector<Edit> same_revision(const Edit& e) const { return gather(by_revision_, revision_key(e)); }
  std::vector<Edit> same_file(const Edit& e) const { return gather(by_file_, file_key(e)); }

 private:
  static std::string file_key(const Edit& e) {
    return e.provenance.repo_id + '\x1f' + e.provenance.file_path;
  }
  static std::string revision_key(const Edit& e) {
    return file_key(e) + '\x1f' + e.provenance.revision_id.value_or("");
  }
  std::vector<Edit> gather(const std::unordered_map<std::string, std::vector<std::size_t>>& m,
                           const std::string& key) const {
    std::vector<Edit> out;
    if (auto it = m.find(key); it != m.end()) {
      for (std::size_t i : it->second) out.push_back(all_[i]);
    }
    return out;
  }

  std::vector<Edit> all_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_revision_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_file_;
};

std::vector<Edit> select_context(const Example& ex, const EditIndex& index,
                                 const AssociationSpec& spec) {
  std::vector<Edit> ctx;
  switch (spec.strategy) {
    case AssociationStrategy::kNone:
      break;
    case AssociationStrategy::kSpatial:
      ctx = nearest_spatial_associates(index.same_revision(ex.current), ex.current,
                                       spec.radius_lines, spec.max_edits);
      break;
    case AssociationStrategy::kTemporal:
      ctx = temporal_associates(index.same_file(ex.current), ex.current, spec.max_edits);
      break;
    case AssociationStrategy::kRandomSameRepo:
    case AssociationStrategy::kRandomOtherRepo:
      ctx = sample_random_edits(index.all(), spec.max_edits, spec, ex.current);
      break;
  }
  if (spec.inject_noise) {
    std::vector<Edit> pool;
    for (const Edit& e : index.all()) {
      const bool own = same_edit(e, ex.current) ||
                       std::any_of(ex.ctx_edits.begin(), ex.ctx_edits.end(),
                                   [&](const Edit& c) { return same_edit(c, e); });
      if (!own) pool.push_back(e);
    }
    ctx = inject_noise(ctx, pool, spec, ex.current);
  }
  return ctx;
}

}  // namespace

std::vector<Edit> reassociate(const Example& ex, std::span<const Example> dataset,
                              const AssociationSpec& spec) {
  return select_context(ex, EditIndex(dataset), spec);
}

EvalReport run_ablation(std::span<const Example> dataset, const AssociationSpec& spec,
                        Backend& backend, const InferenceParams& params, const EvalConfig& cfg,
                        const AblationOptions& opts) {
  validate(params);
  const EditIndex index(dataset);

  std::vector<InsertionPrompt> prompts(dataset.size());
  PredictionTable table;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Example ex = dataset[i];
    ex.ctx_edits = select_context(ex, index, spec);
    try {
      if (opts.style == PromptStyle::kComment) {
        prompts[i].prompt = build_comment_prompt(ex, opts.budget);
      } else if (spec.strategy == AssociationStrategy::kNone && !spec.inject_noise) {
        prompts[i] = build_no_edit_prompt(ex, opts.budget);
      } else if (opts.style == PromptStyle::kNoEdit) {
        prompts[i] = build_no_edit_prompt(ex, opts.budget);
      } else {
        prompts[i] = build_tag_prompt(ex, opts.budget);
      }
    } catch (const BudgetImpossible& e) {
      table[ex.id].error = e.what();
    }
  }

  // Fan out over a bounded worker pool; results land by index.
  std::vector<PredictionSet> results(dataset.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      if (table.contains(dataset[i].id)) continue;
      try {
        results[i].predictions = backend.predict(prompts[i], params);
      } catch (const AuthError&) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        next = dataset.size();
      } catch (const BackendFailure& e) {
        results[i].error = e.what();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, std::max<std::size_t>(1, dataset.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!table.contains(dataset[i].id)) table[dataset[i].id] = std::move(results[i]);
  }
  EvalReport report = evaluate(dataset, table, cfg);
  report.echo.association = spec;
  report.echo.inference = params;
  report.echo.backend = backend.name();
  report.echo.prompt_style = std::string(to_string(opts.style));
  report.echo.max_prompt_tokens = opts.budget.max_tokens;
  return report;
}

// ---------------------------------------------------------------------------
// Report JSON

namespace {

using ojson = nlohmann::ordered_json;

ojson spec_json(const AssociationSpec& s) {
  ojson j;
  j["strategy"] = to_string(s.strategy);
  j["radius_lines"] = s.radius_lines;
  j["max_edits"] = s.max_edits;
  j["pool_filter"] = to_string(s.pool_filter);
  j["seed"] = s.seed;
  j["inject_noise"] = s.inject_noise;
  return j;
}

ojson params_json(const InferenceParams& p) {
  ojson j;
  j["n"] = p.n;
  j["temperature"] = p.temperature;
  j["max_tokens"] = p.max_tokens;
  j["stop"] = p.stop;
  j["beam_width"] = p.beam_width ? ojson(*p.beam_width) : ojson(nullptr);
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  ojson j;
  j["schema_version"] = "1";
  ojson cfg;
  cfg["protocol"] = to_string(r.config.protocol);
  cfg["k_futures"] = r.config.k_futures;
  cfg["topk"] = r.config.topk;
  cfg["strict"] = r.config.strict;
  cfg["exclude_errored"] = r.config.exclude_errored;
  ojson echo;
  echo["eval"] = cfg;
  echo["association"] = r.echo.association ? spec_json(*r.echo.association) : ojson(nullptr);
  echo["inference"] = r.echo.inference ? params_json(*r.echo.inference) : ojson(nullptr);
  echo["backend"] = r.echo.backend ? ojson(*r.echo.backend) : ojson(nullptr);
  echo["prompt_style"] = r.echo.prompt_style ? ojson(*r.echo.prompt_style) : ojson(nullptr);
  echo["max_prompt_tokens"] =
      r.echo.max_prompt_tokens ? ojson(*r.echo.max_prompt_tokens) : ojson(nullptr);
  echo["prng"] = r.echo.prng;
  j["config_echo"] = echo;
  j["items"] = r.per_item.size();
  j["counted"] = r.counted;
  j["top1_hits"] = r.top1_hits;
  j["topk_hits"] = r.topk_hits;
  j["top1"] = r.top1;
  j["topk"] = r.topk;
  j["spread"] = r.spread;
  ojson items = ojson::array();
  for (const ItemVerdict& v : r.per_item) {
    ojson item;
    item["example_id"] = v.example_id;
    item["verdicts"] = v.verdicts;
    item["first_match_rank"] = v.first_match_rank ? ojson(*v.first_match_rank) : ojson(nullptr);
    item["errored"] = v.errored;
    item["missing"] = v.missing;
    items.push_back(std::move(item));
  }
  j["per_item"] = std::move(items);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SchemaError(0, "report is not a JSON object");
  if (!j.contains("per_item") || !j["per_item"].is_array()) {
    throw SchemaError(0, "report has no per_item array");
  }
  EvalReport r;
  try {
    if (j.contains("config_echo") && j["config_echo"].contains("eval")) {
      const auto& c = j["config_echo"]["eval"];
      if (auto p = parse_protocol(c.value("protocol", "exact"))) r.config.protocol = *p;
      r.config.k_futures = c.value("k_futures", r.config.k_futures);
      r.config.topk = c.value("topk", r.config.topk);
      r.config.strict = c.value("strict", false);
      r.config.exclude_errored = c.value("exclude_errored", false);
    }
    for (const auto& item : j["per_item"]) {
      ItemVerdict v;
      v.example_id = item.at("example_id").get<std::string>();
      v.verdicts = item.value("verdicts", std::vector<bool>{});
      v.errored = item.value("errored", false);
      v.missing = item.value("missing", false);
      for (std::size_t i = 0; i < v.verdicts.size(); ++i) {
        if (v.verdicts[i]) {
          v.first_match_rank = static_cast<int>(i) + 1;
          break;
        }
      }
      r.per_item.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(0, std::string("bad report: ") + e.what());
  }
  aggregate(r);
  return r;
}

}  // namespace grace
