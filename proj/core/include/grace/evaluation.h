#pragma once

// Exact-match evaluation. Two protocols:
//   kNormalizedExact      predicted After lines equal the ground truth after
//                         whitespace-run normalization (normalize_ws)
//   kAnyOfFutureVersions  the version obtained by applying the prediction
//                         normalize-equals one of the first k recorded
//                         future versions
//
// "Syntactic match modulo whitespace" is read as whitespace-run
// normalization, not parser-level equivalence.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grace/association.h"
#include "grace/backends.h"
#include "grace/edit_model.h"
#include "grace/prompting.h"
#include "grace/text.h"

namespace grace {

enum class Protocol { kNormalizedExact, kAnyOfFutureVersions };
std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);  // "exact" | "futures"

struct EvalConfig {
  Protocol protocol = Protocol::kNormalizedExact;
  std::size_t k_futures = 50;
  std::size_t topk = 5;
  bool strict = false;           // missing prediction sets raise MissingPredictions
  bool exclude_errored = false;  // drop backend-errored items from the denominator
};

bool exact_match(const Lines& pred, const Lines& truth);

// Normalized equality of the joined text of two versions.
bool versions_match(const Version& a, const Version& b);

bool match_any_future(const Version& edit_applied, std::span<const Version> futures,
                      std::size_t k);

struct PredictionSet {
  std::vector<Prediction> predictions;
  std::optional<std::string> error;  // backend failure for this item
};

using PredictionTable = std::map<std::string, PredictionSet, std::less<>>;

struct ItemVerdict {
  std::string example_id;
  std::vector<bool> verdicts;  // verdicts[r - 1] for rank r
  std::optional<int> first_match_rank;
  bool errored = false;
  bool missing = false;

  friend bool operator==(const ItemVerdict&, const ItemVerdict&) = default;
};

// Everything needed to rerun an evaluation.
struct ConfigEcho {
  std::optional<AssociationSpec> association;
  std::optional<InferenceParams> inference;
  std::optional<std::string> backend;
  std::optional<std::string> prompt_style;
  std::optional<std::size_t> max_prompt_tokens;
  std::string prng{"mt19937_64"};
};

struct EvalReport {
  std::vector<ItemVerdict> per_item;
  std::size_t counted = 0;  // denominator
  std::size_t top1_hits = 0;
  std::size_t topk_hits = 0;
  double top1 = 0;    // percentages
  double topk = 0;
  double spread = 0;  // topk - top1, computed from hit counts
  EvalConfig config;
  ConfigEcho echo;
};

// Verdict of one prediction under the protocol.
bool prediction_matches(const Example& ex, const Prediction& pred, const EvalConfig& cfg);

EvalReport evaluate(std::span<const Example> dataset, const PredictionTable& preds,
                    const EvalConfig& cfg);

// Recomputes counts and percentages from per-item verdicts.
void aggregate(EvalReport& report);

enum class AblationMode { kNone, kSpatial, kTemporal, kRandomSameRepo, kRandomOtherRepo, kNoise };
std::string_view to_string(AblationMode m);
std::optional<AblationMode> parse_ablation_mode(std::string_view s);

// Association spec for a CLI-level mode; kNoise is spatial + one injected
// unfiltered edit.
AssociationSpec spec_for_mode(AblationMode mode, AssociationSpec base);

struct AblationOptions {
  PromptStyle style = PromptStyle::kTag;  // kNone always uses the no-edit layout unless kComment
  TokenBudget budget;
  std::size_t jobs = 1;
};

// Re-selects context edits per spec for every example, prompts, predicts and
// evaluates. Candidate edits come from the dataset itself: every example's
// current and context edits, grouped by (repo, path, revision) for spatial
// selection and by (repo, path) for temporal selection. Backend transport
// and provider failures mark an item errored; AuthError propagates.
EvalReport run_ablation(std::span<const Example> dataset, const AssociationSpec& spec,
                        Backend& backend, const InferenceParams& params, const EvalConfig& cfg,
                        const AblationOptions& opts = {});

// Context edits the ablation would use for `ex`.
std::vector<Edit> reassociate(const Example& ex, std::span<const Example> dataset,
                              const AssociationSpec& spec);

std::string report_to_json(const EvalReport& report);
// Reads per-item verdicts and config back; aggregates are recomputed.
EvalReport report_from_json(std::string_view json);

}  // namespace grace
