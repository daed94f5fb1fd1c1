#pragma once

// Line-level diffing: Myers shortest edit script, hunk merging under a
// granularity policy, and four-part partitioning of each hunk. Also the edit
// classifiers used by dataset filtering.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grace/edit_model.h"

namespace grace {

struct GranularityConfig {
  std::size_t merge_gap = 2;       // merge hunks separated by <= this many unchanged lines
  std::size_t context_lines = 10;  // prefix/suffix size cap
  std::optional<std::string> parse_check;  // hook id, see `passes_parse_check`
};

// A block of changed lines: a[a_start, a_end) became b[b_start, b_end).
struct Hunk {
  std::size_t a_start = 0;
  std::size_t a_end = 0;
  std::size_t b_start = 0;
  std::size_t b_end = 0;

  friend bool operator==(const Hunk&, const Hunk&) = default;
};

// Minimal line diff (byte-exact comparison). Hunks are ordered and
// separated by at least one unchanged line.
std::vector<Hunk> myers_diff(std::span<const std::string> a, std::span<const std::string> b);

// Hunks merged when the unchanged gap between them is <= merge_gap.
std::vector<Hunk> merge_hunks(std::span<const Hunk> hunks, std::size_t merge_gap);

// Edits that turn `a` into `b`, top-to-bottom, spans relative to `a`.
// Provenance is left default; order_index is the position in the result.
std::vector<Edit> diff_versions(const Version& a, const Version& b,
                                const GranularityConfig& cfg = {});

Edit partition_hunk(const Version& a, LineSpan hunk_span, Lines after_lines,
                    const GranularityConfig& cfg = {});

enum class SimpleKind { kPureDeletion, kPureInsertion, kRename, kNotSimple };

std::string_view to_string(SimpleKind kind);

// Rename: same line structure and separators, differing only where a single
// identifier `from` is replaced everywhere by an identifier `to` that did not
// occur in `before`.
SimpleKind classify_simple(const Edit& e);

// True iff some token of target.after occurs nowhere in the target's
// prefix/before/suffix nor in any part of the context edits.
bool has_alien_insertion(const Edit& target, std::span<const Edit> ctx);

// Built-in hook: "balanced-delimiters". Any hook of the form "cmd:<shell>"
// runs the command with the text on stdin; exit status 0 means it parses.
inline constexpr std::string_view kBalancedDelimiters = "balanced-delimiters";

bool passes_parse_check(std::string_view hook, const Lines& lines);

bool balanced_delimiters(const Lines& lines);

}  // namespace grace
