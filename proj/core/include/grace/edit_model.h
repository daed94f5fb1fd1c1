#pragma once

// Core value types for the associated-code-update pipeline: file versions,
// line spans, four-part edits, benchmark examples and ranked predictions.
//
// All line indices are 0-based. Spans are half-open [start, end).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace grace {

using Lines = std::vector<std::string>;

enum class NewlineStyle { kLF, kCRLF };

std::string_view to_string(NewlineStyle style);

// An immutable snapshot of a source file. Line terminators are stripped; the
// terminator style and presence of a final terminator are kept so that
// `serialize(deserialize(bytes)) == bytes` for every input.
class Version {
 public:
  Version() = default;
  explicit Version(Lines lines, NewlineStyle style = NewlineStyle::kLF,
                   bool trailing_newline = true);

  // A file is CRLF only when every '\n' is preceded by '\r'; otherwise it is
  // LF and any '\r' stays part of the line content.
  static Version deserialize(std::string_view bytes);
  std::string serialize() const;

  const Lines& lines() const noexcept { return lines_; }
  std::size_t size() const noexcept { return lines_.size(); }
  bool empty() const noexcept { return lines_.empty(); }
  const std::string& operator[](std::size_t i) const { return lines_[i]; }

  NewlineStyle newline_style() const noexcept { return style_; }
  bool trailing_newline() const noexcept { return trailing_newline_; }

  // Same style metadata, different content.
  Version with_lines(Lines lines) const;

  friend bool operator==(const Version&, const Version&) = default;

 private:
  Lines lines_;
  NewlineStyle style_ = NewlineStyle::kLF;
  bool trailing_newline_ = false;
};

struct LineSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  bool is_insertion_point() const noexcept { return start == end; }
  bool valid_for(std::size_t line_count) const noexcept {
    return start <= end && end <= line_count;
  }

  friend bool operator==(const LineSpan&, const LineSpan&) = default;
  friend auto operator<=>(const LineSpan&, const LineSpan&) = default;
};

struct EditProvenance {
  std::string repo_id;
  std::string file_path;
  std::optional<std::string> revision_id;
  std::optional<std::int64_t> timestamp;
  std::int64_t order_index = 0;

  friend bool operator==(const EditProvenance&, const EditProvenance&) = default;
};

// One edit, partitioned into the four prompt parts. `span` locates `before`
// in the source version; prefix/suffix are the lines immediately around it.
struct Edit {
  Lines prefix;
  Lines before;
  Lines after;
  Lines suffix;
  LineSpan span;
  EditProvenance provenance;

  bool is_noop() const noexcept { return before == after; }

  friend bool operator==(const Edit&, const Edit&) = default;
};

// True when both refer to the same located edit (provenance + span), which is
// how the association strategies exclude a target from its own context.
bool same_edit(const Edit& a, const Edit& b);

struct Example {
  std::string id;
  Edit current;  // current.after is the hidden ground truth
  std::vector<Edit> ctx_edits;
  std::optional<std::vector<Version>> future_versions;
  // Full v_{n-1} when known; lets the any-of-futures protocol compare whole
  // versions instead of the local window.
  std::optional<Version> source;
  std::set<std::string> tags;

  friend bool operator==(const Example&, const Example&) = default;
};

struct Prediction {
  int rank = 1;  // 1-based
  Lines text;
  std::optional<double> score;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Ranks dense 1..n; scores, when present, non-increasing with rank.
bool is_well_formed(std::span<const Prediction> predictions);

// Returns `source` with `edit.span` replaced by `edit.after`.
// Throws SpanMismatch when the lines at edit.span differ from edit.before.
Version apply_edit(const Edit& edit, const Version& source);

// Applies non-overlapping edits whose spans all refer to `source`, working
// bottom-to-top so earlier spans stay valid.
Version apply_edits(std::span<const Edit> edits, const Version& source);

// prefix ++ after ++ suffix, after checking the edit against `source`.
Version edited_region(const Edit& edit, const Version& source);

}  // namespace grace
