#include "grace/edit_model.h"

#include <algorithm>
#include <iterator>

#include "grace/errors.h"

namespace grace {

std::string_view to_string(NewlineStyle style) {
  return style == NewlineStyle::kCRLF ? "crlf" : "lf";
}

Version::Version(Lines lines, NewlineStyle style, bool trailing_newline)
    : lines_(std::move(lines)),
      style_(style),
      trailing_newline_(trailing_newline && !lines_.empty()) {}

Version Version::deserialize(std::string_view bytes) {
  if (bytes.empty()) return Version({}, NewlineStyle::kLF, false);

  std::size_t newlines = 0;
  bool all_crlf = true;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] != '\n') continue;
    ++newlines;
    if (i == 0 || bytes[i - 1] != '\r') all_crlf = false;
  }
  const NewlineStyle style =
      newlines > 0 && all_crlf ? NewlineStyle::kCRLF : NewlineStyle::kLF;
  const std::size_t strip = style == NewlineStyle::kCRLF ? 1 : 0;

  Lines lines;
  lines.reserve(newlines + 1);
  std::size_t begin = 0;
  while (begin < bytes.size()) {
    const std::size_t nl = bytes.find('\n', begin);
    if (nl == std::string_view::npos) {
      lines.emplace_back(bytes.substr(begin));
      return Version(std::move(lines), style, false);
    }
    lines.emplace_back(bytes.substr(begin, nl - begin - strip));
    begin = nl + 1;
  }
  return Version(std::move(lines), style, true);
}

std::string Version::serialize() const {
  const std::string_view eol = style_ == NewlineStyle::kCRLF ? "\r\n" : "\n";
  std::string out;
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    out += lines_[i];
    if (i + 1 < lines_.size() || trailing_newline_) out += eol;
  }
  return out;
}

Version Version::with_lines(Lines lines) const {
  // A version that gains its first line keeps the conventional terminator.
  const bool trailing = lines_.empty() ? true : trailing_newline_;
  return Version(std::move(lines), style_, trailing);
}

bool same_edit(const Edit& a, const Edit& b) {
  return a.span == b.span && a.provenance == b.provenance;
}

bool is_well_formed(std::span<const Prediction> predictions) {
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].rank != static_cast<int>(i) + 1) return false;
    if (i > 0 && predictions[i].score && predictions[i - 1].score &&
        *predictions[i].score > *predictions[i - 1].score) {
      return false;
    }
  }
  return true;
}

namespace {

void check_span(const Edit& edit, const Version& source) {
  const LineSpan& span = edit.span;
  if (!span.valid_for(source.size())) {
    throw SpanMismatch("span [" + std::to_string(span.start) + ", " +
                       std::to_string(span.end) + ") out of range for a " +
                       std::to_string(source.size()) + "-line version");
  }
  if (span.length() != edit.before.size() ||
      !std::equal(edit.before.begin(), edit.before.end(),
                  source.lines().begin() + static_cast<std::ptrdiff_t>(span.start))) {
    throw SpanMismatch("lines at [" + std::to_string(span.start) + ", " +
                       std::to_string(span.end) + ") do not match edit.before");
  }
}

}  // namespace

Version apply_edit(const Edit& edit, const Version& source) {
  check_span(edit, source);
  const auto& src = source.lines();
  Lines out;
  out.reserve(src.size() - edit.before.size() + edit.after.size());
  const auto start = src.begin() + static_cast<std::ptrdiff_t>(edit.span.start);
  const auto end = src.begin() + static_cast<std::ptrdiff_t>(edit.span.end);
  out.insert(out.end(), src.begin(), start);
  out.insert(out.end(), edit.after.begin(), edit.after.end());
  out.insert(out.end(), end, src.end());
  return source.with_lines(std::move(out));
}

Version apply_edits(std::span<const Edit> edits, const Version& source) {
  std::vector<const Edit*> order;
  order.reserve(edits.size());
  for (const Edit& e : edits) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const Edit* a, const Edit* b) {
    return a->span.start > b->span.start;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->span.end > order[i - 1]->span.start) {
      throw SpanMismatch("overlapping edits cannot be applied together");
    }
  }
  Version v = source;
  for (const Edit* e : order) v = apply_edit(*e, v);
  return v;
}

Version edited_region(const Edit& edit, const Version& source) {
  check_span(edit, source);
  Lines window;
  window.reserve(edit.prefix.size() + edit.after.size() + edit.suffix.size());
  window.insert(window.end(), edit.prefix.begin(), edit.prefix.end());
  window.insert(window.end(), edit.after.begin(), edit.after.end());
  window.insert(window.end(), edit.suffix.begin(), edit.suffix.end());
  return Version(std::move(window), source.newline_style(), true);
}

}  // namespace grace
