#include "grace/prompting.h"

#include <algorithm>
#include <charconv>
#include <type_traits>

#include "grace/errors.h"
#include "grace/subprocess.h"
#include "grace/tokenizer.h"

namespace grace {

// ---------------------------------------------------------------------------
// Token counting

std::size_t DefaultTokenCounter::count(std::string_view text) const {
  std::size_t n = 0;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const std::size_t nl = text.find('\n', begin);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    n += tokenize(text.substr(begin, end - begin)).size();
    if (nl == std::string_view::npos) break;
    ++n;
    begin = nl + 1;
  }
  return n;
}

std::size_t CommandTokenCounter::count(std::string_view text) const {
  ProcessResult r;
  try {
    r = run_shell(command_, text);
  } catch (const Error& e) {
    throw CounterUnavailable("token counter '" + command_ + "': " + e.what());
  }
  if (r.exit_code != 0) {
    throw CounterUnavailable("token counter '" + command_ + "' exited with status " +
                             std::to_string(r.exit_code));
  }
  std::string_view out = r.out;
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r' || out.back() == ' '))
    out.remove_suffix(1);
  while (!out.empty() && out.front() == ' ') out.remove_prefix(1);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(out.data(), out.data() + out.size(), value);
  if (out.empty() || ec != std::errc() || ptr != out.data() + out.size()) {
    throw CounterUnavailable("token counter '" + command_ + "' did not print an integer");
  }
  return value;
}

std::shared_ptr<const TokenCounter> make_token_counter(std::string_view id) {
  if (id.empty() || id == "default") return std::make_shared<DefaultTokenCounter>();
  constexpr std::string_view kCmd = "cmd:";
  if (id.substr(0, kCmd.size()) == kCmd && id.size() > kCmd.size()) {
    return std::make_shared<CommandTokenCounter>(std::string(id.substr(kCmd.size())));
  }
  throw CounterUnavailable("unknown token counter: " + std::string(id));
}

std::size_t count_tokens(std::string_view text, const TokenCounter& counter) {
  return counter.count(text);
}

std::size_t count_tokens(std::string_view text) { return DefaultTokenCounter{}.count(text); }

const TokenCounter& TokenBudget::counter_or_default() const {
  static const DefaultTokenCounter kDefault;
  return counter ? *counter : kDefault;
}

std::string_view to_string(PromptStyle style) {
  switch (style) {
    case PromptStyle::kTag:
      return "tag";
    case PromptStyle::kNoEdit:
      return "no-edit";
    case PromptStyle::kComment:
      break;
  }
  return "comment";
}

std::optional<PromptStyle> parse_prompt_style(std::string_view s) {
  if (s == "tag") return PromptStyle::kTag;
  if (s == "no-edit") return PromptStyle::kNoEdit;
  if (s == "comment") return PromptStyle::kComment;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put(std::string& out, std::string_view line) {
  out += line;
  out += '\n';
}

void put_block(std::string& out, std::string_view tag, const Lines& lines) {
  out += '<';
  out += tag;
  out += ">\n";
  for (const auto& l : lines) put(out, l);
  out += "</";
  out += tag;
  out += ">\n";
}

void put_edit_body(std::string& out, const Edit& e) {
  put_block(out, "Prefix", e.prefix);
  put_block(out, "Before", e.before);
  put_block(out, "After", e.after);
  put_block(out, "Suffix", e.suffix);
}

InsertionPrompt render_tag(const Edit& current, std::span<const Edit> ctx, bool with_ctx) {
  InsertionPrompt p;
  put(p.prompt, "<CurrentEdit>");
  put_block(p.prompt, "Prefix", current.prefix);
  put_block(p.prompt, "Before", current.before);
  put(p.prompt, "<After>");
  put(p.suffix, "</After>");
  put_block(p.suffix, "Suffix", current.suffix);
  put(p.suffix, "</CurrentEdit>");
  if (with_ctx) {
    put(p.suffix, "<CtxEdits>");
    for (const Edit& e : ctx) {
      put(p.suffix, "<Edit>");
      put_edit_body(p.suffix, e);
      put(p.suffix, "</Edit>");
    }
    put(p.suffix, "</CtxEdits>");
  }
  return p;
}

std::string render_comment(const Edit& current, std::span<const Edit> ctx) {
  std::string out;
  auto stanza = [&](const Lines& before) {
    put(out, kOutdatedComment);
    std::string body = "/* ";
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (i) body += '\n';
      body += before[i];
    }
    body += " */";
    put(out, body);
    put(out, kNewVersionComment);
  };
  for (const Edit& e : ctx) {
    stanza(e.before);
    for (const auto& l : e.after) put(out, l);
  }
  stanza(current.before);
  return out;
}

// Drops context edits tail-first, then trims the current edit's prefix and
// suffix farthest-line-first, until `render` fits the budget.
template <typename Render>
auto fit_to_budget(const Example& ex, const TokenBudget& budget, bool trim_context_lines,
                   Render render) {
  const TokenCounter& counter = budget.counter_or_default();
  auto cost = [&](const auto& rendered) {
    if constexpr (std::is_same_v<std::decay_t<decltype(rendered)>, InsertionPrompt>) {
      return counter.count(rendered.prompt + rendered.suffix);
    } else {
      return counter.count(rendered);
    }
  };
  Edit current = ex.current;
  std::span<const Edit> ctx(ex.ctx_edits);
  std::size_t keep = ctx.size();
  auto rendered = render(current, ctx.first(keep));
  while (cost(rendered) > budget.max_tokens && keep > 0) {
    --keep;
    rendered = render(current, ctx.first(keep));
  }
  while (cost(rendered) > budget.max_tokens) {
    if (!trim_context_lines || (current.prefix.empty() && current.suffix.empty())) {
      throw BudgetImpossible("current edit alone needs more than " +
                             std::to_string(budget.max_tokens) + " tokens");
    }
    // Prefix line i sits prefix.size() - i lines above Before; suffix line j
    // sits j + 1 lines below.
    if (current.prefix.size() >= current.suffix.size() && !current.prefix.empty()) {
      current.prefix.erase(current.prefix.begin());
    } else {
      current.suffix.pop_back();
    }
    rendered = render(current, ctx.first(0));
  }
  return rendered;
}

}  // namespace

std::string serialize_hole(const Lines& after) {
  std::string out;
  for (const auto& l : after) put(out, l);
  return out;
}

InsertionPrompt build_tag_prompt(const Example& ex, const TokenBudget& budget) {
  return fit_to_budget(ex, budget, true, [](const Edit& cur, std::span<const Edit> ctx) {
    return render_tag(cur, ctx, true);
  });
}

InsertionPrompt build_no_edit_prompt(const Example& ex, const TokenBudget& budget) {
  Example bare = ex;
  bare.ctx_edits.clear();
  return fit_to_budget(bare, budget, true, [](const Edit& cur, std::span<const Edit>) {
    return render_tag(cur, {}, false);
  });
}

std::string build_comment_prompt(const Example& ex, const TokenBudget& budget) {
  return fit_to_budget(ex, budget, false, [](const Edit& cur, std::span<const Edit> ctx) {
    return render_comment(cur, ctx);
  });
}

std::optional<CommentSplit> split_comment_prompt(std::string_view text) {
  const std::string marker = std::string(kNewVersionComment) + "\n";
  const std::size_t pos = text.rfind(marker);
  if (pos == std::string_view::npos || (pos > 0 && text[pos - 1] != '\n')) return std::nullopt;
  const std::size_t offset = pos + marker.size();
  return CommentSplit{std::string(text.substr(0, offset)), offset};
}

FinetuneRecord build_finetune_record(const Example& ex, const FinetuneOptions& opts) {
  const TokenBudget unbounded{static_cast<std::size_t>(-1), nullptr};
  const TokenBudget& budget = opts.budget ? *opts.budget : unbounded;
  const InsertionPrompt p = opts.style == PromptStyle::kNoEdit ? build_no_edit_prompt(ex, budget)
                                                               : build_tag_prompt(ex, budget);
  FinetuneRecord r{p.prompt + opts.sentinel + p.suffix, serialize_hole(ex.current.after)};
  // Exactly one occurrence, including none straddling the joins.
  const std::size_t first = opts.sentinel.empty() ? std::string::npos : r.input.find(opts.sentinel);
  if (first == std::string::npos || r.input.find(opts.sentinel, first + 1) != std::string::npos) {
    throw SentinelCollision("sentinel '" + opts.sentinel + "' is not unique in example " + ex.id);
  }
  return r;
}

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> kTokens = {
      "<Prefix>", "</Prefix>", "<Suffix>",   "</Suffix>", "<CurrentEdit>", "</CurrentEdit>",
      "<CtxEdit>", "</CtxEdit>", "<Edit>",   "</Edit>",   "<After>",       "</After>",
      "<Before>",  "</Before>",  "<CtxEdits>", "</CtxEdits>"};
  return kTokens;
}

// ---------------------------------------------------------------------------
// Completions

Lines parse_completion(std::string_view raw, std::string_view stop) {
  std::string_view text = raw.substr(0, stop.empty() ? raw.size() : raw.find(stop));
  if (!text.empty() && text.front() == '\n') text.remove_prefix(1);
  Lines lines;
  if (text.empty()) return lines;
  std::size_t begin = 0;
  while (true) {
    const std::size_t nl = text.find('\n', begin);
    if (nl == std::string_view::npos) {
      if (begin < text.size()) lines.emplace_back(text.substr(begin));
      break;
    }
    lines.emplace_back(text.substr(begin, nl - begin));
    begin = nl + 1;
  }
  return lines;
}

std::string completion_text(const Lines& after) { return "\n" + serialize_hole(after); }

// ---------------------------------------------------------------------------
// Parsing prompts back into edits

namespace {

Lines split_lines(std::string_view text) {
  Lines out;
  std::size_t begin = 0;
  while (begin < text.size()) {
    const std::size_t nl = text.find('\n', begin);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(begin));
      break;
    }
    out.emplace_back(text.substr(begin, nl - begin));
    begin = nl + 1;
  }
  return out;
}

class TagReader {
 public:
  explicit TagReader(Lines lines) : lines_(std::move(lines)) {}

  bool at_end() const { return pos_ >= lines_.size(); }
  const std::string* peek() const { return at_end() ? nullptr : &lines_[pos_]; }
  bool accept(std::string_view line) {
    if (at_end() || lines_[pos_] != line) return false;
    ++pos_;
    return true;
  }

  // Reads Prefix/Before/After/Suffix blocks until `close`.
  bool read_edit(std::string_view close, Edit& e) {
    while (!at_end()) {
      if (accept(close)) return true;
      const std::string& open = lines_[pos_];
      Lines* dst = open == "<Prefix>"   ? &e.prefix
                   : open == "<Before>" ? &e.before
                   : open == "<After>"  ? &e.after
                   : open == "<Suffix>" ? &e.suffix
                                        : nullptr;
      if (!dst) return false;
      const std::string end_tag = "</" + open.substr(1);
      ++pos_;
      while (!at_end() && lines_[pos_] != end_tag) dst->push_back(lines_[pos_++]);
      if (!accept(end_tag)) return false;
    }
    return false;
  }

 private:
  Lines lines_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<ParsedPrompt> parse_tag_prompt(std::string_view text) {
  TagReader r(split_lines(text));
  ParsedPrompt out;
  if (!r.accept("<CurrentEdit>") || !r.read_edit("</CurrentEdit>", out.current)) {
    return std::nullopt;
  }
  if (r.accept("<CtxEdits>")) {
    while (!r.accept("</CtxEdits>")) {
      if (!r.accept("<Edit>")) return std::nullopt;
      Edit e;
      if (!r.read_edit("</Edit>", e)) return std::nullopt;
      out.ctx_edits.push_back(std::move(e));
    }
  }
  if (!r.at_end()) return std::nullopt;
  return out;
}

std::optional<ParsedPrompt> parse_comment_prompt(std::string_view text) {
  const Lines lines = split_lines(text);
  std::vector<Edit> stanzas;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (lines[i] != kOutdatedComment) return std::nullopt;
    ++i;
    // "/* " + before lines joined by '\n' + " */"
    std::string body;
    bool closed = false;
    for (bool first = true; i < lines.size(); first = false) {
      if (!first) body += '\n';
      body += lines[i++];
      if (body.size() >= 6 && body.ends_with(" */")) {
        closed = true;
        break;
      }
    }
    if (!closed || !body.starts_with("/* ")) return std::nullopt;
    Edit e;
    const std::string inner = body.substr(3, body.size() - 6);
    if (!inner.empty()) e.before = split_lines(inner + "\n");
    if (i >= lines.size() || lines[i] != kNewVersionComment) return std::nullopt;
    ++i;
    while (i < lines.size() && lines[i] != kOutdatedComment) e.after.push_back(lines[i++]);
    stanzas.push_back(std::move(e));
  }
  if (stanzas.empty()) return std::nullopt;
  ParsedPrompt out;
  out.current = std::move(stanzas.back());
  stanzas.pop_back();
  out.ctx_edits = std::move(stanzas);
  return out;
}

}  // namespace grace
