#pragma once

// Prompt construction for infilling backends.
//
// Tag-style layout (one tag per line, block contents verbatim, LF endings):
//
//   <CurrentEdit>
//   <Prefix>
//   ...
//   </Prefix>
//   <Before> ... </Before>        (same shape)
//   <After>                       <- InsertionPrompt::prompt ends here
//   </After>                      <- InsertionPrompt::suffix starts here
//   <Suffix> ... </Suffix>
//   </CurrentEdit>
//   <CtxEdits>
//   <Edit>
//   (Prefix/Before/After/Suffix blocks)
//   </Edit>
//   ...
//   </CtxEdits>
//
// When the token budget is exceeded, context edits are dropped whole from
// the tail first; only then are current-edit prefix/suffix lines trimmed,
// farthest from the Before span first.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grace/edit_model.h"

namespace grace {

class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string id() const = 0;
};

// tokenize() tokens of every line plus one per '\n'.
class DefaultTokenCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "default"; }
};

// Runs a shell command with the text on stdin and reads one integer from
// stdout. Throws CounterUnavailable if the command cannot run or answers
// with anything but a non-negative integer.
class CommandTokenCounter final : public TokenCounter {
 public:
  explicit CommandTokenCounter(std::string command) : command_(std::move(command)) {}
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "cmd:" + command_; }

 private:
  std::string command_;
};

// "default" or "cmd:<shell command>".
std::shared_ptr<const TokenCounter> make_token_counter(std::string_view id);

std::size_t count_tokens(std::string_view text, const TokenCounter& counter);
std::size_t count_tokens(std::string_view text);

struct TokenBudget {
  std::size_t max_tokens = 1024;
  std::shared_ptr<const TokenCounter> counter;  // null -> DefaultTokenCounter

  const TokenCounter& counter_or_default() const;
};

struct InsertionPrompt {
  std::string prompt;
  std::string suffix;

  std::string full(std::string_view hole = {}) const { return prompt + std::string(hole) + suffix; }

  friend bool operator==(const InsertionPrompt&, const InsertionPrompt&) = default;
};

enum class PromptStyle { kTag, kNoEdit, kComment };
std::string_view to_string(PromptStyle style);
std::optional<PromptStyle> parse_prompt_style(std::string_view s);

// Text that fills the current edit's After block: each line plus '\n'.
std::string serialize_hole(const Lines& after);

InsertionPrompt build_tag_prompt(const Example& ex, const TokenBudget& budget = {});
InsertionPrompt build_no_edit_prompt(const Example& ex, const TokenBudget& budget = {});

// Comment-delimited stanzas for each context edit, then the target stanza,
// ending right after the final "new version" comment line.
std::string build_comment_prompt(const Example& ex, const TokenBudget& budget = {});

inline constexpr std::string_view kOutdatedComment = "// The following piece of code is outdated.";
inline constexpr std::string_view kNewVersionComment = "// Here is the new version of the code.";

struct CommentSplit {
  std::string context;      // text up to and including the final new-version line
  std::size_t hole_offset;  // == context.size()
};
// Locates the hole of a comment-style prompt. nullopt if no marker exists.
std::optional<CommentSplit> split_comment_prompt(std::string_view text);

inline constexpr std::string_view kDefaultSentinel = "<extra_id_0>";

struct FinetuneOptions {
  PromptStyle style = PromptStyle::kTag;  // kTag or kNoEdit
  std::string sentinel{kDefaultSentinel};
  std::optional<TokenBudget> budget;  // nullopt: no truncation
};

struct FinetuneRecord {
  std::string input;   // prompt with the current After content replaced by the sentinel
  std::string target;  // the masked span

  friend bool operator==(const FinetuneRecord&, const FinetuneRecord&) = default;
};

// Throws SentinelCollision if the sentinel already occurs in the prompt text.
FinetuneRecord build_finetune_record(const Example& ex, const FinetuneOptions& opts = {});

// The fourteen single-edit markers, the singular <CtxEdit> pair included,
// plus the <CtxEdits> wrapper pair the builders emit.
const std::vector<std::string>& special_tokens();

inline constexpr std::string_view kStopMarker = "</After>";

// Cuts at the first stop marker, drops one leading and one trailing newline
// and splits into lines. Inverse of `completion_text`.
Lines parse_completion(std::string_view raw, std::string_view stop = kStopMarker);

// "\n" + serialize_hole(after): a completion that opens on a fresh line.
std::string completion_text(const Lines& after);

// Structure recovered from a prompt; After of the current edit is whatever
// sat in the hole (empty for an InsertionPrompt joined without a hole).
struct ParsedPrompt {
  Edit current;
  std::vector<Edit> ctx_edits;
};

std::optional<ParsedPrompt> parse_tag_prompt(std::string_view text);
std::optional<ParsedPrompt> parse_comment_prompt(std::string_view text);

}  // namespace grace
