#include "grace/diffing.h"

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "grace/errors.h"
#include "grace/subprocess.h"
#include "grace/tokenizer.h"

namespace grace {
namespace {

using Ids = std::vector<std::int32_t>;

// Maps lines to dense ids so the inner loop compares integers.
void intern(std::span<const std::string> a, std::span<const std::string> b, Ids& ia, Ids& ib) {
  std::unordered_map<std::string_view, std::int32_t> table;
  table.reserve(a.size() + b.size());
  auto id_of = [&](const std::string& s) {
    auto [it, inserted] = table.try_emplace(s, static_cast<std::int32_t>(table.size()));
    return it->second;
  };
  ia.reserve(a.size());
  ib.reserve(b.size());
  for (const auto& s : a) ia.push_back(id_of(s));
  for (const auto& s : b) ib.push_back(id_of(s));
}

// Greedy forward pass keeping one V snapshot per d (only the 2d+1 live
// diagonals), then backtrack. Returns matched (x, y) pairs in order.
std::vector<std::pair<std::size_t, std::size_t>> snake_matches(const std::int32_t* a,
                                                               std::ptrdiff_t n,
                                                               const std::int32_t* b,
                                                               std::ptrdiff_t m) {
  const std::ptrdiff_t max_d = n + m;
  std::vector<std::vector<std::ptrdiff_t>> trace;
  std::vector<std::ptrdiff_t> v(2 * static_cast<std::size_t>(max_d) + 3, 0);
  const std::ptrdiff_t off = max_d + 1;

  std::ptrdiff_t final_d = 0;
  bool done = false;
  for (std::ptrdiff_t d = 0; d <= max_d && !done; ++d) {
    for (std::ptrdiff_t k = -d; k <= d; k += 2) {
      std::ptrdiff_t x;
      if (k == -d || (k != d && v[off + k - 1] < v[off + k + 1])) {
        x = v[off + k + 1];
      } else {
        x = v[off + k - 1] + 1;
      }
      std::ptrdiff_t y = x - k;
      while (x < n && y < m && a[x] == b[y]) {
        ++x;
        ++y;
      }
      v[off + k] = x;
      if (x >= n && y >= m) {
        final_d = d;
        done = true;
        break;
      }
    }
    trace.emplace_back(v.begin() + (off - d), v.begin() + (off + d + 1));
  }

  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::ptrdiff_t x = n;
  std::ptrdiff_t y = m;
  for (std::ptrdiff_t d = final_d; d > 0; --d) {
    const auto& prev = trace[static_cast<std::size_t>(d - 1)];
    auto at = [&](std::ptrdiff_t k) { return prev[static_cast<std::size_t>(k + d - 1)]; };
    const std::ptrdiff_t k = x - y;
    std::ptrdiff_t prev_k;
    if (k == -d || (k != d && at(k - 1) < at(k + 1))) {
      prev_k = k + 1;
    } else {
      prev_k = k - 1;
    }
    const std::ptrdiff_t prev_x = at(prev_k);
    const std::ptrdiff_t prev_y = prev_x - prev_k;
    // Snake start after the single non-diagonal move.
    const std::ptrdiff_t sx = prev_k == k + 1 ? prev_x : prev_x + 1;
    const std::ptrdiff_t sy = sx - k;
    while (x > sx && y > sy) {
      --x;
      --y;
      matches.emplace_back(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    }
    x = prev_x;
    y = prev_y;
  }
  while (x > 0 && y > 0) {
    --x;
    --y;
    matches.emplace_back(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  }
  std::reverse(matches.begin(), matches.end());
  return matches;
}

}  // namespace

std::vector<Hunk> myers_diff(std::span<const std::string> a, std::span<const std::string> b) {
  std::size_t head = 0;
  while (head < a.size() && head < b.size() && a[head] == b[head]) ++head;
  std::size_t tail = 0;
  while (tail < a.size() - head && tail < b.size() - head &&
         a[a.size() - 1 - tail] == b[b.size() - 1 - tail]) {
    ++tail;
  }
  const std::size_t n = a.size() - head - tail;
  const std::size_t m = b.size() - head - tail;

  std::vector<Hunk> hunks;
  if (n == 0 && m == 0) return hunks;
  if (n == 0 || m == 0) {
    hunks.push_back({head, head + n, head, head + m});
    return hunks;
  }

  Ids ia;
  Ids ib;
  intern(a.subspan(head, n), b.subspan(head, m), ia, ib);
  const auto matches = snake_matches(ia.data(), static_cast<std::ptrdiff_t>(n), ib.data(),
                                     static_cast<std::ptrdiff_t>(m));

  std::size_t x = 0;
  std::size_t y = 0;
  auto flush = [&](std::size_t mx, std::size_t my) {
    if (mx > x || my > y) hunks.push_back({head + x, head + mx, head + y, head + my});
    x = mx + 1;
    y = my + 1;
  };
  for (const auto& [mx, my] : matches) flush(mx, my);
  if (n > x || m > y) hunks.push_back({head + x, head + n, head + y, head + m});
  return hunks;
}

std::vector<Hunk> merge_hunks(std::span<const Hunk> hunks, std::size_t merge_gap) {
  std::vector<Hunk> merged;
  for (const Hunk& h : hunks) {
    if (!merged.empty() && h.a_start - merged.back().a_end <= merge_gap) {
      merged.back().a_end = h.a_end;
      merged.back().b_end = h.b_end;
    } else {
      merged.push_back(h);
    }
  }
  return merged;
}

Edit partition_hunk(const Version& a, LineSpan hunk_span, Lines after_lines,
                    const GranularityConfig& cfg) {
  const auto& lines = a.lines();
  const std::size_t pre_begin =
      hunk_span.start > cfg.context_lines ? hunk_span.start - cfg.context_lines : 0;
  const std::size_t suf_end = std::min(lines.size(), hunk_span.end + cfg.context_lines);
  auto slice = [&](std::size_t from, std::size_t to) {
    return Lines(lines.begin() + static_cast<std::ptrdiff_t>(from),
                 lines.begin() + static_cast<std::ptrdiff_t>(to));
  };
  Edit e;
  e.prefix = slice(pre_begin, hunk_span.start);
  e.before = slice(hunk_span.start, hunk_span.end);
  e.after = std::move(after_lines);
  e.suffix = slice(hunk_span.end, suf_end);
  e.span = hunk_span;
  return e;
}

std::vector<Edit> diff_versions(const Version& a, const Version& b,
                                const GranularityConfig& cfg) {
  const auto hunks = merge_hunks(myers_diff(a.lines(), b.lines()), cfg.merge_gap);
  std::vector<Edit> edits;
  edits.reserve(hunks.size());
  for (const Hunk& h : hunks) {
    Lines after(b.lines().begin() + static_cast<std::ptrdiff_t>(h.b_start),
                b.lines().begin() + static_cast<std::ptrdiff_t>(h.b_end));
    Edit e = partition_hunk(a, {h.a_start, h.a_end}, std::move(after), cfg);
    e.provenance.order_index = static_cast<std::int64_t>(edits.size());
    edits.push_back(std::move(e));
  }
  return edits;
}

std::string_view to_string(SimpleKind kind) {
  switch (kind) {
    case SimpleKind::kPureDeletion:
      return "pure_deletion";
    case SimpleKind::kPureInsertion:
      return "pure_insertion";
    case SimpleKind::kRename:
      return "rename";
    case SimpleKind::kNotSimple:
      break;
  }
  return "not_simple";
}

namespace {

bool is_single_rename(const Lines& before, const Lines& after) {
  if (before.size() != after.size()) return false;
  const std::string* from = nullptr;
  const std::string* to = nullptr;
  std::unordered_set<std::string> before_tokens;
  std::vector<std::vector<Token>> bt(before.size());
  std::vector<std::vector<Token>> at(after.size());

  for (std::size_t i = 0; i < before.size(); ++i) {
    std::string btrail;
    std::string atrail;
    bt[i] = tokenize_detailed(before[i], &btrail);
    at[i] = tokenize_detailed(after[i], &atrail);
    if (bt[i].size() != at[i].size() || btrail != atrail) return false;
    for (std::size_t j = 0; j < bt[i].size(); ++j) {
      const Token& x = bt[i][j];
      const Token& y = at[i][j];
      before_tokens.insert(x.text);
      if (x.leading_ws != y.leading_ws) return false;
      if (x.text == y.text) continue;
      if (x.cls != TokenClass::kIdentifier || y.cls != TokenClass::kIdentifier) return false;
      if (!from) {
        from = &x.text;
        to = &y.text;
      } else if (*from != x.text || *to != y.text) {
        return false;
      }
    }
  }
  if (!from) return false;
  // Consistent: no occurrence of `from` survives. Bijective: `to` is new.
  for (std::size_t i = 0; i < bt.size(); ++i) {
    for (std::size_t j = 0; j < bt[i].size(); ++j) {
      if (bt[i][j].text == *from && at[i][j].text == *from) return false;
    }
  }
  return !before_tokens.contains(*to);
}

}  // namespace

SimpleKind classify_simple(const Edit& e) {
  if (e.after.empty() && !e.before.empty()) return SimpleKind::kPureDeletion;
  if (e.before.empty() && !e.after.empty()) return SimpleKind::kPureInsertion;
  if (is_single_rename(e.before, e.after)) return SimpleKind::kRename;
  return SimpleKind::kNotSimple;
}

bool has_alien_insertion(const Edit& target, std::span<const Edit> ctx) {
  std::unordered_set<std::string> known;
  auto add = [&](const Lines& lines) {
    for (auto& t : tokenize_lines(lines)) known.insert(std::move(t));
  };
  add(target.prefix);
  add(target.before);
  add(target.suffix);
  for (const Edit& e : ctx) {
    add(e.prefix);
    add(e.before);
    add(e.after);
    add(e.suffix);
  }
  for (const auto& line : target.after) {
    for (const auto& t : tokenize(line)) {
      if (!known.contains(t)) return true;
    }
  }
  return false;
}

bool balanced_delimiters(const Lines& lines) {
  std::vector<char> stack;
  bool in_block_comment = false;
  for (const auto& line : lines) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      const char next = i + 1 < line.size() ? line[i + 1] : '\0';
      if (in_block_comment) {
        if (c == '*' && next == '/') {
          in_block_comment = false;
          ++i;
        }
        continue;
      }
      if (quote) {
        if (c == '\\') {
          ++i;
        } else if (c == quote) {
          quote = 0;
        }
        continue;
      }
      if (c == '/' && next == '/') break;
      if (c == '/' && next == '*') {
        in_block_comment = true;
        ++i;
        continue;
      }
      switch (c) {
        case '"':
        case '\'':
          quote = c;
          break;
        case '(':
        case '[':
        case '{':
          stack.push_back(c);
          break;
        case ')':
        case ']':
        case '}': {
          const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
          if (stack.empty() || stack.back() != open) return false;
          stack.pop_back();
          break;
        }
        default:
          break;
      }
    }
    // String literals do not span lines.
  }
  return stack.empty() && !in_block_comment;
}

bool passes_parse_check(std::string_view hook, const Lines& lines) {
  if (hook.empty() || hook == kBalancedDelimiters) return balanced_delimiters(lines);
  constexpr std::string_view kCmd = "cmd:";
  if (hook.substr(0, kCmd.size()) == kCmd) {
    std::string text;
    for (const auto& l : lines) {
      text += l;
      text += '\n';
    }
    const auto result = run_shell(std::string(hook.substr(kCmd.size())), text);
    return result.exit_code == 0;
  }
  throw DataError("unknown parse_check hook: " + std::string(hook));
}

}  // namespace grace
