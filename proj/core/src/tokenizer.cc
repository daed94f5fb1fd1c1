#include "grace/tokenizer.h"

namespace grace {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

bool is_word(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c == '_' || c >= 0x80;
}

}  // namespace

std::vector<Token> tokenize_detailed(std::string_view line, std::string* trailing_ws) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  std::string ws;
  while (i < line.size()) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (is_space(c)) {
      ws.push_back(line[i++]);
      continue;
    }
    Token tok;
    tok.leading_ws = std::move(ws);
    ws.clear();
    if (is_word(c)) {
      const std::size_t begin = i;
      while (i < line.size() && is_word(static_cast<unsigned char>(line[i]))) ++i;
      tok.text.assign(line.substr(begin, i - begin));
      tok.cls = (c >= '0' && c <= '9') ? TokenClass::kNumber : TokenClass::kIdentifier;
    } else {
      tok.text.assign(1, line[i++]);
      tok.cls = TokenClass::kPunct;
    }
    tokens.push_back(std::move(tok));
  }
  if (trailing_ws) *trailing_ws = std::move(ws);
  return tokens;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  for (auto& t : tokenize_detailed(line)) out.push_back(std::move(t.text));
  return out;
}

std::vector<std::string> tokenize_lines(const Lines& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    auto toks = tokenize(l);
    out.insert(out.end(), std::make_move_iterator(toks.begin()),
               std::make_move_iterator(toks.end()));
  }
  return out;
}

}  // namespace grace
