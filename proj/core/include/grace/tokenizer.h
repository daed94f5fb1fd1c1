#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "grace/edit_model.h"

namespace grace {

enum class TokenClass { kIdentifier, kNumber, kPunct };

// A lexical token plus the whitespace that preceded it on the line.
struct Token {
  std::string text;
  TokenClass cls = TokenClass::kPunct;
  std::string leading_ws;
};

// Splits at whitespace and at word/non-word transitions. Word characters are
// ASCII alphanumerics, '_' and any byte >= 0x80 (so UTF-8 identifiers stay
// whole); every other non-space byte is a one-character token.
std::vector<std::string> tokenize(std::string_view line);

// Same split, keeping classes and separators. Joining
// leading_ws + text over all tokens, then appending `trailing_ws`, gives
// back the input exactly.
std::vector<Token> tokenize_detailed(std::string_view line, std::string* trailing_ws = nullptr);

// Concatenated token sequence of several lines.
std::vector<std::string> tokenize_lines(const Lines& lines);

}  // namespace grace
