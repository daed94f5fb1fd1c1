#pragma once

#include <string>
#include <string_view>

#include "grace/edit_model.h"

namespace grace {

// Each maximal run of space, tab, CR or LF becomes one space; leading and
// trailing whitespace is removed.
std::string normalize_ws(std::string_view text);

std::string join_lines(const Lines& lines, std::string_view sep = "\n");

}  // namespace grace
