#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace grace::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kBackend = 3 };

std::string_view tool_version();

// Runs the tool; args[0] is the program name. Diagnostics go to `err`,
// --help/--version text to `out`; artifacts only to the paths given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grace::cli
