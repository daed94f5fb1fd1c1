#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace grace {

struct ProcessResult {
  int exit_code = -1;  // 128 + signal number when killed by a signal
  std::string out;
  std::string err;
};

// Runs argv[0] (PATH lookup) with `input` on stdin and captures both output
// streams. Exit code 127 means the program could not be executed.
ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input = {});

// `/bin/sh -c command`.
ProcessResult run_shell(const std::string& command, std::string_view input = {});

}  // namespace grace
