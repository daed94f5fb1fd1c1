#pragma once

// Version-pair mining from a git repository (via the git executable) or from
// a directory of unified-diff patch files.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grace/dataset.h"
#include "grace/edit_model.h"

namespace grace {

struct MineOptions {
  std::string file_glob{"*"};  // fnmatch pattern on the repository-relative path
  std::optional<std::string> repo_id;  // defaults to the directory name
  std::size_t jobs = 1;
};

// Walks first-parent history oldest-first. Every revision that modifies a
// matching file yields one (parent, child) pair; file creations and
// deletions do not. Binary and non-UTF-8 files are skipped with a notice.
// Output is ordered by (timestamp, revision id, path).
// Throws VcsUnavailable when git cannot be run or the path is not a repository.
std::vector<VersionPair> mine_git(const std::filesystem::path& repo, const MineOptions& opts = {});

// One unified diff, possibly touching several files.
struct FilePatch {
  std::string old_path;  // "/dev/null" for a creation
  std::string new_path;  // "/dev/null" for a deletion
  struct Hunk {
    std::size_t old_start = 0;  // 1-based, as written
    std::size_t old_count = 0;
    std::size_t new_start = 0;
    std::size_t new_count = 0;
    std::vector<std::string> lines;  // with their ' ', '-', '+' markers
    bool old_no_newline = false;     // "\ No newline at end of file" after the old side
    bool new_no_newline = false;
    std::size_t source_line = 0;     // header line in the patch file
  };
  std::vector<Hunk> hunks;
};

// Throws PatchParseError(file, line, ...).
std::vector<FilePatch> parse_unified_diff(std::string_view text, const std::string& file_name);

// Applies one file patch to the raw bytes of the old file.
// Throws PatchParseError when a hunk does not match.
std::string apply_file_patch(std::string_view old_bytes, const FilePatch& patch,
                             const std::string& file_name);

// Replays *.patch / *.diff files from `dir` in name order. Starting contents
// come from `dir/base/` when present; files created by a patch start empty.
// The revision id of a pair is the patch file stem and its timestamp is
// unset; order follows the series.
std::vector<VersionPair> mine_patch_series(const std::filesystem::path& dir,
                                           const MineOptions& opts = {});

// Dispatches on whether `path` is a git work tree or a patch directory.
std::vector<VersionPair> mine_revisions(const std::filesystem::path& path,
                                        const MineOptions& opts = {});

bool is_valid_utf8(std::string_view bytes);

}  // namespace grace
