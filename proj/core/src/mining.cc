#include "grace/mining.h"

#include <fnmatch.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "grace/errors.h"
#include "grace/subprocess.h"

namespace grace {

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2, cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3, cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4, cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out of range.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += len;
  }
  return true;
}

namespace {

bool glob_match(const std::string& pattern, const std::string& path) {
  return ::fnmatch(pattern.c_str(), path.c_str(), 0) == 0;
}

// Reason a file cannot be mined as text, if any.
std::optional<std::string> unusable(std::string_view bytes) {
  if (bytes.find('\0') != std::string_view::npos) return "binary";
  if (!is_valid_utf8(bytes)) return "not UTF-8";
  return std::nullopt;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string repo_name(const std::filesystem::path& path, const MineOptions& opts) {
  if (opts.repo_id) return *opts.repo_id;
  std::error_code ec;
  auto canonical = std::filesystem::weakly_canonical(path, ec);
  if (ec) canonical = path;
  std::string name = canonical.filename().string();
  if (name.empty()) name = canonical.parent_path().filename().string();
  return name;
}

ProcessResult git(const std::filesystem::path& repo, std::vector<std::string> args) {
  std::vector<std::string> argv{"git", "-C", repo.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_process(argv);
}

struct Commit {
  std::string id;
  std::string parent;  // first parent, empty for a root
  std::int64_t timestamp = 0;
};

struct Touch {
  std::size_t commit;  // index into the commit list
  std::string path;
};

}  // namespace

std::vector<VersionPair> mine_git(const std::filesystem::path& repo, const MineOptions& opts) {
  ProcessResult probe;
  try {
    probe = run_process({"git", "--version"});
  } catch (const DataError& e) {
    throw VcsUnavailable(std::string("cannot run git: ") + e.what());
  }
  if (probe.exit_code != 0) throw VcsUnavailable("git executable not found");
  if (git(repo, {"rev-parse", "--git-dir"}).exit_code != 0) {
    throw VcsUnavailable(repo.string() + " is not a git repository");
  }
  const ProcessResult log =
      git(repo, {"log", "--first-parent", "--reverse", "--format=%H%x09%P%x09%ct"});
  if (log.exit_code != 0) throw VcsUnavailable("git log failed: " + log.err);

  std::vector<Commit> commits;
  std::istringstream lines(log.out);
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) continue;
    Commit c;
    c.id = line.substr(0, t1);
    const std::string parents = line.substr(t1 + 1, t2 - t1 - 1);
    c.parent = parents.substr(0, parents.find(' '));
    const std::string ts = line.substr(t2 + 1);
    std::from_chars(ts.data(), ts.data() + ts.size(), c.timestamp);
    commits.push_back(std::move(c));
  }

  std::vector<Touch> touches;
  for (std::size_t ci = 0; ci < commits.size(); ++ci) {
    const Commit& c = commits[ci];
    if (c.parent.empty()) continue;  // a root only creates files
    const ProcessResult diff = git(
        repo, {"diff-tree", "-r", "-z", "--no-renames", "--name-status", c.parent, c.id});
    if (diff.exit_code != 0) throw VcsUnavailable("git diff-tree failed: " + diff.err);
    std::vector<std::string> fields;
    for (std::size_t pos = 0; pos < diff.out.size();) {
      const std::size_t nul = diff.out.find('\0', pos);
      fields.push_back(diff.out.substr(pos, nul == std::string::npos ? nul : nul - pos));
      if (nul == std::string::npos) break;
      pos = nul + 1;
    }
    for (std::size_t i = 0; i + 1 < fields.size(); i += 2) {
      if (fields[i] != "M") continue;
      if (!glob_match(opts.file_glob, fields[i + 1])) continue;
      touches.push_back({ci, fields[i + 1]});
    }
  }

  const std::string repo_id = repo_name(repo, opts);
  std::vector<std::optional<VersionPair>> mined(touches.size());
  parallel_for(touches.size(), opts.jobs, [&](std::size_t i) {
    const Touch& t = touches[i];
    const Commit& c = commits[t.commit];
    const ProcessResult old_blob = git(repo, {"cat-file", "blob", c.parent + ":" + t.path});
    const ProcessResult new_blob = git(repo, {"cat-file", "blob", c.id + ":" + t.path});
    if (old_blob.exit_code != 0 || new_blob.exit_code != 0) {
      throw VcsUnavailable("git cat-file failed for " + t.path + " at " + c.id);
    }
    for (const std::string* bytes : {&old_blob.out, &new_blob.out}) {
      if (auto why = unusable(*bytes)) {
        spdlog::info("skipping {} file {} at {}", *why, t.path, c.id.substr(0, 12));
        return;
      }
    }
    VersionPair pair;
    pair.parent = Version::deserialize(old_blob.out);
    pair.child = Version::deserialize(new_blob.out);
    pair.provenance.repo_id = repo_id;
    pair.provenance.file_path = t.path;
    pair.provenance.revision_id = c.id;
    pair.provenance.timestamp = c.timestamp;
    mined[i] = std::move(pair);
  });

  std::vector<VersionPair> out;
  std::map<std::string, std::int64_t> lineage;
  for (auto& m : mined) {
    if (!m) continue;
    m->provenance.order_index = lineage[m->provenance.file_path]++;
    out.push_back(*std::move(m));
  }
  std::stable_sort(out.begin(), out.end(), [](const VersionPair& a, const VersionPair& b) {
    const auto& pa = a.provenance;
    const auto& pb = b.provenance;
    return std::tie(pa.timestamp, pa.revision_id, pa.file_path) <
           std::tie(pb.timestamp, pb.revision_id, pb.file_path);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Unified diffs

namespace {

std::vector<std::string_view> split_keep_cr(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::string header_path(std::string_view line) {
  std::string_view p = line.substr(4);
  if (auto tab = p.find('\t'); tab != std::string_view::npos) p = p.substr(0, tab);
  while (!p.empty() && (p.back() == '\r' || p.back() == ' ')) p.remove_suffix(1);
  if (p.size() > 1 && p.front() == '"' && p.back() == '"') p = p.substr(1, p.size() - 2);
  return std::string(p);
}

// "-a,b" or "-a" (count 1).
bool parse_range(std::string_view s, std::size_t& start, std::size_t& count) {
  const auto comma = s.find(',');
  const std::string_view a = s.substr(0, comma);
  if (std::from_chars(a.data(), a.data() + a.size(), start).ec != std::errc{}) return false;
  count = 1;
  if (comma == std::string_view::npos) return true;
  const std::string_view b = s.substr(comma + 1);
  const auto r = std::from_chars(b.data(), b.data() + b.size(), count);
  return r.ec == std::errc{} && r.ptr == b.data() + b.size();
}

bool parse_hunk_header(std::string_view line, FilePatch::Hunk& h) {
  // @@ -a,b +c,d @@ optional section
  if (!line.starts_with("@@ -")) return false;
  const auto plus = line.find(" +", 4);
  if (plus == std::string_view::npos) return false;
  const auto close = line.find(" @@", plus + 2);
  if (close == std::string_view::npos) return false;
  return parse_range(line.substr(4, plus - 4), h.old_start, h.old_count) &&
         parse_range(line.substr(plus + 2, close - plus - 2), h.new_start, h.new_count);
}

std::string strip_prefix_dir(const std::string& p) {
  if (p == "/dev/null") return p;
  if (p.starts_with("a/") || p.starts_with("b/")) return p.substr(2);
  return p;
}

}  // namespace

std::vector<FilePatch> parse_unified_diff(std::string_view text, const std::string& file_name) {
  const auto lines = split_keep_cr(text);
  std::vector<FilePatch> patches;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.starts_with("--- ") && i + 1 < lines.size() && lines[i + 1].starts_with("+++ ")) {
      FilePatch fp;
      fp.old_path = header_path(line);
      fp.new_path = header_path(lines[i + 1]);
      patches.push_back(std::move(fp));
      ++i;
      continue;
    }
    if (!line.starts_with("@@")) continue;
    if (patches.empty()) throw PatchParseError(file_name, i + 1, "hunk before any file header");
    FilePatch::Hunk h;
    h.source_line = i + 1;
    if (!parse_hunk_header(line, h)) throw PatchParseError(file_name, i + 1, "bad hunk header");
    std::size_t old_seen = 0;
    std::size_t new_seen = 0;
    char last = 0;
    while (old_seen < h.old_count || new_seen < h.new_count ||
           (i + 1 < lines.size() && lines[i + 1].starts_with("\\"))) {
      if (++i >= lines.size()) {
        throw PatchParseError(file_name, h.source_line, "hunk ends before its line counts");
      }
      std::string_view body = lines[i];
      if (body.starts_with("\\")) {
        if (last == '-' || last == ' ') h.old_no_newline = true;
        if (last == '+' || last == ' ') h.new_no_newline = true;
        continue;
      }
      char marker = body.empty() ? ' ' : body[0];
      if (marker == ' ') {
        ++old_seen, ++new_seen;
      } else if (marker == '-') {
        ++old_seen;
      } else if (marker == '+') {
        ++new_seen;
      } else {
        throw PatchParseError(file_name, i + 1, "unexpected line inside hunk");
      }
      if (old_seen > h.old_count || new_seen > h.new_count) {
        throw PatchParseError(file_name, i + 1, "hunk longer than its header declares");
      }
      last = marker;
      h.lines.push_back(body.empty() ? std::string(" ") : std::string(body));
    }
    patches.back().hunks.push_back(std::move(h));
  }
  return patches;
}

std::string apply_file_patch(std::string_view old_bytes, const FilePatch& patch,
                             const std::string& file_name) {
  std::vector<std::string_view> old_lines = split_keep_cr(old_bytes);
  bool trailing = !old_bytes.empty() && old_bytes.back() == '\n';

  std::vector<std::string_view> out;
  std::size_t cursor = 0;
  for (const FilePatch::Hunk& h : patch.hunks) {
    std::size_t pos = h.old_count == 0 ? h.old_start : h.old_start - 1;
    if (h.old_count != 0 && h.old_start == 0) {
      throw PatchParseError(file_name, h.source_line, "hunk starts at line 0");
    }
    if (pos < cursor || pos > old_lines.size()) {
      throw PatchParseError(file_name, h.source_line, "hunk out of order or out of range");
    }
    out.insert(out.end(), old_lines.begin() + static_cast<std::ptrdiff_t>(cursor),
               old_lines.begin() + static_cast<std::ptrdiff_t>(pos));
    cursor = pos;
    for (const std::string& l : h.lines) {
      const std::string_view content = std::string_view(l).substr(1);
      if (l[0] == '+') {
        out.push_back(content);
        continue;
      }
      if (cursor >= old_lines.size() || old_lines[cursor] != content) {
        throw PatchParseError(file_name, h.source_line,
                              "hunk does not apply at old line " + std::to_string(cursor + 1));
      }
      if (l[0] == ' ') out.push_back(content);
      ++cursor;
    }
    if (cursor == old_lines.size()) trailing = !h.new_no_newline;
  }
  out.insert(out.end(), old_lines.begin() + static_cast<std::ptrdiff_t>(cursor), old_lines.end());

  std::string result;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) result += '\n';
    result += out[i];
  }
  if (trailing && !out.empty()) result += '\n';
  return result;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<VersionPair> mine_patch_series(const std::filesystem::path& dir,
                                           const MineOptions& opts) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");

  std::map<std::string, std::string> state;
  const fs::path base = dir / "base";
  if (fs::is_directory(base)) {
    for (const auto& entry : fs::recursive_directory_iterator(base)) {
      if (!entry.is_regular_file()) continue;
      state[fs::relative(entry.path(), base).generic_string()] = read_file(entry.path());
    }
  }

  std::vector<fs::path> series;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".patch" || ext == ".diff")) {
      series.push_back(entry.path());
    }
  }
  std::sort(series.begin(), series.end());

  const std::string repo_id = repo_name(dir, opts);
  std::vector<VersionPair> out;
  std::map<std::string, std::int64_t> lineage;
  for (const fs::path& file : series) {
    const std::string name = file.filename().string();
    for (const FilePatch& fp : parse_unified_diff(read_file(file), name)) {
      const std::string old_path = strip_prefix_dir(fp.old_path);
      const std::string new_path = strip_prefix_dir(fp.new_path);
      if (new_path == "/dev/null") {
        state.erase(old_path);
        continue;
      }
      if (old_path == "/dev/null") {
        state[new_path] = apply_file_patch("", fp, name);
        continue;
      }
      const auto it = state.find(old_path);
      if (it == state.end()) {
        throw PatchParseError(name, fp.hunks.empty() ? 0 : fp.hunks.front().source_line,
                              "patch modifies unknown file " + old_path);
      }
      std::string before = it->second;
      std::string after = apply_file_patch(before, fp, name);
      if (old_path != new_path) state.erase(it);
      state[new_path] = after;
      if (!glob_match(opts.file_glob, new_path)) continue;
      if (auto why = unusable(before + after)) {
        spdlog::info("skipping {} file {} in {}", *why, new_path, name);
        continue;
      }
      VersionPair pair;
      pair.parent = Version::deserialize(before);
      pair.child = Version::deserialize(after);
      pair.provenance.repo_id = repo_id;
      pair.provenance.file_path = new_path;
      pair.provenance.revision_id = file.stem().string();
      pair.provenance.order_index = lineage[new_path]++;
      out.push_back(std::move(pair));
    }
  }
  return out;
}

std::vector<VersionPair> mine_revisions(const std::filesystem::path& path,
                                        const MineOptions& opts) {
  if (std::filesystem::exists(path / ".git") ||
      (std::filesystem::exists(path / "HEAD") && std::filesystem::exists(path / "objects"))) {
    return mine_git(path, opts);
  }
  return mine_patch_series(path, opts);
}

}  // namespace grace
