#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grace/edit_model.h"
#include "grace/random.h"

namespace grace::testing {

// The refactoring scenario from the motivating example: v1 -> v2 rewrites
// lines 8-10 (1-based), v2 -> v3 collapses lines 12-13 into a dictionary
// lookup.
Version projection_v1();
Version projection_v2();
Version projection_v3();
// current = the v2 -> v3 edit, ctx = [the v1 -> v2 edit].
Example projection_example();
Lines projection_truth();
// The completion tool's incorrect guess for the v2 -> v3 edit.
Lines projection_wrong_prediction();

// NUnit -> xUnit migration: the first edit rewrites the using directive
// and one attribute, the target rewrites a second attribute.
Example nunit_example();

// Synthetic corpus where every target replicates its one spatially close
// context edit line for line. Example i lives in repo "syn-<i % repos>".
std::vector<Example> replicate_corpus(std::size_t n, std::size_t repos = 4);

// Random identifiers, numbers and punctuation joined by random spacing.
std::string random_line(Rng& rng, std::size_t max_tokens = 8);
Lines random_lines(Rng& rng, std::size_t min_count, std::size_t max_count);
// Arbitrary bytes drawn from a small alphabet rich in '\r', '\n' and ' '.
std::string random_bytes(Rng& rng, std::size_t max_len);
// Random edit of a random file, with 0-4 context edits and provenance.
Example random_example(Rng& rng, const std::string& id);
// A random mutation of `v`: line insertions, deletions and rewrites.
Version mutate(Rng& rng, const Version& v);

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view text);

// Absolute path of a checked-in file under tests/data.
std::filesystem::path data_path(std::string_view name);

// Clones the bundled three-commit toy repository into `dir`.
void clone_toy_repo(const std::filesystem::path& dir);

// Runs the command-line tool in-process; returns the exit code.
struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};
CliResult run_cli(std::vector<std::string> args);

// Minimal HTTP server on 127.0.0.1 with a single POST handler.
struct StubRequest {
  std::string path;
  std::string body;
  std::string authorization;
};
struct StubResponse {
  int status = 200;
  std::string body;
};
class StubServer {
 public:
  explicit StubServer(std::function<StubResponse(const StubRequest&)> handler);
  ~StubServer();
  int port() const;
  std::string url(std::string_view path = "/v1/completions") const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Sets an environment variable for the current scope.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value);  // value == nullptr unsets
  ~ScopedEnv();

 private:
  std::string name_;
  std::optional<std::string> old_;
};

}  // namespace grace::testing
