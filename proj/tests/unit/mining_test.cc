#include <gtest/gtest.h>

#include "fixtures.h"
#include "grace/diffing.h"
#include "grace/errors.h"
#include "grace/mining.h"
#include "grace/subprocess.h"

namespace grace {
namespace {

void git(const std::filesystem::path& repo, std::vector<std::string> args) {
  std::vector<std::string> argv = {"git", "-C", repo.string(), "-c", "user.name=t", "-c", "user.email=t@example.com"};
  argv.insert(argv.end(), args.begin(), args.end());
  const auto r = run_process(argv);
  ASSERT_EQ(r.exit_code, 0) << r.err;
}

TEST(MineGit, ToyRepoYieldsTwoPairs) {
  testing::TempDir dir;
  testing::clone_toy_repo(dir / "toy");
  MineOptions opts;
  opts.file_glob = "*.cs";
  const auto pairs = mine_git(dir / "toy", opts);
  ASSERT_EQ(pairs.size(), 2u);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].provenance.file_path, "src/CalculatorTests.cs");
    EXPECT_EQ(pairs[i].provenance.repo_id, "toy");
    EXPECT_EQ(pairs[i].provenance.order_index, static_cast<std::int64_t>(i));
    ASSERT_TRUE(pairs[i].provenance.timestamp);
    ASSERT_TRUE(pairs[i].provenance.revision_id);
  }
  EXPECT_LT(*pairs[0].provenance.timestamp, *pairs[1].provenance.timestamp);
  EXPECT_EQ(pairs[0].child, pairs[1].parent);

  // README changes are picked up without the glob
  EXPECT_EQ(mine_git(dir / "toy").size(), 3u);
}

TEST(MineGit, DiffsReproduceCommittedChildren) {
  testing::TempDir dir;
  testing::clone_toy_repo(dir / "toy");
  for (const VersionPair& p : mine_git(dir / "toy")) {
    const auto shown = run_process({"git", "-C", (dir / "toy").string(), "show",
                                    *p.provenance.revision_id + ":" + p.provenance.file_path});
    ASSERT_EQ(shown.exit_code, 0);
    EXPECT_EQ(p.child.serialize(), shown.out);
    EXPECT_EQ(apply_edits(diff_versions(p.parent, p.child), p.parent).serialize(), shown.out);
  }
}

TEST(MineGit, SkipsBinaryAndCreatedFiles) {
  testing::TempDir dir;
  const auto repo = dir / "r";
  std::filesystem::create_directories(repo);
  git(repo, {"init", "-q"});
  testing::write_file(repo / "a.cs", "int a;\n");
  testing::write_file(repo / "blob.cs", std::string("\x00\x01\x02", 3));
  git(repo, {"add", "."});
  git(repo, {"commit", "-q", "-m", "one"});
  testing::write_file(repo / "a.cs", "int a;\nint b;\n");
  testing::write_file(repo / "blob.cs", std::string("\x00\x01\x03", 3));
  testing::write_file(repo / "new.cs", "int c;\n");
  git(repo, {"add", "."});
  git(repo, {"commit", "-q", "-m", "two"});
  MineOptions opts;
  opts.file_glob = "*.cs";
  const auto pairs = mine_git(repo, opts);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].provenance.file_path, "a.cs");
  EXPECT_EQ(pairs[0].child.serialize(), "int a;\nint b;\n");
}

TEST(MineGit, NotARepository) {
  testing::TempDir dir;
  EXPECT_THROW(mine_git(dir.path()), VcsUnavailable);
}

TEST(UnifiedDiff, ParseAndApply) {
  const std::string patch =
      "diff --git a/f.txt b/f.txt\n"
      "--- a/f.txt\n"
      "+++ b/f.txt\n"
      "@@ -1,3 +1,3 @@\n"
      " one\n"
      "-two\n"
      "+TWO\n"
      " three\n";
  const auto fps = parse_unified_diff(patch, "p.patch");
  ASSERT_EQ(fps.size(), 1u);
  EXPECT_EQ(fps[0].old_path, "a/f.txt");
  ASSERT_EQ(fps[0].hunks.size(), 1u);
  EXPECT_EQ(fps[0].hunks[0].source_line, 4u);
  EXPECT_EQ(apply_file_patch("one\ntwo\nthree\n", fps[0], "p.patch"), "one\nTWO\nthree\n");
  EXPECT_THROW(apply_file_patch("one\nzwei\nthree\n", fps[0], "p.patch"), PatchParseError);
}

TEST(UnifiedDiff, NoNewlineMarkers) {
  const std::string patch =
      "--- a/f\n"
      "+++ b/f\n"
      "@@ -1 +1,2 @@\n"
      "-x\n"
      "\\ No newline at end of file\n"
      "+x\n"
      "+y\n";
  const auto fps = parse_unified_diff(patch, "n.diff");
  EXPECT_EQ(apply_file_patch("x", fps.at(0), "n.diff"), "x\ny\n");
}

TEST(UnifiedDiff, MalformedInputsCarryLocation) {
  try {
    parse_unified_diff("--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n x\n?bad\n", "bad.patch");
    FAIL() << "expected PatchParseError";
  } catch (const PatchParseError& e) {
    EXPECT_EQ(e.file(), "bad.patch");
    EXPECT_EQ(e.line(), 5u);
  }
  EXPECT_THROW(parse_unified_diff("@@ -1 +1 @@\n-a\n+b\n", "h.patch"), PatchParseError);
  EXPECT_THROW(parse_unified_diff("--- a/f\n+++ b/f\n@@ -x +1 @@\n", "h.patch"), PatchParseError);
  EXPECT_THROW(parse_unified_diff("--- a/f\n+++ b/f\n@@ -1,3 +1,3 @@\n a\n", "short.patch"),
               PatchParseError);
}

TEST(PatchSeries, ReplaysInNameOrder) {
  testing::TempDir dir;
  testing::write_file(dir / "base/src/A.cs", "class A\n{\n    [Test]\n}\n");
  testing::write_file(dir / "0001-fact.patch",
                      "--- a/src/A.cs\n+++ b/src/A.cs\n@@ -2,3 +2,3 @@\n {\n-    [Test]\n+    [Fact]\n }\n");
  testing::write_file(dir / "0002-more.patch",
                      "--- a/src/A.cs\n+++ b/src/A.cs\n@@ -1,2 +1,2 @@\n-class A\n+public class A\n {\n"
                      "--- /dev/null\n+++ b/src/B.cs\n@@ -0,0 +1 @@\n+class B {}\n");
  testing::write_file(dir / "notes.txt", "ignored");
  MineOptions opts;
  opts.file_glob = "*.cs";
  const auto pairs = mine_revisions(dir.path(), opts);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].provenance.revision_id, "0001-fact");
  EXPECT_EQ(pairs[0].child.serialize(), "class A\n{\n    [Fact]\n}\n");
  EXPECT_EQ(pairs[1].parent, pairs[0].child);
  EXPECT_EQ(pairs[1].child.serialize(), "public class A\n{\n    [Fact]\n}\n");
  EXPECT_EQ(pairs[1].provenance.order_index, 1);
  EXPECT_FALSE(pairs[0].provenance.timestamp);
}

TEST(PatchSeries, UnknownFileIsAnError) {
  testing::TempDir dir;
  testing::write_file(dir / "1.patch", "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n");
  EXPECT_THROW(mine_patch_series(dir.path()), PatchParseError);
}

TEST(Utf8, Validation) {
  EXPECT_TRUE(is_valid_utf8("plain ascii"));
  EXPECT_TRUE(is_valid_utf8("\xce\xb1\xce\xb2"));
  EXPECT_FALSE(is_valid_utf8("\xff\xfe"));
  EXPECT_FALSE(is_valid_utf8("\xce"));
}

}  // namespace
}  // namespace grace
