#include <gtest/gtest.h>
#include <sys/resource.h>

#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "fixtures.h"
#include "grace/dataset.h"
#include "grace/errors.h"

namespace grace {
namespace {

DatasetRecord random_record(Rng& rng, const std::string& id) {
  DatasetRecord r;
  r.example = testing::random_example(rng, id);
  // context edits from the same file inherit the record's location
  for (Edit& e : r.example.ctx_edits) {
    if (uniform_index(rng, 2)) {
      e.provenance.repo_id = r.example.current.provenance.repo_id;
      e.provenance.file_path = r.example.current.provenance.file_path;
      e.provenance.revision_id = r.example.current.provenance.revision_id;
    }
  }
  if (uniform_index(rng, 2)) r.example.current.provenance.timestamp = 1600000000 + uniform_index(rng, 1000);
  if (uniform_index(rng, 3) == 0) r.example.current.provenance.revision_id.reset();
  if (uniform_index(rng, 2)) r.example.source = Version(testing::random_lines(rng, 0, 5));
  if (uniform_index(rng, 2)) {
    r.example.future_versions = std::vector<Version>{Version(testing::random_lines(rng, 1, 3)),
                                                     Version(testing::random_lines(rng, 0, 3))};
  }
  if (uniform_index(rng, 2)) r.example.tags = {"filtered", "alien_insertion"};
  if (uniform_index(rng, 2)) {
    r.meta.strategy = "spatial";
    r.meta.radius_lines = 10;
    r.meta.seed = uniform_index(rng, 1u << 30);
    r.meta.prng = "mt19937_64";
  }
  return r;
}

TEST(Jsonl, EncodeDecodeIsStructuralAndByteStable) {
  Rng rng = make_rng(61, "jsonl");
  for (int i = 0; i < 500; ++i) {
    const DatasetRecord r = random_record(rng, "id" + std::to_string(i));
    const std::string line = encode_record(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const DatasetRecord back = decode_record(line, 1);
    EXPECT_EQ(back, r);
    EXPECT_EQ(encode_record(back), line);
  }
}

TEST(Jsonl, CanonicalFieldOrder) {
  Rng rng = make_rng(62, "order");
  DatasetRecord r = random_record(rng, "ord");
  r.example.source = Version(Lines{"a"});
  r.example.future_versions = std::vector<Version>{Version(Lines{"b"})};
  const auto j = nlohmann::ordered_json::parse(encode_record(r));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"schema_version", "id", "repo", "path", "revision", "current",
                                            "ctx_edits", "futures", "source", "tags", "meta"}));
  std::vector<std::string> current;
  for (auto it = j["current"].begin(); it != j["current"].end(); ++it) current.push_back(it.key());
  EXPECT_EQ(std::vector<std::string>(current.begin(), current.begin() + 6),
            (std::vector<std::string>{"prefix", "before", "after", "suffix", "span", "order_index"}));
  EXPECT_EQ(j["schema_version"], "1");
}

TEST(Jsonl, WriteThenReadFile) {
  testing::TempDir dir;
  Rng rng = make_rng(63, "file");
  std::vector<DatasetRecord> records;
  for (int i = 0; i < 50; ++i) records.push_back(random_record(rng, "f" + std::to_string(i)));
  write_jsonl(dir / "d.jsonl", records);
  EXPECT_EQ(read_jsonl(dir / "d.jsonl"), records);
  const std::string text = testing::read_file(dir / "d.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 50);
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Jsonl, MissingBeforeReportsLine) {
  testing::TempDir dir;
  Rng rng = make_rng(64, "missing");
  const std::string good = encode_record(random_record(rng, "a"));
  auto broken = nlohmann::ordered_json::parse(encode_record(random_record(rng, "b")));
  broken["current"].erase("before");
  testing::write_file(dir / "d.jsonl", good + "\n\n" + broken.dump() + "\n");
  try {
    read_jsonl(dir / "d.jsonl");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("before"), std::string::npos);
  }
}

TEST(Jsonl, RejectsBadRecords) {
  Rng rng = make_rng(65, "bad");
  auto j = nlohmann::ordered_json::parse(encode_record(random_record(rng, "a")));
  auto wrong_version = j;
  wrong_version["schema_version"] = "99";
  EXPECT_THROW(decode_record(wrong_version.dump(), 1), SchemaError);
  auto bad_span = j;
  bad_span["current"]["span"] = {0, 99};
  EXPECT_THROW(decode_record(bad_span.dump(), 1), SchemaError);
  EXPECT_THROW(decode_record("{not json", 4), SchemaError);

  testing::TempDir dir;
  const std::string line = encode_record(random_record(rng, "dup"));
  testing::write_file(dir / "dup.jsonl", line + "\n" + line + "\n");
  EXPECT_THROW(read_jsonl(dir / "dup.jsonl"), SchemaError);
}

long max_rss_kb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

TEST(Jsonl, TenThousandRecordsStream) {
  testing::TempDir dir;
  Rng rng = make_rng(66, "stream");
  {
    // Each record carries ~4 KB of source so the file dwarfs one record.
    JsonlWriter w(dir / "big.jsonl");
    for (int i = 0; i < 10000; ++i) {
      DatasetRecord r = random_record(rng, "s" + std::to_string(i));
      r.example.source = Version(Lines(64, std::string(60, 'x')));
      w.write(r);
    }
    w.close();
  }
  const auto file_kb = static_cast<long>(std::filesystem::file_size(dir / "big.jsonl") / 1024);
  ASSERT_GT(file_kb, 30000);
  const long before = max_rss_kb();
  JsonlReader reader(dir / "big.jsonl");
  std::size_t n = 0;
  while (auto r = reader.next()) ++n;
  EXPECT_EQ(n, 10000u);
  EXPECT_LT(max_rss_kb() - before, file_kb / 4);
}

VersionPair pair_of(Lines parent, Lines child, std::string rev, std::int64_t order, std::string path = "A.cs") {
  VersionPair p;
  p.parent = Version(std::move(parent));
  p.child = Version(std::move(child));
  p.provenance.repo_id = "repo";
  p.provenance.file_path = std::move(path);
  p.provenance.revision_id = std::move(rev);
  p.provenance.timestamp = 1000 + order;
  p.provenance.order_index = order;
  return p;
}

Lines file_lines(std::size_t n) {
  Lines out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("stmt" + std::to_string(i) + "();");
  return out;
}

TEST(BuildExamples, SpatialNeighboursWithinRevision) {
  const Lines parent = file_lines(60);
  Lines child = parent;
  child[10] = "changed10();";
  child[16] = "changed16();";
  child[50] = "changed50();";
  const auto examples = build_examples(std::vector{pair_of(parent, child, "r1", 0)}, {}, {});
  ASSERT_EQ(examples.size(), 3u);
  EXPECT_EQ(examples[0].ctx_edits.size(), 1u);
  EXPECT_EQ(examples[0].ctx_edits[0].span.start, 16u);
  EXPECT_EQ(examples[1].ctx_edits.size(), 1u);
  EXPECT_EQ(examples[1].ctx_edits[0].span.start, 10u);
  EXPECT_TRUE(examples[2].ctx_edits.empty());
  for (const auto& ex : examples) {
    EXPECT_EQ(ex.source, Version(parent));
    EXPECT_EQ(ex.current.provenance.revision_id, "r1");
  }
}

TEST(BuildExamples, SingleEditRevisionHasNoContext) {
  const Lines parent = file_lines(5);
  Lines child = parent;
  child[2] = "x();";
  const auto examples = build_examples(std::vector{pair_of(parent, child, "r1", 0)}, {}, {});
  ASSERT_EQ(examples.size(), 1u);
  EXPECT_TRUE(examples[0].ctx_edits.empty());
}

TEST(BuildExamples, IdsAreStableAndUnique) {
  Rng rng = make_rng(67, "ids");
  std::vector<VersionPair> pairs;
  for (int i = 0; i < 20; ++i) {
    const Version a(testing::random_lines(rng, 5, 30));
    const Version b = testing::mutate(rng, a);
    pairs.push_back(pair_of(a.lines(), b.lines(), "r" + std::to_string(i), i, "F" + std::to_string(i % 3) + ".cs"));
  }
  const auto x = build_examples(pairs, {}, {});
  const auto y = build_examples(pairs, {}, {});
  ASSERT_EQ(x.size(), y.size());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].id, y[i].id);
    EXPECT_EQ(x[i].id, example_id(x[i].current));
    ids.insert(x[i].id);
  }
  EXPECT_EQ(ids.size(), x.size());
}

TEST(BuildExamples, TemporalUsesLineageHistoryAndFutures) {
  // One file edited in three revisions.
  Lines v0 = file_lines(30);
  Lines v1 = v0;
  v1[3] = "a();";
  Lines v2 = v1;
  v2[20] = "b();";
  Lines v3 = v2;
  v3[8] = "c();";
  const std::vector pairs = {pair_of(v0, v1, "r1", 0), pair_of(v1, v2, "r2", 1), pair_of(v2, v3, "r3", 2)};
  AssociationSpec assoc;
  assoc.strategy = AssociationStrategy::kTemporal;
  const auto ex = build_examples(pairs, {}, assoc);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_TRUE(ex[0].ctx_edits.empty());
  ASSERT_EQ(ex[2].ctx_edits.size(), 2u);
  EXPECT_EQ(ex[2].ctx_edits[0].after, (Lines{"a();"}));
  EXPECT_EQ(ex[2].ctx_edits[1].after, (Lines{"b();"}));
  ASSERT_TRUE(ex[0].future_versions);
  // edit alone, then children of r1, r2, r3
  EXPECT_EQ(ex[0].future_versions->size(), 4u);
  EXPECT_EQ(ex[0].future_versions->at(1), Version(v1));
  EXPECT_EQ(ex[2].future_versions->back(), Version(v3));
  AssociationSpec random;
  random.strategy = AssociationStrategy::kRandomSameRepo;
  EXPECT_THROW(build_examples(pairs, {}, random), DataError);
}

Example with_current(Lines before, Lines after, Lines prefix = {"class C {"}) {
  Example ex;
  ex.id = "x" + std::to_string(before.size()) + std::to_string(after.size()) + (after.empty() ? "" : after[0]);
  ex.current.prefix = std::move(prefix);
  ex.current.before = std::move(before);
  ex.current.after = std::move(after);
  ex.current.span = {1, 1 + ex.current.before.size()};
  return ex;
}

TEST(Filter, DropsSimpleAndAlienWithReasons) {
  const std::vector<Example> input = {
      with_current({"int x;"}, {}),                                   // pure deletion
      with_current({"int a = b;"}, {"int z = b;"}),                   // rename
      with_current({"f(a, b);"}, {"f(b, a);"}),                       // kept
      with_current({"class X"}, {"class X : ILanguageBasedService"}),  // alien
  };
  const FilterResult r = filter_examples(input, {});
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_TRUE(r.kept[0].tags.contains("filtered"));
  ASSERT_EQ(r.dropped.size(), 3u);
  EXPECT_EQ(r.dropped[0].reason, "pure_deletion");
  EXPECT_EQ(r.dropped[1].reason, "rename");
  EXPECT_EQ(r.dropped[2].reason, "alien_insertion");
  EXPECT_TRUE(r.dropped[2].example.tags.contains("alien_insertion"));
}

TEST(Filter, AlienKeptWhenRuleOff) {
  FilterRules rules;
  rules.drop_alien = false;
  const FilterResult r = filter_examples(std::vector{with_current({"class X"}, {"class X : IService"})}, rules);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_TRUE(r.kept[0].tags.contains("alien_insertion"));
}

TEST(Filter, NoRulesKeepsInput) {
  Rng rng = make_rng(68, "filter");
  std::vector<Example> input;
  for (int i = 0; i < 50; ++i) input.push_back(testing::random_example(rng, "n" + std::to_string(i)));
  const FilterResult r = filter_examples(input, FilterRules::none());
  EXPECT_EQ(r.kept, input);
  EXPECT_TRUE(r.dropped.empty());
}

TEST(Filter, NothingLost) {
  Rng rng = make_rng(69, "filter-union");
  std::vector<Example> input;
  for (int i = 0; i < 200; ++i) input.push_back(testing::random_example(rng, "u" + std::to_string(i)));
  FilterRules rules;
  rules.require_parse = true;
  const FilterResult r = filter_examples(input, rules);
  EXPECT_EQ(r.kept.size() + r.dropped.size(), input.size());
  std::set<std::string> ids;
  for (const auto& e : r.kept) ids.insert(e.id);
  for (const auto& d : r.dropped) {
    ids.insert(d.example.id);
    EXPECT_TRUE(d.example.tags.contains(d.reason));
  }
  EXPECT_EQ(ids.size(), input.size());
}

std::vector<Example> repo_examples(std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.id = "e" + std::to_string(i);
    ex.current.provenance.repo_id = "repo" + std::to_string(i % 13);
    out.push_back(ex);
  }
  return out;
}

TEST(Split, SizesAndDeterminism) {
  const auto ds = repo_examples(100);
  const Splits a = split_dataset(ds, {}, 5);
  EXPECT_EQ(a.train.size(), 80u);
  EXPECT_EQ(a.eval.size(), 10u);
  EXPECT_EQ(a.test.size(), 10u);
  const Splits b = split_dataset(ds, {}, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.eval, b.eval);
  EXPECT_EQ(a.test, b.test);
  const Splits c = split_dataset(ds, {}, 6);
  EXPECT_NE(a.test, c.test);

  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.eval, &a.test})
    for (const auto& e : *part) EXPECT_TRUE(ids.insert(e.id).second);
  EXPECT_EQ(ids.size(), 100u);
}

TEST(Split, GroupedByRepoNeverStraddles) {
  const auto ds = repo_examples(260);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Splits s = split_dataset(ds, {}, seed, true);
    std::map<std::string, int> owner;
    int part_no = 0;
    for (const auto* part : {&s.train, &s.eval, &s.test}) {
      for (const auto& e : *part) {
        const auto [it, fresh] = owner.emplace(e.current.provenance.repo_id, part_no);
        EXPECT_EQ(it->second, part_no);
      }
      ++part_no;
    }
    EXPECT_EQ(s.train.size() + s.eval.size() + s.test.size(), ds.size());
  }
}

TEST(Split, BadRatios) {
  const auto ds = repo_examples(10);
  EXPECT_THROW(split_dataset(ds, {0.5, 0.2, 0.2}, 1), BadRatios);
  EXPECT_THROW(split_dataset(ds, {1.2, -0.1, -0.1}, 1), BadRatios);
  EXPECT_NO_THROW(split_dataset(ds, {1.0, 0.0, 0.0}, 1));
}

TEST(Pairs, EncodeDecodeRoundTrip) {
  Rng rng = make_rng(70, "pairs");
  for (int i = 0; i < 200; ++i) {
    VersionPair p;
    p.parent = Version::deserialize(testing::random_bytes(rng, 80));
    p.child = Version::deserialize(testing::random_bytes(rng, 80));
    p.provenance.repo_id = "r";
    p.provenance.file_path = "p.cs";
    p.provenance.revision_id = "abc";
    p.provenance.order_index = i;
    EXPECT_EQ(decode_pair(encode_pair(p), 1), p);
  }
}

}  // namespace
}  // namespace grace
