#pragma once

// Dataset assembly and the JSONL record format.
//
// One record per line, canonical field order:
//   {"schema_version","id","repo","path","revision",
//    "current":{"prefix","before","after","suffix","span":[s,e],"order_index"[,"timestamp"]},
//    "ctx_edits":[{same shape[,"repo","path","revision"]}],
//    ["futures":[[lines]..]], ["source":[lines]], "tags":[..], "meta":{..}}
// Context edits inherit repo/path/revision from the record unless they carry
// their own. Versions inside records are stored as line arrays (LF).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grace/association.h"
#include "grace/diffing.h"
#include "grace/edit_model.h"

namespace grace {

inline constexpr std::string_view kSchemaVersion = "1";

// Provenance of how a record was assembled.
struct RecordMeta {
  std::optional<std::string> strategy;
  std::optional<std::size_t> radius_lines;
  std::optional<std::size_t> max_edits;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> prng;
  std::optional<std::size_t> merge_gap;
  std::optional<std::string> sentinel;

  friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct DatasetRecord {
  std::string schema_version{kSchemaVersion};
  Example example;
  RecordMeta meta;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

// Single-line JSON, no trailing newline.
std::string encode_record(const DatasetRecord& record);
// `line` is the 1-based line number reported in SchemaError.
DatasetRecord decode_record(std::string_view text, std::size_t line = 0);

// Streams records one line at a time; blank lines are skipped.
class JsonlReader {
 public:
  explicit JsonlReader(const std::filesystem::path& path);
  std::optional<DatasetRecord> next();
  std::size_t line() const noexcept { return line_; }

 private:
  std::ifstream in_;
  std::size_t line_ = 0;
};

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);
  void write(const DatasetRecord& record);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::vector<DatasetRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const DatasetRecord> records);

std::vector<Example> examples_of(std::span<const DatasetRecord> records);

// A (parent, child) pair of one file at one revision.
struct VersionPair {
  Version parent;
  Version child;
  EditProvenance provenance;  // order_index = position in the file lineage

  friend bool operator==(const VersionPair&, const VersionPair&) = default;
};

std::string encode_pair(const VersionPair& pair);
VersionPair decode_pair(std::string_view text, std::size_t line = 0);
std::vector<VersionPair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, std::span<const VersionPair> pairs);

// Deterministic id: hex prefix of a digest of repo/revision/path/span.
std::string example_id(const Edit& target);

// Every edit of every pair becomes one Example. Spatial context comes from
// the same pair; temporal context from earlier edits of the same file
// lineage. Temporal examples also carry the edit-sequence futures: the
// target applied alone, then the child versions of its own and later
// revisions (at most 50 in all).
// Throws DataError for other strategies.
std::vector<Example> build_examples(std::span<const VersionPair> pairs,
                                    const GranularityConfig& gran, const AssociationSpec& assoc);

RecordMeta meta_for(const AssociationSpec& assoc, const GranularityConfig& gran);

struct FilterRules {
  bool drop_simple = true;   // PureDeletion, PureInsertion, Rename
  bool drop_alien = true;
  bool require_parse = false;
  std::string parse_hook{"balanced-delimiters"};

  static FilterRules none() { return {false, false, false}; }
};

struct DroppedExample {
  Example example;
  std::string reason;  // also added to example.tags
};

struct FilterResult {
  std::vector<Example> kept;
  std::vector<DroppedExample> dropped;
};

FilterResult filter_examples(std::span<const Example> examples, const FilterRules& rules);

struct SplitRatios {
  double train = 0.8;
  double eval = 0.1;
  double test = 0.1;
};

struct Splits {
  std::vector<Example> train;
  std::vector<Example> eval;
  std::vector<Example> test;
};

// Sizes by largest remainder; with group_by_repo whole repositories are
// assigned to splits in shuffled order, so target sizes are approximate.
Splits split_dataset(std::span<const Example> examples, const SplitRatios& ratios,
                     std::uint64_t seed, bool group_by_repo = false);

}  // namespace grace
