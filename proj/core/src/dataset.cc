#include "grace/dataset.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <unordered_map>

#include "grace/digest.h"
#include "grace/errors.h"
#include "grace/random.h"

namespace grace {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr std::size_t kMaxFutures = 50;

std::string dump(const ojson& j) {
  try {
    return j.dump();
  } catch (const json::type_error& e) {
    throw DataError(std::string("record is not valid UTF-8: ") + e.what());
  }
}

ojson lines_json(const Lines& lines) {
  ojson a = ojson::array();
  for (const auto& l : lines) a.push_back(l);
  return a;
}

ojson optional_string(const std::optional<std::string>& s) {
  return s ? ojson(*s) : ojson(nullptr);
}

ojson edit_json(const Edit& e, const EditProvenance* record) {
  ojson j;
  j["prefix"] = lines_json(e.prefix);
  j["before"] = lines_json(e.before);
  j["after"] = lines_json(e.after);
  j["suffix"] = lines_json(e.suffix);
  j["span"] = ojson::array({e.span.start, e.span.end});
  j["order_index"] = e.provenance.order_index;
  if (e.provenance.timestamp) j["timestamp"] = *e.provenance.timestamp;
  if (record) {
    if (e.provenance.repo_id != record->repo_id) j["repo"] = e.provenance.repo_id;
    if (e.provenance.file_path != record->file_path) j["path"] = e.provenance.file_path;
    if (e.provenance.revision_id != record->revision_id) {
      j["revision"] = optional_string(e.provenance.revision_id);
    }
  }
  return j;
}

// Field access with schema errors that name the line.
class Fields {
 public:
  Fields(const json& j, std::size_t line, std::string where)
      : j_(j), line_(line), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaError(line_, where_.empty() ? msg : where_ + ": " + msg);
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& at(const char* key) const {
    if (!j_.contains(key)) fail(std::string("missing field '") + key + "'");
    return j_[key];
  }

  std::string str(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  std::optional<std::string> nullable_str(const char* key) const {
    const json& v = at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string or null");
    return v.get<std::string>();
  }

  std::int64_t integer(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_int(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_unsigned()) {
      fail(std::string("field '") + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  Lines lines(const char* key) const { return to_lines(at(key), key); }

  Lines to_lines(const json& v, const std::string& what) const {
    if (!v.is_array()) fail("field '" + what + "' must be an array of strings");
    Lines out;
    out.reserve(v.size());
    for (const auto& s : v) {
      if (!s.is_string()) fail("field '" + what + "' must be an array of strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  }

 private:
  const json& j_;
  std::size_t line_;
  std::string where_;
};

Edit edit_from(const json& j, std::size_t line, const std::string& where,
               const EditProvenance& inherited) {
  const Fields f(j, line, where);
  Edit e;
  e.prefix = f.lines("prefix");
  e.before = f.lines("before");
  e.after = f.lines("after");
  e.suffix = f.lines("suffix");
  const json& span = f.at("span");
  if (!span.is_array() || span.size() != 2 || !span[0].is_number_unsigned() ||
      !span[1].is_number_unsigned()) {
    f.fail("field 'span' must be [start, end]");
  }
  e.span = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
  if (e.span.start > e.span.end) f.fail("span start exceeds end");
  if (e.span.length() != e.before.size()) f.fail("span length differs from before line count");
  e.provenance = inherited;
  e.provenance.timestamp.reset();
  e.provenance.order_index = f.has("order_index") ? f.integer("order_index") : 0;
  if (f.has("timestamp")) e.provenance.timestamp = f.integer("timestamp");
  if (f.has("repo")) e.provenance.repo_id = f.str("repo");
  if (f.has("path")) e.provenance.file_path = f.str("path");
  if (f.has("revision")) e.provenance.revision_id = f.nullable_str("revision");
  return e;
}

json parse_line(std::string_view text, std::size_t line) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(line, "malformed JSON");
  return j;
}

}  // namespace

std::string encode_record(const DatasetRecord& r) {
  const Example& ex = r.example;
  const EditProvenance& p = ex.current.provenance;
  ojson j;
  j["schema_version"] = r.schema_version;
  j["id"] = ex.id;
  j["repo"] = p.repo_id;
  j["path"] = p.file_path;
  j["revision"] = optional_string(p.revision_id);
  j["current"] = edit_json(ex.current, nullptr);
  ojson ctx = ojson::array();
  for (const Edit& e : ex.ctx_edits) ctx.push_back(edit_json(e, &p));
  j["ctx_edits"] = std::move(ctx);
  if (ex.future_versions) {
    ojson futures = ojson::array();
    for (const Version& v : *ex.future_versions) futures.push_back(lines_json(v.lines()));
    j["futures"] = std::move(futures);
  }
  if (ex.source) j["source"] = lines_json(ex.source->lines());
  j["tags"] = ojson::array();
  for (const auto& t : ex.tags) j["tags"].push_back(t);
  ojson meta = ojson::object();
  const RecordMeta& m = r.meta;
  if (m.strategy) meta["strategy"] = *m.strategy;
  if (m.radius_lines) meta["radius_lines"] = *m.radius_lines;
  if (m.max_edits) meta["max_edits"] = *m.max_edits;
  if (m.seed) meta["seed"] = *m.seed;
  if (m.prng) meta["prng"] = *m.prng;
  if (m.merge_gap) meta["merge_gap"] = *m.merge_gap;
  if (m.sentinel) meta["sentinel"] = *m.sentinel;
  j["meta"] = std::move(meta);
  return dump(j);
}

DatasetRecord decode_record(std::string_view text, std::size_t line) {
  const json j = parse_line(text, line);
  const Fields f(j, line, "");
  DatasetRecord r;
  r.schema_version = f.str("schema_version");
  if (r.schema_version != kSchemaVersion) {
    f.fail("unsupported schema_version '" + r.schema_version + "'");
  }
  Example& ex = r.example;
  ex.id = f.str("id");
  if (ex.id.empty()) f.fail("empty id");
  EditProvenance p;
  p.repo_id = f.str("repo");
  p.file_path = f.str("path");
  p.revision_id = f.nullable_str("revision");
  ex.current = edit_from(f.at("current"), line, "current", p);
  const json& ctx = f.at("ctx_edits");
  if (!ctx.is_array()) f.fail("field 'ctx_edits' must be an array");
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    ex.ctx_edits.push_back(
        edit_from(ctx[i], line, "ctx_edits[" + std::to_string(i) + "]", ex.current.provenance));
  }
  if (f.has("futures")) {
    const json& fut = f.at("futures");
    if (!fut.is_array()) f.fail("field 'futures' must be an array");
    ex.future_versions.emplace();
    for (const auto& v : fut) ex.future_versions->emplace_back(f.to_lines(v, "futures"));
  }
  if (f.has("source")) ex.source = Version(f.lines("source"));
  const json& tags = f.at("tags");
  if (!tags.is_array()) f.fail("field 'tags' must be an array");
  for (const auto& t : tags) {
    if (!t.is_string()) f.fail("tags must be strings");
    ex.tags.insert(t.get<std::string>());
  }
  if (f.has("meta")) {
    const Fields m(f.at("meta"), line, "meta");
    if (m.has("strategy")) r.meta.strategy = m.str("strategy");
    if (m.has("radius_lines")) r.meta.radius_lines = m.unsigned_int("radius_lines");
    if (m.has("max_edits")) r.meta.max_edits = m.unsigned_int("max_edits");
    if (m.has("seed")) r.meta.seed = m.unsigned_int("seed");
    if (m.has("prng")) r.meta.prng = m.str("prng");
    if (m.has("merge_gap")) r.meta.merge_gap = m.unsigned_int("merge_gap");
    if (m.has("sentinel")) r.meta.sentinel = m.str("sentinel");
  }
  return r;
}

JsonlReader::JsonlReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw DataError("cannot open " + path.string());
}

std::optional<DatasetRecord> JsonlReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    return decode_record(text, line_);
  }
  return std::nullopt;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw DataError("cannot write " + path.string());
}

void JsonlWriter::write(const DatasetRecord& record) {
  out_ << encode_record(record) << '\n';
  if (!out_) throw DataError("write failed: " + path_.string());
}

void JsonlWriter::close() {
  out_.close();
  if (out_.fail()) throw DataError("write failed: " + path_.string());
}

std::vector<DatasetRecord> read_jsonl(const std::filesystem::path& path) {
  JsonlReader reader(path);
  std::vector<DatasetRecord> out;
  std::set<std::string, std::less<>> ids;
  while (auto r = reader.next()) {
    if (!ids.insert(r->example.id).second) {
      throw SchemaError(reader.line(), "duplicate id '" + r->example.id + "'");
    }
    out.push_back(*std::move(r));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
  JsonlWriter writer(path);
  for (const auto& r : records) writer.write(r);
  writer.close();
}

std::vector<Example> examples_of(std::span<const DatasetRecord> records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.example);
  return out;
}

// ---------------------------------------------------------------------------
// Version pairs

std::string encode_pair(const VersionPair& pair) {
  const EditProvenance& p = pair.provenance;
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["repo"] = p.repo_id;
  j["path"] = p.file_path;
  j["revision"] = optional_string(p.revision_id);
  j["timestamp"] = p.timestamp ? ojson(*p.timestamp) : ojson(nullptr);
  j["order_index"] = p.order_index;
  j["parent"] = pair.parent.serialize();
  j["child"] = pair.child.serialize();
  return dump(j);
}

VersionPair decode_pair(std::string_view text, std::size_t line) {
  const json j = parse_line(text, line);
  const Fields f(j, line, "");
  if (f.str("schema_version") != kSchemaVersion) f.fail("unsupported schema_version");
  VersionPair pair;
  pair.provenance.repo_id = f.str("repo");
  pair.provenance.file_path = f.str("path");
  pair.provenance.revision_id = f.nullable_str("revision");
  if (!f.at("timestamp").is_null()) pair.provenance.timestamp = f.integer("timestamp");
  pair.provenance.order_index = f.integer("order_index");
  pair.parent = Version::deserialize(f.str("parent"));
  pair.child = Version::deserialize(f.str("child"));
  return pair;
}

std::vector<VersionPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<VersionPair> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(decode_pair(text, line));
  }
  return out;
}

void write_pairs(const std::filesystem::path& path, std::span<const VersionPair> pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : pairs) out << encode_pair(p) << '\n';
  out.close();
  if (out.fail()) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Assembly

std::string example_id(const Edit& target) {
  const EditProvenance& p = target.provenance;
  const std::string key = p.repo_id + '\n' + p.revision_id.value_or("") + '\n' + p.file_path +
                          '\n' + std::to_string(target.span.start) + ':' +
                          std::to_string(target.span.end);
  return sha256_hex(key).substr(0, 16);
}

RecordMeta meta_for(const AssociationSpec& assoc, const GranularityConfig& gran) {
  RecordMeta m;
  m.strategy = std::string(to_string(assoc.strategy));
  if (assoc.strategy == AssociationStrategy::kSpatial) m.radius_lines = assoc.radius_lines;
  m.max_edits = assoc.max_edits;
  m.seed = assoc.seed;
  m.prng = std::string(kPrngName);
  m.merge_gap = gran.merge_gap;
  return m;
}

std::vector<Example> build_examples(std::span<const VersionPair> pairs,
                                    const GranularityConfig& gran, const AssociationSpec& assoc) {
  if (assoc.strategy != AssociationStrategy::kSpatial &&
      assoc.strategy != AssociationStrategy::kTemporal) {
    throw DataError("build_examples supports spatial or temporal association only");
  }
  const bool temporal = assoc.strategy == AssociationStrategy::kTemporal;

  // Pairs grouped by file lineage, in lineage order.
  std::map<std::pair<std::string, std::string>, std::vector<const VersionPair*>> lineages;
  for (const VersionPair& pr : pairs) {
    lineages[{pr.provenance.repo_id, pr.provenance.file_path}].push_back(&pr);
  }
  for (auto& [key, list] : lineages) {
    std::stable_sort(list.begin(), list.end(), [](const VersionPair* a, const VersionPair* b) {
      return a->provenance.order_index < b->provenance.order_index;
    });
  }

  std::unordered_map<const VersionPair*, std::vector<Example>> built;
  for (const auto& [key, list] : lineages) {
    std::vector<Edit> history;
    for (std::size_t pi = 0; pi < list.size(); ++pi) {
      const VersionPair& pr = *list[pi];
      std::vector<Edit> edits = diff_versions(pr.parent, pr.child, gran);
      for (Edit& e : edits) {
        const std::int64_t position = static_cast<std::int64_t>(history.size());
        e.provenance = pr.provenance;
        e.provenance.order_index = position;
        history.push_back(e);
      }
      std::vector<Example>& out = built[&pr];
      for (const Edit& target : edits) {
        Example ex;
        ex.id = example_id(target);
        ex.current = target;
        ex.source = pr.parent;
        if (temporal) {
          ex.ctx_edits = temporal_associates(history, target, assoc.max_edits);
          std::vector<Version> futures{apply_edit(target, pr.parent)};
          for (std::size_t later = pi; later < list.size() && futures.size() < kMaxFutures;
               ++later) {
            futures.push_back(list[later]->child);
          }
          ex.future_versions = std::move(futures);
        } else {
          ex.ctx_edits =
              nearest_spatial_associates(edits, target, assoc.radius_lines, assoc.max_edits);
        }
        out.push_back(std::move(ex));
      }
    }
  }

  // Emit in the input pair order.
  std::vector<Example> result;
  for (const VersionPair& pr : pairs) {
    auto it = built.find(&pr);
    if (it == built.end()) continue;
    for (auto& ex : it->second) result.push_back(std::move(ex));
    built.erase(it);
  }
  return result;
}

FilterResult filter_examples(std::span<const Example> examples, const FilterRules& rules) {
  const bool active = rules.drop_simple || rules.drop_alien || rules.require_parse;
  FilterResult result;
  for (const Example& in : examples) {
    Example ex = in;
    std::optional<std::string> reason;
    const SimpleKind kind = classify_simple(ex.current);
    if (rules.drop_simple && kind != SimpleKind::kNotSimple) reason = std::string(to_string(kind));
    const bool alien = !reason && active && has_alien_insertion(ex.current, ex.ctx_edits);
    if (alien && rules.drop_alien) reason = "alien_insertion";
    if (!reason && rules.require_parse) {
      Lines window = ex.current.prefix;
      window.insert(window.end(), ex.current.after.begin(), ex.current.after.end());
      window.insert(window.end(), ex.current.suffix.begin(), ex.current.suffix.end());
      if (!passes_parse_check(rules.parse_hook, window)) reason = "parse_failure";
    }
    if (reason) {
      ex.tags.insert(*reason);
      result.dropped.push_back({std::move(ex), *reason});
      continue;
    }
    if (active) ex.tags.insert("filtered");
    if (alien) ex.tags.insert("alien_insertion");
    result.kept.push_back(std::move(ex));
  }
  return result;
}

namespace {

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * ratios[i];
    sizes[i] = static_cast<std::size_t>(exact + 1e-9);
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned > n) {  // guards the epsilon above
    for (std::size_t i = 3; i-- > 0;) {
      if (sizes[i] && assigned > n) --sizes[i], --assigned;
    }
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  return sizes;
}

}  // namespace

Splits split_dataset(std::span<const Example> examples, const SplitRatios& ratios,
                     std::uint64_t seed, bool group_by_repo) {
  const std::array<double, 3> r{ratios.train, ratios.eval, ratios.test};
  for (double x : r) {
    if (!(x >= 0)) throw BadRatios("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw BadRatios("split ratios must sum to 1");

  const std::size_t n = examples.size();
  const auto sizes = split_sizes(n, r);
  std::vector<int> assignment(n, 0);
  Rng rng = make_rng(seed, "split");

  if (!group_by_repo) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(rng, order);
    for (std::size_t i = 0; i < n; ++i) {
      assignment[order[i]] = i < sizes[0] ? 0 : i < sizes[0] + sizes[1] ? 1 : 2;
    }
  } else {
    std::map<std::string, std::vector<std::size_t>> by_repo;
    for (std::size_t i = 0; i < n; ++i) {
      by_repo[examples[i].current.provenance.repo_id].push_back(i);
    }
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [repo, members] : by_repo) groups.push_back(&members);
    shuffle(rng, groups);
    // Each repository goes to the split furthest below its target size.
    std::array<std::size_t, 3> filled{};
    for (const auto* members : groups) {
      std::size_t best = 0;
      double best_gap = -1e300;
      for (std::size_t s = 0; s < 3; ++s) {
        if (r[s] == 0) continue;
        const double gap = static_cast<double>(sizes[s]) - static_cast<double>(filled[s]);
        if (gap > best_gap) best_gap = gap, best = s;
      }
      filled[best] += members->size();
      for (std::size_t i : *members) assignment[i] = static_cast<int>(best);
    }
  }

  Splits out;
  for (std::size_t i = 0; i < n; ++i) {
    (assignment[i] == 0 ? out.train : assignment[i] == 1 ? out.eval : out.test)
        .push_back(examples[i]);
  }
  return out;
}

}  // namespace grace
