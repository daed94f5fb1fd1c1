#include "grace/association.h"

#include <algorithm>

#include "grace/diffing.h"
#include "grace/errors.h"
#include "grace/random.h"

namespace grace {

std::string_view to_string(AssociationStrategy s) {
  switch (s) {
    case AssociationStrategy::kSpatial:
      return "spatial";
    case AssociationStrategy::kTemporal:
      return "temporal";
    case AssociationStrategy::kRandomSameRepo:
      return "random-same-repo";
    case AssociationStrategy::kRandomOtherRepo:
      return "random-other-repo";
    case AssociationStrategy::kNone:
      break;
  }
  return "none";
}

std::string_view to_string(PoolFilter f) {
  return f == PoolFilter::kFilteredOnly ? "filtered" : "unfiltered";
}

std::optional<AssociationStrategy> parse_strategy(std::string_view s) {
  for (auto v : {AssociationStrategy::kSpatial, AssociationStrategy::kTemporal,
                 AssociationStrategy::kRandomSameRepo, AssociationStrategy::kRandomOtherRepo,
                 AssociationStrategy::kNone}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<PoolFilter> parse_pool_filter(std::string_view s) {
  if (s == "filtered") return PoolFilter::kFilteredOnly;
  if (s == "unfiltered") return PoolFilter::kUnfiltered;
  return std::nullopt;
}

namespace {

bool within(const LineSpan& a, const LineSpan& b, std::size_t r) {
  return a.start < b.end + r && b.start < a.end + r;
}

// Lines between the two spans; 0 when they touch or overlap.
std::size_t gap(const LineSpan& a, const LineSpan& b) {
  if (a.end <= b.start) return b.start - a.end;
  if (b.end <= a.start) return a.start - b.end;
  return 0;
}

void sort_document_order(std::vector<Edit>& edits) {
  std::stable_sort(edits.begin(), edits.end(),
                   [](const Edit& a, const Edit& b) { return a.span < b.span; });
}

}  // namespace

std::vector<Edit> spatial_associates(std::span<const Edit> all_edits_in_revision,
                                     const Edit& target, std::size_t radius) {
  std::vector<Edit> out;
  for (const Edit& e : all_edits_in_revision) {
    if (same_edit(e, target)) continue;
    if (within(e.span, target.span, radius)) out.push_back(e);
  }
  sort_document_order(out);
  return out;
}

std::vector<Edit> nearest_spatial_associates(std::span<const Edit> all_edits_in_revision,
                                             const Edit& target, std::size_t radius,
                                             std::size_t max_edits) {
  auto out = spatial_associates(all_edits_in_revision, target, radius);
  if (out.size() > max_edits) {
    std::stable_sort(out.begin(), out.end(), [&](const Edit& a, const Edit& b) {
      return gap(a.span, target.span) < gap(b.span, target.span);
    });
    out.resize(max_edits);
    sort_document_order(out);
  }
  return out;
}

std::vector<Edit> temporal_associates(std::span<const Edit> history, const Edit& target,
                                      std::size_t k) {
  std::vector<Edit> earlier;
  for (const Edit& e : history) {
    if (e.provenance.order_index < target.provenance.order_index) earlier.push_back(e);
  }
  std::stable_sort(earlier.begin(), earlier.end(), [](const Edit& a, const Edit& b) {
    return a.provenance.order_index < b.provenance.order_index;
  });
  if (earlier.size() > k) {
    earlier.erase(earlier.begin(), earlier.end() - static_cast<std::ptrdiff_t>(k));
  }
  return earlier;
}

std::string edit_key(const Edit& e) {
  const auto& p = e.provenance;
  return p.repo_id + '\x1f' + p.file_path + '\x1f' + p.revision_id.value_or("") + '\x1f' +
         std::to_string(p.order_index) + '\x1f' + std::to_string(e.span.start) + ':' +
         std::to_string(e.span.end);
}

namespace {

std::vector<const Edit*> scoped_pool(std::span<const Edit> pool, const AssociationSpec& spec,
                                     const Edit& target, bool apply_repo_scope) {
  std::vector<const Edit*> out;
  const std::string& repo = target.provenance.repo_id;
  for (const Edit& e : pool) {
    if (same_edit(e, target)) continue;
    if (apply_repo_scope) {
      if (spec.strategy == AssociationStrategy::kRandomSameRepo && e.provenance.repo_id != repo)
        continue;
      if (spec.strategy == AssociationStrategy::kRandomOtherRepo && e.provenance.repo_id == repo)
        continue;
    }
    if (spec.pool_filter == PoolFilter::kFilteredOnly &&
        classify_simple(e) != SimpleKind::kNotSimple) {
      continue;
    }
    out.push_back(&e);
  }
  return out;
}

}  // namespace

std::vector<Edit> sample_random_edits(std::span<const Edit> pool, std::size_t n,
                                      const AssociationSpec& spec, const Edit& target) {
  const auto candidates = scoped_pool(pool, spec, target, true);
  if (candidates.size() < n) {
    throw PoolExhausted("random pool has " + std::to_string(candidates.size()) +
                        " eligible edits, need " + std::to_string(n));
  }
  Rng rng = make_rng(spec.seed, edit_key(target));
  std::vector<Edit> out;
  out.reserve(n);
  for (std::size_t i : sample_without_replacement(rng, candidates.size(), n)) {
    out.push_back(*candidates[i]);
  }
  return out;
}

std::vector<Edit> inject_noise(std::span<const Edit> assoc, std::span<const Edit> pool,
                               const AssociationSpec& spec, const Edit& target) {
  std::vector<const Edit*> candidates;
  for (const Edit* e : scoped_pool(pool, spec, target, false)) {
    const bool in_assoc = std::any_of(assoc.begin(), assoc.end(),
                                      [&](const Edit& a) { return same_edit(a, *e); });
    if (!in_assoc) candidates.push_back(e);
  }
  if (candidates.empty()) throw PoolExhausted("no unrelated edit available for noise injection");
  Rng rng = make_rng(spec.seed, edit_key(target) + "#noise");
  std::vector<Edit> out(assoc.begin(), assoc.end());
  out.push_back(*candidates[uniform_index(rng, candidates.size())]);
  return out;
}

}  // namespace grace
