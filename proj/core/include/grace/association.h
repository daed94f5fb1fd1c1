#pragma once

// Choosing the associated edits that condition a prediction: spatial and
// temporal neighbours, plus the random and noise-injection variants used
// by the relevance ablations.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grace/edit_model.h"

namespace grace {

enum class AssociationStrategy { kSpatial, kTemporal, kRandomSameRepo, kRandomOtherRepo, kNone };
enum class PoolFilter { kFilteredOnly, kUnfiltered };

std::string_view to_string(AssociationStrategy s);
std::string_view to_string(PoolFilter f);
std::optional<AssociationStrategy> parse_strategy(std::string_view s);
std::optional<PoolFilter> parse_pool_filter(std::string_view s);

struct AssociationSpec {
  AssociationStrategy strategy = AssociationStrategy::kSpatial;
  std::size_t radius_lines = 10;
  std::size_t max_edits = 3;
  PoolFilter pool_filter = PoolFilter::kFilteredOnly;
  std::uint64_t seed = 0;
  // Append one unrelated edit after the strategy's selection.
  bool inject_noise = false;
};

// Edits other than `target` whose span intersects
// [target.start - radius, target.end + radius), top-to-bottom. The test is
// symmetric: each of two edits is in the other's window or neither is.
std::vector<Edit> spatial_associates(std::span<const Edit> all_edits_in_revision,
                                     const Edit& target, std::size_t radius);

// spatial_associates capped at `max_edits`, keeping the nearest (ties to the
// upper edit) and returning them in document order.
std::vector<Edit> nearest_spatial_associates(std::span<const Edit> all_edits_in_revision,
                                             const Edit& target, std::size_t radius,
                                             std::size_t max_edits);

// The k edits with the largest order_index strictly below the target's,
// oldest first.
std::vector<Edit> temporal_associates(std::span<const Edit> history, const Edit& target,
                                      std::size_t k);

// Stable key of a located edit; seeds per-target sampling.
std::string edit_key(const Edit& e);

// n distinct edits drawn uniformly from the pool after scoping it to the
// spec (repo scope for the Random* strategies, simple-edit removal for
// FilteredOnly) and removing `target`. Throws PoolExhausted.
std::vector<Edit> sample_random_edits(std::span<const Edit> pool, std::size_t n,
                                      const AssociationSpec& spec, const Edit& target);

// assoc plus one edit sampled from pool \ (assoc ∪ {target}), appended last.
std::vector<Edit> inject_noise(std::span<const Edit> assoc, std::span<const Edit> pool,
                               const AssociationSpec& spec, const Edit& target);

}  // namespace grace
