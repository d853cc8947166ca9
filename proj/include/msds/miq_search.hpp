#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msds/ibtree.hpp"

namespace msds {

/// Per-leaf intersection bounds derived from the inverted index: ub counts
/// query cells present among the leaf's posting keys, lb counts query cells
/// whose posting list is full (every child contains them).
struct LeafBounds {
    std::uint32_t lb = 0;
    std::uint32_t ub = 0;
};

struct TopKEntry {
    std::string dataset_id;
    std::uint32_t intersection = 0;

    bool operator==(const TopKEntry&) const = default;
};

/// Top-k entries ordered by (intersection desc, dataset_id asc). Datasets
/// with zero intersection never appear.
struct TopKResults {
    std::uint32_t k = 0;
    std::vector<TopKEntry> entries;

    bool operator==(const TopKResults&) const = default;
};

/// Ranks (a) strictly before (b) under the canonical MIQ order.
inline bool miq_rank_less(const TopKEntry& a, const TopKEntry& b) {
    if (a.intersection != b.intersection) return a.intersection > b.intersection;
    return a.dataset_id < b.dataset_id;
}

/// Count of query cells falling inside the overlap of the query MBR and rect.
std::uint32_t mbr_bound(const SpatialSet& query, const Rect& rect);

LeafBounds leaf_bounds(const SpatialSet& query, const LeafNode& leaf, std::uint32_t capacity);

TopKResults miq_search(const IBtree& tree, const SpatialSet& query, std::uint32_t k);

} // namespace msds
