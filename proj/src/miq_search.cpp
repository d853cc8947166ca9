#include "msds/miq_search.hpp"

#include <algorithm>

namespace msds {

std::uint32_t mbr_bound(const SpatialSet& query, const Rect& rect) {
    if (!query.mbr.intersects(rect)) return 0;
    Rect overlap{std::max(query.mbr.min_col, rect.min_col), std::max(query.mbr.min_row, rect.min_row),
                 std::min(query.mbr.max_col, rect.max_col), std::min(query.mbr.max_row, rect.max_row)};
    std::uint32_t n = 0;
    for (CellId c : query.cells) {
        auto [col, row] = zorder_decode(c);
        if (overlap.contains(col, row)) ++n;
    }
    return n;
}

LeafBounds leaf_bounds(const SpatialSet& query, const LeafNode& leaf, std::uint32_t capacity) {
    LeafBounds b;
    if (!query.mbr.intersects(leaf.rect)) return b;
    Rect overlap{std::max(query.mbr.min_col, leaf.rect.min_col),
                 std::max(query.mbr.min_row, leaf.rect.min_row),
                 std::min(query.mbr.max_col, leaf.rect.max_col),
                 std::min(query.mbr.max_row, leaf.rect.max_row)};
    for (CellId c : query.cells) {
        auto [col, row] = zorder_decode(c);
        if (!overlap.contains(col, row)) continue;
        const auto* pl = leaf.posting(c);
        if (pl == nullptr) continue;
        ++b.ub;
        if (pl->size() == capacity) ++b.lb;
    }
    return b;
}

namespace {

/// Bounded insert keeping the canonical order; returns true if stored.
struct TopKCollector {
    std::uint32_t k;
    std::vector<TopKEntry> entries; // sorted by miq_rank_less

    bool full() const { return entries.size() == k; }
    const TopKEntry& kth() const { return entries.back(); }

    void offer(TopKEntry e) {
        if (full() && !miq_rank_less(e, kth())) return;
        auto pos = std::lower_bound(entries.begin(), entries.end(), e, miq_rank_less);
        entries.insert(pos, std::move(e));
        if (entries.size() > k) entries.pop_back();
    }
};

struct CandidateLeaf {
    const LeafNode* leaf;
    LeafBounds bounds;
    std::size_t dfs_index;
};

} // namespace

TopKResults miq_search(const IBtree& tree, const SpatialSet& query, std::uint32_t k) {
    if (k < 1) throw InvalidParameterError("k must be >= 1");
    if (query.grid_fp != tree.grid().fingerprint())
        throw IncompatibleGridError("query was rasterized on a different grid");

    TopKResults out;
    out.k = k;
    if (tree.empty()) return out;

    // Branch-and-bound descent: subtrees disjoint from the query MBR are
    // pruned, surviving leaves queue up with their posting-list bounds.
    std::vector<CandidateLeaf> candidates;
    std::vector<const TreeNode*> stack{tree.root()};
    std::size_t dfs = 0;
    while (!stack.empty()) {
        const TreeNode* n = stack.back();
        stack.pop_back();
        if (!n->rect.intersects(query.mbr)) continue;
        if (!n->is_leaf()) {
            const auto* in = static_cast<const InternalNode*>(n);
            stack.push_back(in->right.get());
            stack.push_back(in->left.get());
            continue;
        }
        const auto* leaf = static_cast<const LeafNode*>(n);
        LeafBounds b = leaf_bounds(query, *leaf, tree.capacity());
        if (b.ub == 0) continue;
        candidates.push_back({leaf, b, dfs++});
    }

    // A leaf whose ub falls strictly below the k-th best lower bound (counting
    // each leaf's lb once per child) can hold no result; ties must survive
    // because the id order can still admit them.
    if (candidates.size() > 1) {
        std::vector<std::uint32_t> lbs;
        for (const CandidateLeaf& c : candidates)
            lbs.insert(lbs.end(), c.leaf->children.size(), c.bounds.lb);
        std::uint32_t threshold = 0;
        if (lbs.size() >= k) {
            std::nth_element(lbs.begin(), lbs.begin() + (k - 1), lbs.end(),
                             std::greater<std::uint32_t>());
            threshold = lbs[k - 1];
        }
        std::erase_if(candidates,
                      [&](const CandidateLeaf& c) { return c.bounds.ub < threshold; });
    }

    std::sort(candidates.begin(), candidates.end(), [](const CandidateLeaf& a, const CandidateLeaf& b) {
        if (a.bounds.ub != b.bounds.ub) return a.bounds.ub > b.bounds.ub;
        return a.dfs_index < b.dfs_index;
    });

    TopKCollector collector{k, {}};
    std::vector<std::uint32_t> counts;
    for (const CandidateLeaf& c : candidates) {
        if (collector.full() && c.bounds.ub < collector.kth().intersection) break;

        // One pass over the leaf's posting lists restricted to query cells in
        // the overlap region yields every child's exact intersection.
        const LeafNode& leaf = *c.leaf;
        counts.assign(leaf.children.size(), 0);
        Rect overlap{std::max(query.mbr.min_col, leaf.rect.min_col),
                     std::max(query.mbr.min_row, leaf.rect.min_row),
                     std::min(query.mbr.max_col, leaf.rect.max_col),
                     std::min(query.mbr.max_row, leaf.rect.max_row)};
        for (CellId cell : query.cells) {
            auto [col, row] = zorder_decode(cell);
            if (!overlap.contains(col, row)) continue;
            const auto* pl = leaf.posting(cell);
            if (pl == nullptr) continue;
            for (std::uint32_t idx : *pl) ++counts[idx];
        }
        for (std::uint32_t idx = 0; idx < counts.size(); ++idx) {
            if (counts[idx] == 0) continue;
            collector.offer({leaf.children[idx]->id(), counts[idx]});
        }
    }

    out.entries = std::move(collector.entries);
    return out;
}

} // namespace msds
