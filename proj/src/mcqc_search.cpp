#include "msds/mcqc_search.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace msds {

std::vector<const LeafNode*> find_connect_set(const IBtree& tree, const PivotBall& probe,
                                              double delta) {
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");
    return tree.collect_leaves_within(probe, delta);
}

namespace {

/// The growing union of the query and all selected sets, with the coordinate
/// list kept sorted so exact distances stay cheap across iterations.
struct MergedState {
    Rect rect;
    PivotBall ball;
    CellIdSet covered;
    std::vector<detail::CellCoord> coords; // sorted

    explicit MergedState(const SpatialSet& query) {
        rect = query.mbr;
        ball = rect_ball(rect);
        covered.insert(query.cells.begin(), query.cells.end());
        coords = detail::decode_sorted(query.cells);
    }

    bool connected_to(const SpatialSet& s, double delta_sq) const {
        for (CellId c : s.cells)
            if (covered.contains(c)) return true;
        auto sc = detail::decode_sorted(s.cells);
        return static_cast<double>(detail::min_coord_distance_sq(sc, coords)) <= delta_sq;
    }

    std::uint64_t gain(const SpatialSet& s) const { return coverage_increment(s, covered); }

    void merge(const SpatialSet& s) {
        std::vector<detail::CellCoord> fresh;
        for (CellId c : s.cells) {
            if (covered.insert(c).second) {
                auto [col, row] = zorder_decode(c);
                fresh.push_back({static_cast<std::int32_t>(col), static_cast<std::int32_t>(row)});
            }
        }
        std::sort(fresh.begin(), fresh.end());
        auto mid = coords.insert(coords.end(), fresh.begin(), fresh.end());
        std::inplace_merge(coords.begin(), mid, coords.end());
        rect = rect.united(s.mbr);
        ball = rect_ball(rect);
    }
};

struct BestPick {
    const DatasetNode* node = nullptr;
    std::uint64_t gain = 0;

    /// Lexicographic (gain desc, id asc); determines every greedy tie.
    bool beaten_by(std::uint64_t g, const std::string& id) const {
        if (node == nullptr) return true;
        if (g != gain) return g > gain;
        return id < node->id();
    }
};

void check_query(const IBtree& tree, const SpatialSet& query, std::uint32_t k) {
    if (k < 1) throw InvalidParameterError("k must be >= 1");
    if (query.grid_fp != tree.grid().fingerprint())
        throw IncompatibleGridError("query was rasterized on a different grid");
}

} // namespace

McqcResult gasm(const IBtree& tree, const SpatialSet& query, double delta, std::uint32_t k) {
    check_query(tree, query, k);
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");

    McqcResult result;
    MergedState merged(query);
    std::unordered_set<std::string> picked;
    const double delta_sq = delta * delta;

    for (std::uint32_t round = 0; round < k; ++round) {
        BestPick best;
        for (const LeafNode* leaf : find_connect_set(tree, merged.ball, delta)) {
            // No child of this leaf can gain more than the leaf's key count;
            // equality survives because a tie can still win on id order.
            if (best.node != nullptr && leaf->inv.size() < best.gain) continue;
            for (const auto& child : leaf->children) {
                if (picked.contains(child->id())) continue;
                if (!merged.connected_to(child->set, delta_sq)) continue;
                std::uint64_t g = merged.gain(child->set);
                if (best.beaten_by(g, child->id())) best = {child.get(), g};
            }
        }
        if (best.node == nullptr) {
            result.truncated = true;
            break;
        }
        picked.insert(best.node->id());
        result.selected.push_back({best.node->id(), best.gain});
        merged.merge(best.node->set);
    }

    result.total_coverage = merged.covered.size();
    return result;
}

McqcResult gadg(const IBtree& tree, const DatasetGraph& graph, const SpatialSet& query,
                double delta, std::uint32_t k) {
    check_query(tree, query, k);
    if (graph.delta != delta)
        throw StaleGraphError("dataset graph was built for a different delta");
    if (!graph.current_for(tree))
        throw StaleGraphError("dataset graph is stale with respect to the index");

    McqcResult result;
    MergedState merged(query);
    const double delta_sq = delta * delta;

    // One tree descent finds every dataset connected directly to the query;
    // their query overlaps feed the gain upper bound in later rounds.
    std::unordered_map<std::string, std::uint32_t> query_overlap;
    std::vector<const DatasetNode*> query_adjacent;
    for (const LeafNode* leaf : find_connect_set(tree, query.ball(), delta)) {
        for (const auto& child : leaf->children) {
            if (!merged.connected_to(child->set, delta_sq)) continue;
            query_adjacent.push_back(child.get());
            query_overlap.emplace(child->id(), intersection_count(child->set, query));
        }
    }

    std::unordered_set<std::string> picked;
    std::vector<std::uint32_t> picked_idx;

    for (std::uint32_t round = 0; round < k; ++round) {
        // Candidate pool: sets connected to the query, plus graph neighbors of
        // everything selected so far. dist(S, union R) = min over members, so
        // this pool is exactly gasm's connected candidate set.
        std::unordered_map<std::string, const DatasetNode*> pool;
        for (const DatasetNode* n : query_adjacent)
            if (!picked.contains(n->id())) pool.emplace(n->id(), n);
        for (std::uint32_t idx : picked_idx) {
            for (const GraphEdge& e : graph.neighbors(idx)) {
                const std::string& nid = graph.nodes()[e.neighbor].id;
                if (picked.contains(nid)) continue;
                pool.emplace(nid, tree.find(nid));
            }
        }

        std::vector<const DatasetNode*> ordered;
        ordered.reserve(pool.size());
        for (const auto& [_, n] : pool) ordered.push_back(n);
        std::sort(ordered.begin(), ordered.end(),
                  [](const DatasetNode* a, const DatasetNode* b) { return a->id() < b->id(); });

        BestPick best;
        for (const DatasetNode* cand : ordered) {
            // Edge weights bound the gain from above: g <= |S| - w(S, j).
            std::uint64_t ub = cand->set.size();
            if (auto it = query_overlap.find(cand->id()); it != query_overlap.end())
                ub = std::min(ub, static_cast<std::uint64_t>(cand->set.size() - it->second));
            auto cand_idx = graph.index_of(cand->id());
            if (cand_idx >= 0) {
                const auto& edges = graph.neighbors(static_cast<std::uint32_t>(cand_idx));
                for (std::uint32_t sel : picked_idx) {
                    auto it = std::lower_bound(
                        edges.begin(), edges.end(), sel,
                        [](const GraphEdge& e, std::uint32_t v) { return e.neighbor < v; });
                    if (it != edges.end() && it->neighbor == sel)
                        ub = std::min(ub, static_cast<std::uint64_t>(cand->set.size() - it->weight));
                }
            }
            if (best.node != nullptr && ub < best.gain) continue;
            std::uint64_t g = merged.gain(cand->set);
            if (best.beaten_by(g, cand->id())) best = {cand, g};
        }

        if (best.node == nullptr) {
            result.truncated = true;
            break;
        }
        picked.insert(best.node->id());
        picked_idx.push_back(static_cast<std::uint32_t>(graph.index_of(best.node->id())));
        result.selected.push_back({best.node->id(), best.gain});
        merged.merge(best.node->set);
    }

    result.total_coverage = merged.covered.size();
    return result;
}

} // namespace msds
