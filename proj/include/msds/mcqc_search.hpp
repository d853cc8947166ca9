#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msds/dataset_graph.hpp"
#include "msds/geometry.hpp"
#include "msds/ibtree.hpp"

namespace msds {

struct McqcSelection {
    std::string dataset_id;
    std::uint64_t increment = 0; // coverage gain g at selection time

    bool operator==(const McqcSelection&) const = default;
};

struct McqcResult {
    std::vector<McqcSelection> selected;
    std::uint64_t total_coverage = 0; // |S_Q  union  selected sets|
    bool truncated = false;           // stopped early: no connected candidate left

    bool operator==(const McqcResult&) const = default;
};

/// Leaves that may hold a dataset within delta of the probe (ball-bound
/// descent; a superset of the truly connected ones).
std::vector<const LeafNode*> find_connect_set(const IBtree& tree, const PivotBall& probe,
                                              double delta);

/// Greedy with spatial merge: k tree descents over a growing merged node.
McqcResult gasm(const IBtree& tree, const SpatialSet& query, double delta, std::uint32_t k);

/// Greedy over the dataset graph: one tree descent, then adjacency expansion.
/// Produces exactly gasm's output.
McqcResult gadg(const IBtree& tree, const DatasetGraph& graph, const SpatialSet& query,
                double delta, std::uint32_t k);

} // namespace msds
