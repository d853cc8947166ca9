#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msds/ibtree.hpp"

namespace msds {

/// Lower bound on the set distance between two pivot balls, clamped at
/// zero: max(||p_a - p_b|| - r_a - r_b, 0).
double node_distance_lb(const PivotBall& a, const PivotBall& b);

struct GraphNode {
    std::string id;
    std::uint32_t size = 0; // |S_i|

    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    std::uint32_t neighbor = 0; // index into nodes (id-sorted order)
    std::uint32_t weight = 0;   // |S_i  intersect  S_j|

    bool operator==(const GraphEdge&) const = default;
};

/// Per-source delta-connectivity graph: an undirected edge joins every pair
/// of datasets at set distance <= delta, weighted by their intersection size.
class DatasetGraph {
  public:
    double delta = 0.0;
    std::uint64_t grid_fp = 0;
    std::uint64_t generation = 0;
    std::uint64_t content_fp = 0;

    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<GraphEdge>& neighbors(std::uint32_t idx) const { return adj_[idx]; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const;

    const GraphNode* node(std::string_view id) const;
    std::int64_t index_of(std::string_view id) const; // -1 when absent
    std::uint32_t degree(std::string_view id) const;

    bool current_for(const IBtree& tree) const;

    bool operator==(const DatasetGraph& o) const {
        return delta == o.delta && grid_fp == o.grid_fp && generation == o.generation &&
               content_fp == o.content_fp && nodes_ == o.nodes_ && adj_ == o.adj_;
    }

  private:
    friend DatasetGraph build_graph(const IBtree&, double);
    friend void update_graph(DatasetGraph&, const IBtree&, const SpatialSet&);
    friend DatasetGraph load_graph(std::span<const std::uint8_t>, const IBtree&);

    std::vector<GraphNode> nodes_; // sorted by id
    std::vector<std::vector<GraphEdge>> adj_; // each sorted by neighbor index
    std::unordered_map<std::string, std::uint32_t> index_;

    std::uint32_t insert_node(std::string id, std::uint32_t size);
    void add_edge(std::uint32_t a, std::uint32_t b, std::uint32_t weight);
    void drop_incident_edges(std::uint32_t idx);
};

DatasetGraph build_graph(const IBtree& tree, double delta);

/// Recomputes the changed dataset's entire incident edge set; the change must
/// already be applied to the tree.
void update_graph(DatasetGraph& graph, const IBtree& tree, const SpatialSet& changed);

std::vector<std::uint8_t> save_graph(const DatasetGraph& graph);

/// Throws StaleGraphError when the snapshot does not match the live index.
DatasetGraph load_graph(std::span<const std::uint8_t> bytes, const IBtree& tree);

} // namespace msds
