#include "msds/dataset_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "msds/bytes.hpp"

namespace msds {

double node_distance_lb(const PivotBall& a, const PivotBall& b) {
    return std::max(ball_gap(a, b), 0.0);
}

std::size_t DatasetGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& edges : adj_) n += edges.size();
    return n / 2;
}

const GraphNode* DatasetGraph::node(std::string_view id) const {
    auto idx = index_of(id);
    return idx < 0 ? nullptr : &nodes_[static_cast<std::size_t>(idx)];
}

std::int64_t DatasetGraph::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::uint32_t DatasetGraph::degree(std::string_view id) const {
    auto idx = index_of(id);
    if (idx < 0) throw NotFoundError("dataset '" + std::string(id) + "' is not in the graph");
    return static_cast<std::uint32_t>(adj_[static_cast<std::size_t>(idx)].size());
}

bool DatasetGraph::current_for(const IBtree& tree) const {
    return grid_fp == tree.grid().fingerprint() && generation == tree.generation() &&
           content_fp == tree.content_fingerprint();
}

std::uint32_t DatasetGraph::insert_node(std::string id, std::uint32_t size) {
    auto pos = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                                [](const GraphNode& n, const std::string& v) { return n.id < v; });
    auto idx = static_cast<std::uint32_t>(pos - nodes_.begin());
    nodes_.insert(pos, GraphNode{std::move(id), size});
    adj_.emplace(adj_.begin() + idx);
    // Re-point every stored index at or beyond the insertion slot.
    for (auto& edges : adj_)
        for (GraphEdge& e : edges)
            if (e.neighbor >= idx) ++e.neighbor;
    index_.clear();
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i].id] = i;
    return idx;
}

void DatasetGraph::add_edge(std::uint32_t a, std::uint32_t b, std::uint32_t weight) {
    auto ins = [&](std::uint32_t from, std::uint32_t to) {
        auto& edges = adj_[from];
        auto pos = std::lower_bound(edges.begin(), edges.end(), to,
                                    [](const GraphEdge& e, std::uint32_t v) { return e.neighbor < v; });
        edges.insert(pos, GraphEdge{to, weight});
    };
    ins(a, b);
    ins(b, a);
}

void DatasetGraph::drop_incident_edges(std::uint32_t idx) {
    for (const GraphEdge& e : adj_[idx]) {
        auto& back = adj_[e.neighbor];
        std::erase_if(back, [idx](const GraphEdge& be) { return be.neighbor == idx; });
    }
    adj_[idx].clear();
}

namespace {

/// Candidate dataset nodes within delta of the probe, by pruned tree descent.
std::vector<const DatasetNode*> connect_candidates(const IBtree& tree, const PivotBall& probe,
                                                   double delta) {
    std::vector<const DatasetNode*> out;
    for (const LeafNode* leaf : tree.collect_leaves_within(probe, delta))
        for (const auto& ch : leaf->children) out.push_back(ch.get());
    return out;
}

} // namespace

DatasetGraph build_graph(const IBtree& tree, double delta) {
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");
    if (tree.empty()) throw EmptyDatasetError("cannot build a dataset graph over an empty index");

    DatasetGraph g;
    g.delta = delta;
    g.grid_fp = tree.grid().fingerprint();
    g.generation = tree.generation();
    g.content_fp = tree.content_fingerprint();

    const auto ids = tree.dataset_ids_sorted();
    g.nodes_.reserve(ids.size());
    for (const auto& id : ids) {
        const DatasetNode* n = tree.find(id);
        g.nodes_.push_back(GraphNode{id, n->set.size()});
    }
    g.adj_.assign(g.nodes_.size(), {});
    for (std::uint32_t i = 0; i < g.nodes_.size(); ++i) g.index_[g.nodes_[i].id] = i;

    const double d2 = delta * delta;
    std::vector<bool> visited(g.nodes_.size(), false);
    for (std::uint32_t i = 0; i < g.nodes_.size(); ++i) {
        const DatasetNode* ni = tree.find(g.nodes_[i].id);
        for (const DatasetNode* cand : connect_candidates(tree, ni->ball(), delta)) {
            auto j = static_cast<std::uint32_t>(g.index_.at(cand->id()));
            if (j == i || visited[j]) continue;
            if (static_cast<double>(set_distance_sq(ni->set, cand->set)) <= d2)
                g.add_edge(i, j, intersection_count(ni->set, cand->set));
        }
        visited[i] = true;
    }
    return g;
}

void update_graph(DatasetGraph& g, const IBtree& tree, const SpatialSet& changed) {
    const DatasetNode* node = tree.find(changed.dataset_id);
    if (node == nullptr)
        throw NotFoundError("dataset '" + changed.dataset_id + "' is not indexed");

    auto found = g.index_of(changed.dataset_id);
    std::uint32_t idx = found >= 0 ? static_cast<std::uint32_t>(found)
                                   : g.insert_node(changed.dataset_id, changed.size());
    g.nodes_[idx].size = changed.size();
    g.drop_incident_edges(idx);

    const double d2 = g.delta * g.delta;
    for (const DatasetNode* cand : connect_candidates(tree, node->ball(), g.delta)) {
        auto j = static_cast<std::uint32_t>(g.index_.at(cand->id()));
        if (j == idx) continue;
        if (static_cast<double>(set_distance_sq(node->set, cand->set)) <= d2)
            g.add_edge(idx, j, intersection_count(node->set, cand->set));
    }

    g.generation = tree.generation();
    g.content_fp = tree.content_fingerprint();
}

// ---------------------------------------------------------------------------
// Snapshot format: "MSDG" magic, u16 version, delta f64, grid/content
// fingerprints, generation, node table, then forward (i < j) edge lists with
// delta-encoded neighbor indices.

namespace {

constexpr char kMagic[4] = {'M', 'S', 'D', 'G'};
constexpr std::uint16_t kVersion = 1;

} // namespace

std::vector<std::uint8_t> save_graph(const DatasetGraph& g) {
    ByteWriter w;
    w.put_raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.put_u16(kVersion);
    w.put_f64(g.delta);
    w.put_u64(g.grid_fp);
    w.put_u64(g.generation);
    w.put_u64(g.content_fp);
    w.put_u32(static_cast<std::uint32_t>(g.node_count()));
    for (const GraphNode& n : g.nodes()) {
        w.put_string(n.id);
        w.put_u32(n.size);
    }
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
        const auto& edges = g.neighbors(i);
        auto first_fwd = std::lower_bound(edges.begin(), edges.end(), i,
                                          [](const GraphEdge& e, std::uint32_t v) { return e.neighbor <= v; });
        w.put_u32(static_cast<std::uint32_t>(edges.end() - first_fwd));
        std::uint32_t prev = 0;
        for (auto it = first_fwd; it != edges.end(); ++it) {
            w.put_varint(it->neighbor - prev);
            prev = it->neighbor;
            w.put_u32(it->weight);
        }
    }
    return std::move(w.buf);
}

DatasetGraph load_graph(std::span<const std::uint8_t> bytes, const IBtree& tree) {
    ByteReader r(bytes);
    r.require(4);
    if (std::memcmp(r.data.data(), kMagic, 4) != 0) throw FormatError("bad graph magic");
    r.pos += 4;
    if (r.get_u16() != kVersion) throw FormatError("unsupported graph format version");

    DatasetGraph g;
    g.delta = r.get_f64();
    g.grid_fp = r.get_u64();
    g.generation = r.get_u64();
    g.content_fp = r.get_u64();

    std::uint32_t n = r.get_u32();
    g.nodes_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string id = r.get_string();
        std::uint32_t size = r.get_u32();
        g.nodes_.push_back(GraphNode{std::move(id), size});
    }
    for (std::uint32_t i = 1; i < n; ++i)
        if (!(g.nodes_[i - 1].id < g.nodes_[i].id)) throw FormatError("node table not id-sorted");
    g.adj_.assign(n, {});
    for (std::uint32_t i = 0; i < n; ++i) g.index_[g.nodes_[i].id] = i;

    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t fwd = r.get_u32();
        std::uint32_t prev = 0;
        for (std::uint32_t e = 0; e < fwd; ++e) {
            auto step = static_cast<std::uint32_t>(r.get_varint());
            if (e > 0 && step == 0) throw FormatError("duplicate edge index");
            prev += step;
            std::uint32_t weight = r.get_u32();
            if (prev <= i || prev >= n) throw FormatError("edge index out of order");
            g.add_edge(i, prev, weight);
        }
    }
    if (!r.done()) throw FormatError("trailing bytes after graph snapshot");

    if (!g.current_for(tree))
        throw StaleGraphError("persisted dataset graph does not match the live index");
    return g;
}

} // namespace msds
