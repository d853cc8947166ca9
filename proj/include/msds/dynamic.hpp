#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msds/dataset_graph.hpp"
#include "msds/ibtree.hpp"
#include "msds/mcqc_search.hpp"
#include "msds/miq_search.hpp"

namespace msds {

enum class UpdateKind : std::uint8_t { Insert = 0, Update = 1 };

/// One streamed dataset change; carries raw points or a pre-rasterized set.
struct UpdateEvent {
    UpdateKind kind = UpdateKind::Update;
    std::string dataset_id;
    std::uint64_t sequence = 0; // strictly increasing per source
    std::vector<GeoPoint> points;
    std::vector<CellId> cells;

    bool has_points() const { return !points.empty(); }
};

enum class QueryMode : std::uint8_t { Miq = 0, Mcqc = 1 };

struct LiveQuerySpec {
    QueryMode mode = QueryMode::Miq;
    std::uint32_t k = 10;
    double delta = 0.0; // cell units, MCQC only
};

/// Snapshot of one query's current answer; exactly one side is meaningful.
struct LiveSnapshot {
    QueryMode mode = QueryMode::Miq;
    TopKResults miq;
    McqcResult mcqc;

    bool operator==(const LiveSnapshot&) const = default;
};

struct ResultDelta {
    std::string registration_id;
    LiveSnapshot snapshot;
};

/// Per-source runtime: the index, one dataset graph per live delta, and the
/// registered live queries kept equal to a fresh static search at all times.
class SourceStore {
  public:
    explicit SourceStore(IBtree tree);

    const IBtree& tree() const { return tree_; }
    const GridConfig& grid() const { return tree_.grid(); }

    /// Builds the graph on first use; apply_update keeps it current.
    const DatasetGraph& graph_for(double delta);

    /// Installs a previously persisted graph (must match the tree).
    void preload_graph(DatasetGraph graph);

    LiveSnapshot run_static(const SpatialSet& query, const LiveQuerySpec& spec);

    /// Registers and returns the initial snapshot; the query set's own id is
    /// the registration id and must be unique.
    std::pair<std::string, LiveSnapshot> register_live_query(SpatialSet query,
                                                             const LiveQuerySpec& spec);

    std::vector<ResultDelta> apply_update(const UpdateEvent& event);
    std::vector<ResultDelta> apply_batch(std::span<const UpdateEvent> events);

    /// Applies one event without flushing deltas; pair with emit_pending to
    /// coalesce deltas across a batch of events.
    void ingest(const UpdateEvent& event) { apply_one(event); }

    /// Deltas for every live query whose snapshot changed since its last
    /// emission; nothing is emitted for unchanged queries.
    std::vector<ResultDelta> emit_pending();

    const LiveSnapshot* live_snapshot(std::string_view registration_id) const;
    std::size_t live_query_count() const { return live_.size(); }
    std::uint64_t last_sequence() const { return last_sequence_; }

  private:
    struct LiveQuery {
        SpatialSet query;
        LiveQuerySpec spec;
        LiveSnapshot snapshot;      // always equals a fresh static search
        LiveSnapshot last_emitted;  // snapshot as of the last delta sent
    };

    IBtree tree_;
    std::map<double, DatasetGraph> graphs_;
    std::map<std::string, LiveQuery> live_;
    std::uint64_t last_sequence_ = 0;

    SpatialSet materialize(const UpdateEvent& event) const;
    void apply_one(const UpdateEvent& event);
    void reevaluate(LiveQuery& lq, const DatasetNode& changed);
    bool miq_filtered(const LiveQuery& lq, const DatasetNode& changed) const;
    bool mcqc_filtered(const LiveQuery& lq, const DatasetNode& changed) const;
};

} // namespace msds
