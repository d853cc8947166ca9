#include "msds/dynamic.hpp"

#include <algorithm>

namespace msds {

SourceStore::SourceStore(IBtree tree) : tree_(std::move(tree)) {}

const DatasetGraph& SourceStore::graph_for(double delta) {
    auto it = graphs_.find(delta);
    if (it == graphs_.end()) it = graphs_.emplace(delta, build_graph(tree_, delta)).first;
    return it->second;
}

void SourceStore::preload_graph(DatasetGraph graph) {
    if (!graph.current_for(tree_))
        throw StaleGraphError("preloaded graph does not match this source's index");
    graphs_.insert_or_assign(graph.delta, std::move(graph));
}

LiveSnapshot SourceStore::run_static(const SpatialSet& query, const LiveQuerySpec& spec) {
    LiveSnapshot snap;
    snap.mode = spec.mode;
    if (spec.mode == QueryMode::Miq) {
        snap.miq = miq_search(tree_, query, spec.k);
    } else if (tree_.empty()) {
        snap.mcqc.truncated = true;
        snap.mcqc.total_coverage = query.size();
    } else {
        snap.mcqc = gadg(tree_, graph_for(spec.delta), query, spec.delta, spec.k);
    }
    return snap;
}

std::pair<std::string, LiveSnapshot> SourceStore::register_live_query(SpatialSet query,
                                                                      const LiveQuerySpec& spec) {
    std::string id = query.dataset_id;
    if (live_.contains(id))
        throw DuplicateDatasetError("live query '" + id + "' is already registered");
    LiveSnapshot snap = run_static(query, spec);
    live_.emplace(id, LiveQuery{std::move(query), spec, snap, snap});
    return {std::move(id), std::move(snap)};
}

const LiveSnapshot* SourceStore::live_snapshot(std::string_view registration_id) const {
    auto it = live_.find(std::string(registration_id));
    return it == live_.end() ? nullptr : &it->second.snapshot;
}

SpatialSet SourceStore::materialize(const UpdateEvent& event) const {
    if (event.has_points()) return rasterize(event.points, tree_.grid(), event.dataset_id);
    return set_from_cells(event.cells, tree_.grid(), event.dataset_id);
}

void SourceStore::apply_one(const UpdateEvent& event) {
    if (event.sequence <= last_sequence_)
        throw InvalidParameterError("update sequence " + std::to_string(event.sequence) +
                                    " is not increasing");
    SpatialSet set = materialize(event);
    if (event.kind == UpdateKind::Insert)
        tree_.insert(set);
    else
        tree_.update(set);
    last_sequence_ = event.sequence;

    // Graphs are source-wide and must stay current even for filtered queries.
    for (auto& [_, graph] : graphs_) update_graph(graph, tree_, set);

    const DatasetNode* node = tree_.find(event.dataset_id);
    for (auto& [_, lq] : live_) reevaluate(lq, *node);
}

bool SourceStore::miq_filtered(const LiveQuery& lq, const DatasetNode& changed) const {
    for (const auto& e : lq.snapshot.miq.entries)
        if (e.dataset_id == changed.id()) return false; // may leave or change score

    if (!changed.rect().intersects(lq.query.mbr)) return true;
    std::uint32_t bound = mbr_bound(lq.query, changed.rect());
    if (bound == 0) return true;

    const auto& entries = lq.snapshot.miq.entries;
    if (entries.size() == lq.spec.k) {
        const TopKEntry& kth = entries.back();
        if (bound < kth.intersection) return true;
        if (bound == kth.intersection && changed.id() > kth.dataset_id) return true;
    }
    return false;
}

bool SourceStore::mcqc_filtered(const LiveQuery& lq, const DatasetNode& changed) const {
    const auto& res = lq.snapshot.mcqc;
    std::uint64_t min_increment = UINT64_MAX;
    for (const auto& sel : res.selected) {
        if (sel.dataset_id == changed.id()) return false; // member: always re-run
        min_increment = std::min(min_increment, sel.increment);
    }

    // Ball over the query plus every selected member; a change farther than
    // delta from it can neither join nor alter the greedy run.
    Rect merged = lq.query.mbr;
    for (const auto& sel : res.selected) merged = merged.united(tree_.find(sel.dataset_id)->rect());
    if (ball_gap(changed.ball(), rect_ball(merged)) > lq.spec.delta) return true;

    // A complete result cannot be altered by a set smaller than every
    // accepted increment (ties can still swap on id order).
    if (!res.truncated && res.selected.size() == lq.spec.k &&
        static_cast<std::uint64_t>(changed.set.size()) < min_increment)
        return true;
    return false;
}

void SourceStore::reevaluate(LiveQuery& lq, const DatasetNode& changed) {
    if (lq.spec.mode == QueryMode::Miq) {
        if (miq_filtered(lq, changed)) return;
        TopKResults fresh = miq_search(tree_, lq.query, lq.spec.k);
        lq.snapshot.miq = std::move(fresh);
    } else {
        if (mcqc_filtered(lq, changed)) return;
        McqcResult fresh = gadg(tree_, graph_for(lq.spec.delta), lq.query, lq.spec.delta, lq.spec.k);
        lq.snapshot.mcqc = std::move(fresh);
    }
}

std::vector<ResultDelta> SourceStore::emit_pending() {
    std::vector<ResultDelta> out;
    for (auto& [id, lq] : live_) {
        if (lq.snapshot == lq.last_emitted) continue;
        lq.last_emitted = lq.snapshot;
        out.push_back(ResultDelta{id, lq.snapshot});
    }
    return out;
}

std::vector<ResultDelta> SourceStore::apply_update(const UpdateEvent& event) {
    apply_one(event);
    return emit_pending();
}

std::vector<ResultDelta> SourceStore::apply_batch(std::span<const UpdateEvent> events) {
    for (const UpdateEvent& e : events) apply_one(e);
    return emit_pending();
}

} // namespace msds
