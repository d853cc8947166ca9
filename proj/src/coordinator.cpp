#include "msds/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msds {

PivotBall DegRect::ball() const {
    double w = max_lon - min_lon, h = max_lat - min_lat;
    return {{(min_lon + max_lon) / 2.0, (min_lat + max_lat) / 2.0},
            0.5 * std::sqrt(w * w + h * h)};
}

bool global_rank_less(const GlobalMiqEntry& a, const GlobalMiqEntry& b) {
    if (a.intersection != b.intersection) return a.intersection > b.intersection;
    if (a.dataset_id != b.dataset_id) return a.dataset_id < b.dataset_id;
    return a.source_id < b.source_id;
}

namespace {

DegRect descriptor_rect(const SourceDescriptor& d) {
    return {d.min_lon, d.min_lat, d.max_lon, d.max_lat};
}

} // namespace

const SourceDescriptor* Center::source(std::string_view id) const {
    int idx = index_of(id);
    return idx < 0 ? nullptr : &sources_[static_cast<std::size_t>(idx)];
}

int Center::index_of(std::string_view source_id) const {
    for (std::size_t i = 0; i < sources_.size(); ++i)
        if (sources_[i].source_id == source_id) return static_cast<int>(i);
    return -1;
}

Channel* Center::channel(std::string_view source_id) {
    int idx = index_of(source_id);
    return idx < 0 ? nullptr : channels_[static_cast<std::size_t>(idx)].get();
}

const GridConfig& Center::reference_grid() const {
    if (sources_.empty()) throw InvalidParameterError("no sources registered");
    return sources_.front().grid;
}

const SourceDescriptor& Center::attach_source(std::unique_ptr<Channel> channel) {
    Frame banner = channel->read_banner();
    SourceDescriptor desc = decode_register(banner);
    if (index_of(desc.source_id) >= 0)
        throw DuplicateDatasetError("source '" + desc.source_id + "' already registered");
    sources_.push_back(std::move(desc));
    channels_.push_back(std::move(channel));
    rebuild_global_index();
    return sources_.back();
}

// Same split discipline as the local index, in degree space, capacity one.
void Center::rebuild_global_index() {
    struct Item {
        DegRect rect;
        double cx, cy;
        int idx;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < sources_.size(); ++i) {
        DegRect r = descriptor_rect(sources_[i]);
        items.push_back({r, (r.min_lon + r.max_lon) / 2.0, (r.min_lat + r.max_lat) / 2.0,
                         static_cast<int>(i)});
    }

    auto build = [](auto&& self, std::vector<Item> list) -> std::unique_ptr<GlobalNode> {
        auto node = std::make_unique<GlobalNode>();
        node->rect = list.front().rect;
        for (const Item& it : list) node->rect = node->rect.united(it.rect);
        node->ball = node->rect.ball();
        if (list.size() == 1) {
            node->descriptor = list.front().idx;
            return node;
        }

        double min_x = std::numeric_limits<double>::max(), max_x = -min_x;
        double min_y = min_x, max_y = max_x;
        for (const Item& it : list) {
            min_x = std::min(min_x, it.cx);
            max_x = std::max(max_x, it.cx);
            min_y = std::min(min_y, it.cy);
            max_y = std::max(max_y, it.cy);
        }
        const int dim = (max_y - min_y > max_x - min_x) ? 1 : 0;
        const double split = dim == 0 ? node->ball.pivot.x : node->ball.pivot.y;
        std::vector<Item> left, right;
        for (Item& it : list) {
            double c = dim == 0 ? it.cx : it.cy;
            (c <= split ? left : right).push_back(std::move(it));
        }
        if (left.empty() || right.empty()) {
            auto& full = left.empty() ? right : left;
            auto& hole = left.empty() ? left : right;
            std::stable_sort(full.begin(), full.end(), [dim](const Item& a, const Item& b) {
                return (dim == 0 ? a.cx : a.cy) < (dim == 0 ? b.cx : b.cy);
            });
            hole.push_back(full[full.size() / 2]);
            full.erase(full.begin() + static_cast<std::ptrdiff_t>(full.size() / 2));
        }
        node->left = self(self, std::move(left));
        node->right = self(self, std::move(right));
        return node;
    };

    global_root_ = items.empty() ? nullptr : build(build, std::move(items));
}

DegRect Center::global_root_rect() const {
    if (global_root_ == nullptr) throw InvalidParameterError("no sources registered");
    return global_root_->rect;
}

std::vector<std::string> Center::candidate_sources(const DegRect& query_rect, RouteMode mode,
                                                   double delta_deg) const {
    std::vector<std::string> out;
    if (global_root_ == nullptr) return out;
    const PivotBall query_ball = query_rect.ball();

    std::vector<const GlobalNode*> stack{global_root_.get()};
    while (!stack.empty()) {
        const GlobalNode* n = stack.back();
        stack.pop_back();
        if (mode == RouteMode::Miq) {
            if (!n->rect.intersects(query_rect)) continue;
        } else {
            // Keep lb == delta: the bound can be tight in degree space.
            if (ball_gap(n->ball, query_ball) > delta_deg) continue;
        }
        if (n->descriptor >= 0) {
            out.push_back(sources_[static_cast<std::size_t>(n->descriptor)].source_id);
            continue;
        }
        stack.push_back(n->right.get());
        stack.push_back(n->left.get());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<SpatialSet> Center::clip_query(const SpatialSet& query,
                                             std::span<const GeoPoint> raw_points,
                                             const SourceDescriptor& source,
                                             RouteMode mode) const {
    const bool same_grid = query.grid_fp == source.grid.fingerprint();

    if (mode == RouteMode::Mcqc) {
        // Coverage and connectivity reach outside the overlap region, so the
        // full query travels.
        if (same_grid) return query;
        if (raw_points.empty())
            throw InvalidParameterError(
                "query raw points are required for a source with a different grid");
        return rasterize(raw_points, source.grid, query.dataset_id);
    }

    if (same_grid) {
        if (!query.mbr.intersects(source.root_cell_rect)) return std::nullopt;
        Rect overlap{std::max(query.mbr.min_col, source.root_cell_rect.min_col),
                     std::max(query.mbr.min_row, source.root_cell_rect.min_row),
                     std::min(query.mbr.max_col, source.root_cell_rect.max_col),
                     std::min(query.mbr.max_row, source.root_cell_rect.max_row)};
        std::vector<CellId> kept;
        for (CellId c : query.cells) {
            auto [col, row] = zorder_decode(c);
            if (overlap.contains(col, row)) kept.push_back(c);
        }
        if (kept.empty()) return std::nullopt;
        return set_from_cells(std::move(kept), source.grid, query.dataset_id);
    }

    if (raw_points.empty())
        throw InvalidParameterError(
            "query raw points are required for a source with a different grid");
    DegRect region = descriptor_rect(source);
    std::vector<GeoPoint> kept;
    for (const GeoPoint& p : raw_points)
        if (p.lon >= region.min_lon && p.lon <= region.max_lon && p.lat >= region.min_lat &&
            p.lat <= region.max_lat)
            kept.push_back(p);
    if (kept.empty()) return std::nullopt;
    return rasterize(kept, source.grid, query.dataset_id);
}

std::optional<SpatialSet> Center::source_payload(const GlobalQuery& q,
                                                 const SourceDescriptor& src,
                                                 RouteMode mode) const {
    std::string id = q.query_id.empty() ? "query" : q.query_id;
    if (q.grid_fp == src.grid.fingerprint() && !q.cells.empty())
        return clip_query(set_from_cells(q.cells, src.grid, id), q.points, src, mode);

    if (q.points.empty())
        throw InvalidParameterError("query raw points are required for source '" +
                                    src.source_id + "' (different grid)");

    // Re-rasterize on the source grid. MIQ keeps only the overlap with the
    // source region; MCQC keeps everything the source grid can represent.
    const GridConfig& g = src.grid;
    std::vector<GeoPoint> kept;
    for (const GeoPoint& p : q.points) {
        if (mode == RouteMode::Miq) {
            if (p.lon < src.min_lon || p.lon > src.max_lon || p.lat < src.min_lat ||
                p.lat > src.max_lat)
                continue;
        }
        if (p.lon < g.origin_lon || p.lon >= g.origin_lon + g.width || p.lat < g.origin_lat ||
            p.lat >= g.origin_lat + g.height)
            continue;
        kept.push_back(p);
    }
    if (kept.empty()) return std::nullopt;
    return rasterize(kept, g, id);
}

DegRect Center::query_deg_rect(const GlobalQuery& q) const {
    if (!q.points.empty()) {
        DegRect r{q.points.front().lon, q.points.front().lat, q.points.front().lon,
                  q.points.front().lat};
        for (const GeoPoint& p : q.points) {
            r.min_lon = std::min(r.min_lon, p.lon);
            r.max_lon = std::max(r.max_lon, p.lon);
            r.min_lat = std::min(r.min_lat, p.lat);
            r.max_lat = std::max(r.max_lat, p.lat);
        }
        return r;
    }
    // Cells: locate the matching grid among the sources.
    for (const SourceDescriptor& d : sources_) {
        if (d.grid.fingerprint() != q.grid_fp) continue;
        const GridConfig& g = d.grid;
        auto s = set_from_cells(q.cells, g, "q");
        return {g.origin_lon + s.mbr.min_col * g.cell_width(),
                g.origin_lat + s.mbr.min_row * g.cell_height(),
                g.origin_lon + (s.mbr.max_col + 1.0) * g.cell_width(),
                g.origin_lat + (s.mbr.max_row + 1.0) * g.cell_height()};
    }
    throw InvalidParameterError("query grid matches no registered source");
}

double Center::delta_to_degrees(double delta_cells) const {
    const GridConfig& g = reference_grid();
    return delta_cells * std::max(g.cell_width(), g.cell_height());
}

namespace {

double delta_for_source(double delta_cells, double delta_deg, const GlobalQuery& q,
                        const SourceDescriptor& src) {
    if (q.grid_fp == src.grid.fingerprint()) return delta_cells;
    return delta_deg / std::max(src.grid.cell_width(), src.grid.cell_height());
}

} // namespace

GlobalTopK Center::global_miq(const GlobalQuery& query, std::uint32_t k) {
    if (k < 1) throw InvalidParameterError("k must be >= 1");
    if (sources_.empty()) throw InvalidParameterError("no sources registered");
    poll_deltas(); // absorb pending descriptor refreshes before routing

    GlobalTopK out;
    out.k = k;
    DegRect qrect = query_deg_rect(query);
    std::vector<std::string> failed;
    std::vector<GlobalMiqEntry> merged;

    for (const std::string& sid : candidate_sources(qrect, RouteMode::Miq)) {
        int idx = index_of(sid);
        const SourceDescriptor& src = sources_[static_cast<std::size_t>(idx)];
        auto clipped = source_payload(query, src, RouteMode::Miq);
        if (!clipped.has_value()) continue;

        QueryEnvelope env;
        env.mode = QueryMode::Miq;
        env.query_id = clipped->dataset_id;
        env.k = k;
        env.grid_fp = src.grid.fingerprint();
        env.cells = clipped->cells;
        try {
            Frame resp = channels_[static_cast<std::size_t>(idx)]->round_trip(encode_query(env));
            if (resp.type == MsgType::Error) throw_remote_error(decode_error(resp));
            ResultBody body = decode_result(resp);
            for (const auto& e : body.miq.entries)
                merged.push_back({sid, e.dataset_id, e.intersection});
        } catch (const TransportError&) {
            failed.push_back(sid);
        }
    }
    if (!failed.empty()) {
        std::string msg = "sources failed during MIQ fan-out:";
        for (const auto& s : failed) msg += " " + s;
        throw PartialResultError(msg, std::move(failed));
    }

    std::sort(merged.begin(), merged.end(), global_rank_less);
    if (merged.size() > k) merged.resize(k);
    out.entries = std::move(merged);
    return out;
}

GlobalMcqcResult Center::global_mcqc(const GlobalQuery& query, double delta_cells,
                                     std::uint32_t k) {
    if (k < 1) throw InvalidParameterError("k must be >= 1");
    if (delta_cells < 0.0) throw InvalidParameterError("delta must be >= 0");
    if (sources_.empty()) throw InvalidParameterError("no sources registered");
    poll_deltas();

    const double delta_deg = delta_to_degrees(delta_cells);
    DegRect qrect = query_deg_rect(query);
    std::vector<std::string> failed;
    GlobalMcqcResult best;
    bool have = false;

    for (const std::string& sid : candidate_sources(qrect, RouteMode::Mcqc, delta_deg)) {
        int idx = index_of(sid);
        const SourceDescriptor& src = sources_[static_cast<std::size_t>(idx)];
        auto full = source_payload(query, src, RouteMode::Mcqc);
        if (!full.has_value()) continue;

        QueryEnvelope env;
        env.mode = QueryMode::Mcqc;
        env.query_id = full->dataset_id;
        env.k = k;
        env.delta = delta_for_source(delta_cells, delta_deg, query, src);
        env.grid_fp = src.grid.fingerprint();
        env.cells = full->cells;
        try {
            Frame resp = channels_[static_cast<std::size_t>(idx)]->round_trip(encode_query(env));
            if (resp.type == MsgType::Error) throw_remote_error(decode_error(resp));
            ResultBody body = decode_result(resp);
            bool better = !have || body.mcqc.total_coverage > best.result.total_coverage ||
                          (body.mcqc.total_coverage == best.result.total_coverage &&
                           sid < best.source_id);
            if (better) {
                best.source_id = sid;
                best.result = body.mcqc;
                have = true;
            }
        } catch (const TransportError&) {
            failed.push_back(sid);
        }
    }
    if (!failed.empty()) {
        std::string msg = "sources failed during MCQC fan-out:";
        for (const auto& s : failed) msg += " " + s;
        throw PartialResultError(msg, std::move(failed));
    }
    return best;
}

std::string Center::register_live(const GlobalQuery& query, QueryMode mode, std::uint32_t k,
                                  double delta_cells) {
    if (sources_.empty()) throw InvalidParameterError("no sources registered");
    poll_deltas();
    std::string reg_id = query.query_id.empty() ? "live-query" : query.query_id;
    if (live_.contains(reg_id))
        throw DuplicateDatasetError("live query '" + reg_id + "' already registered");

    const double delta_deg = mode == QueryMode::Mcqc ? delta_to_degrees(delta_cells) : 0.0;

    LiveState state;
    state.mode = mode;
    state.k = k;
    std::vector<std::string> failed;

    // Live queries go to every source in full: later updates can move
    // datasets into regions a registration-time clip would have dropped.
    for (std::size_t idx = 0; idx < sources_.size(); ++idx) {
        const SourceDescriptor& src = sources_[idx];
        const std::string& sid = src.source_id;
        auto payload = source_payload(query, src, RouteMode::Mcqc); // full form
        if (!payload.has_value()) continue;

        QueryEnvelope env;
        env.mode = mode;
        env.query_id = reg_id;
        env.live = true;
        env.k = k;
        env.delta = mode == QueryMode::Mcqc ? delta_for_source(delta_cells, delta_deg, query, src)
                                            : 0.0;
        env.grid_fp = src.grid.fingerprint();
        env.cells = payload->cells;
        try {
            Frame resp = channels_[idx]->round_trip(encode_query(env));
            if (resp.type == MsgType::Error) throw_remote_error(decode_error(resp));
            ResultBody body = decode_result(resp);
            LiveSnapshot snap;
            snap.mode = mode;
            if (mode == QueryMode::Miq)
                snap.miq = body.miq;
            else
                snap.mcqc = body.mcqc;
            state.per_source.emplace(sid, std::move(snap));
        } catch (const TransportError&) {
            failed.push_back(sid);
        }
    }
    if (!failed.empty()) {
        std::string msg = "sources failed during live registration:";
        for (const auto& s : failed) msg += " " + s;
        throw PartialResultError(msg, std::move(failed));
    }
    live_.emplace(reg_id, std::move(state));
    return reg_id;
}

std::vector<std::string> Center::poll_deltas() {
    std::vector<std::string> changed;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const std::string& sid = sources_[i].source_id;
        std::vector<Frame> frames;
        try {
            frames = channels_[i]->drain_async();
        } catch (const TransportError&) {
            continue; // unreachable sources surface on the query path
        }
        for (const Frame& f : frames) {
            if (f.type == MsgType::Register) {
                // Updates can grow a source region; refresh its descriptor.
                SourceDescriptor d = decode_register(f);
                if (d.source_id == sid) {
                    sources_[i] = std::move(d);
                    rebuild_global_index();
                }
                continue;
            }
            if (f.type != MsgType::ResultDelta) continue;
            DeltaBody d = decode_delta(f);
            auto it = live_.find(d.registration_id);
            if (it == live_.end()) continue;
            LiveSnapshot snap;
            snap.mode = it->second.mode;
            if (snap.mode == QueryMode::Miq)
                snap.miq = d.body.miq;
            else
                snap.mcqc = d.body.mcqc;
            it->second.per_source[sid] = std::move(snap);
            changed.push_back(d.registration_id);
        }
    }
    std::sort(changed.begin(), changed.end());
    changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
    return changed;
}

GlobalTopK Center::live_miq_snapshot(std::string_view registration_id) const {
    auto it = live_.find(std::string(registration_id));
    if (it == live_.end() || it->second.mode != QueryMode::Miq)
        throw NotFoundError("no live MIQ query '" + std::string(registration_id) + "'");
    GlobalTopK out;
    out.k = it->second.k;
    for (const auto& [sid, snap] : it->second.per_source)
        for (const auto& e : snap.miq.entries) out.entries.push_back({sid, e.dataset_id, e.intersection});
    std::sort(out.entries.begin(), out.entries.end(), global_rank_less);
    if (out.entries.size() > out.k) out.entries.resize(out.k);
    return out;
}

GlobalMcqcResult Center::live_mcqc_snapshot(std::string_view registration_id) const {
    auto it = live_.find(std::string(registration_id));
    if (it == live_.end() || it->second.mode != QueryMode::Mcqc)
        throw NotFoundError("no live MCQC query '" + std::string(registration_id) + "'");
    GlobalMcqcResult best;
    bool have = false;
    for (const auto& [sid, snap] : it->second.per_source) {
        bool better = !have || snap.mcqc.total_coverage > best.result.total_coverage ||
                      (snap.mcqc.total_coverage == best.result.total_coverage &&
                       sid < best.source_id);
        if (better) {
            best.source_id = sid;
            best.result = snap.mcqc;
            have = true;
        }
    }
    return best;
}

CommMeter Center::meter_total() const {
    CommMeter total;
    for (const auto& ch : channels_) total += ch->meter();
    return total;
}

std::vector<SourceBytes> Center::meters_by_source() const {
    std::vector<SourceBytes> out;
    for (std::size_t i = 0; i < sources_.size(); ++i)
        out.push_back({sources_[i].source_id, channels_[i]->meter().total_bytes()});
    return out;
}

void Center::reset_meters() {
    for (auto& ch : channels_) ch->meter().reset();
}

} // namespace msds
