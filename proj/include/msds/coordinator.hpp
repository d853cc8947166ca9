#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msds/transport.hpp"
#include "msds/wire.hpp"

namespace msds {

/// Closed rectangle in degrees.
struct DegRect {
    double min_lon = 0, min_lat = 0, max_lon = 0, max_lat = 0;

    bool intersects(const DegRect& o) const {
        return min_lon <= o.max_lon && o.min_lon <= max_lon && min_lat <= o.max_lat &&
               o.min_lat <= max_lat;
    }
    DegRect united(const DegRect& o) const {
        return {std::min(min_lon, o.min_lon), std::min(min_lat, o.min_lat),
                std::max(max_lon, o.max_lon), std::max(max_lat, o.max_lat)};
    }
    PivotBall ball() const;
};

enum class RouteMode { Miq, Mcqc };

struct GlobalTopK {
    std::uint32_t k = 0;
    std::vector<GlobalMiqEntry> entries; // (intersection desc, dataset asc, source asc)

    bool operator==(const GlobalTopK&) const = default;
};

struct GlobalMcqcResult {
    std::string source_id; // empty when no source produced a result
    McqcResult result;

    bool operator==(const GlobalMcqcResult&) const = default;
};

/// A query as the user hands it to the center: raw points, or cells already
/// rasterized on a known grid (its fingerprint identifies which).
struct GlobalQuery {
    std::string query_id;
    std::vector<GeoPoint> points;
    std::vector<CellId> cells;
    std::uint64_t grid_fp = 0;
};

/// The interaction center: holds source root descriptors in a small
/// degree-space tree, routes queries to candidate sources only, clips MIQ
/// queries to the overlap region, and merges per-source answers.
class Center {
  public:
    /// Performs the banner handshake on the channel and registers the source.
    const SourceDescriptor& attach_source(std::unique_ptr<Channel> channel);

    std::size_t source_count() const { return sources_.size(); }
    const std::vector<SourceDescriptor>& sources() const { return sources_; }
    const SourceDescriptor* source(std::string_view id) const;
    const GridConfig& reference_grid() const;

    /// Root rect of the global index (covers every registered source).
    DegRect global_root_rect() const;

    /// Sources that may hold an answer; delta is in degrees for MCQC.
    std::vector<std::string> candidate_sources(const DegRect& query_rect, RouteMode mode,
                                               double delta_deg = 0.0) const;

    /// MIQ clip: query cells inside the overlap with the source region, on
    /// the source's grid. Returns nothing when the clip is empty (the source
    /// is dropped). MCQC transmits the full query.
    std::optional<SpatialSet> clip_query(const SpatialSet& query,
                                         std::span<const GeoPoint> raw_points,
                                         const SourceDescriptor& source, RouteMode mode) const;

    GlobalTopK global_miq(const GlobalQuery& query, std::uint32_t k);
    GlobalMcqcResult global_mcqc(const GlobalQuery& query, double delta_cells, std::uint32_t k);

    /// Dynamic mode: registers the query once at every candidate source.
    /// Returns the registration id.
    std::string register_live(const GlobalQuery& query, QueryMode mode, std::uint32_t k,
                              double delta_cells = 0.0);

    /// Drains delta frames from all sources; returns ids of live queries
    /// whose merged snapshot changed.
    std::vector<std::string> poll_deltas();

    GlobalTopK live_miq_snapshot(std::string_view registration_id) const;
    GlobalMcqcResult live_mcqc_snapshot(std::string_view registration_id) const;

    /// Sum of all per-source channel meters (center side).
    CommMeter meter_total() const;
    std::vector<SourceBytes> meters_by_source() const;
    void reset_meters();

    Channel* channel(std::string_view source_id);

  private:
    struct GlobalNode {
        DegRect rect;
        PivotBall ball;
        int descriptor = -1; // leaf: index into sources_
        std::unique_ptr<GlobalNode> left, right;
    };

    struct LiveState {
        QueryMode mode = QueryMode::Miq;
        std::uint32_t k = 0;
        std::map<std::string, LiveSnapshot> per_source;
    };

    std::vector<SourceDescriptor> sources_;
    std::vector<std::unique_ptr<Channel>> channels_; // parallel to sources_
    std::unique_ptr<GlobalNode> global_root_;
    std::map<std::string, LiveState> live_;
    std::map<std::string, std::string> reg_source_of_reg_; // wire reg id -> source

    void rebuild_global_index();
    int index_of(std::string_view source_id) const;

    /// The query as transmitted to one source: clipped for MIQ, full for
    /// MCQC, re-rasterized when grids differ. Nothing when the source can
    /// receive no representable part of the query.
    std::optional<SpatialSet> source_payload(const GlobalQuery& q, const SourceDescriptor& src,
                                             RouteMode mode) const;
    DegRect query_deg_rect(const GlobalQuery& q) const;
    double delta_to_degrees(double delta_cells) const;
};

/// Canonical global MIQ order: intersection desc, dataset asc, source asc.
bool global_rank_less(const GlobalMiqEntry& a, const GlobalMiqEntry& b);

} // namespace msds
