#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "msds/errors.hpp"

namespace msds {

/// Z-order (Morton) id of one grid cell. theta <= 15 keeps 2*theta bits in 32.
using CellId = std::uint32_t;

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    bool operator==(const GeoPoint&) const = default;
};

/// Rasterization parameters: a 2^theta x 2^theta grid over a lon/lat box.
struct GridConfig {
    double origin_lon = 0.0; // x0
    double origin_lat = 0.0; // y0
    double width = 0.0;      // w, degrees of longitude
    double height = 0.0;     // h, degrees of latitude
    std::uint32_t theta = 0;

    GridConfig() = default;
    GridConfig(double origin_lon, double origin_lat, double width, double height,
               std::uint32_t theta);

    std::uint32_t side() const { return 1u << theta; }
    double cell_width() const { return width / static_cast<double>(side()); }   // nu
    double cell_height() const { return height / static_cast<double>(side()); } // mu

    std::uint64_t fingerprint() const;

    bool operator==(const GridConfig&) const = default;
};

CellId zorder_encode(std::uint32_t col, std::uint32_t row);
std::pair<std::uint32_t, std::uint32_t> zorder_decode(CellId id);

/// Closed rectangle in integer cell coordinates.
struct Rect {
    std::uint32_t min_col = 0;
    std::uint32_t min_row = 0;
    std::uint32_t max_col = 0;
    std::uint32_t max_row = 0;

    bool contains(std::uint32_t col, std::uint32_t row) const {
        return col >= min_col && col <= max_col && row >= min_row && row <= max_row;
    }
    bool contains(const Rect& o) const {
        return o.min_col >= min_col && o.max_col <= max_col && o.min_row >= min_row &&
               o.max_row <= max_row;
    }
    bool intersects(const Rect& o) const {
        return min_col <= o.max_col && o.min_col <= max_col && min_row <= o.max_row &&
               o.min_row <= max_row;
    }
    Rect united(const Rect& o) const {
        return {std::min(min_col, o.min_col), std::min(min_row, o.min_row),
                std::max(max_col, o.max_col), std::max(max_row, o.max_row)};
    }

    bool operator==(const Rect&) const = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2&) const = default;
};

/// Pivot + radius of a node; the ball encloses every cell center of its subtree.
struct PivotBall {
    Vec2 pivot;
    double radius = 0.0;
};

/// Center and enclosing radius of a cell rect. The radius is half the diagonal
/// measured in cell counts (extent + 1), so cell centers stay strictly inside.
PivotBall rect_ball(const Rect& r);

/// A dataset compressed to the set of occupied grid cells.
struct SpatialSet {
    std::string dataset_id;
    std::vector<CellId> cells; // sorted, duplicate-free, non-empty
    Rect mbr;
    Vec2 pivot;
    double radius = 0.0;
    std::uint64_t grid_fp = 0;

    std::uint32_t size() const { return static_cast<std::uint32_t>(cells.size()); }
    PivotBall ball() const { return {pivot, radius}; }
    bool contains_cell(CellId c) const;
};

SpatialSet rasterize(std::span<const GeoPoint> points, const GridConfig& grid,
                     std::string dataset_id);

/// Builds a set from already-rasterized cell ids (wire payloads, generators).
SpatialSet set_from_cells(std::vector<CellId> cells, const GridConfig& grid,
                          std::string dataset_id);

/// Exact squared minimum distance between cell centers of two sets.
std::int64_t set_distance_sq(const SpatialSet& a, const SpatialSet& b);
double set_distance(const SpatialSet& a, const SpatialSet& b);

bool is_connected(const SpatialSet& a, const SpatialSet& b, double delta);

std::uint32_t intersection_count(const SpatialSet& a, const SpatialSet& b);

using CellIdSet = std::unordered_set<CellId>;

/// Coverage gain g = |candidate \ covered|.
std::uint64_t coverage_increment(const SpatialSet& candidate, const CellIdSet& covered);

bool is_connected_graph(std::span<const SpatialSet> sets, double delta);
bool is_connected_graph(std::span<const SpatialSet* const> sets, double delta);

namespace detail {

struct CellCoord {
    std::int32_t col = 0;
    std::int32_t row = 0;

    friend bool operator<(const CellCoord& a, const CellCoord& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    }
};

std::vector<CellCoord> decode_sorted(std::span<const CellId> cells);

/// Minimum squared distance between two coordinate lists sorted by (col, row).
std::int64_t min_coord_distance_sq(std::span<const CellCoord> a, std::span<const CellCoord> b);

} // namespace detail

} // namespace msds
