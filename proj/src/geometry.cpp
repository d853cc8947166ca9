#include "msds/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msds/bytes.hpp"

namespace msds {

GridConfig::GridConfig(double origin_lon_, double origin_lat_, double width_, double height_,
                       std::uint32_t theta_)
    : origin_lon(origin_lon_), origin_lat(origin_lat_), width(width_), height(height_),
      theta(theta_) {
    if (theta < 1 || theta > 15)
        throw InvalidParameterError("grid resolution theta must be in [1, 15], got " +
                                    std::to_string(theta));
    if (!(width > 0.0) || !(height > 0.0))
        throw InvalidParameterError("grid extent must be positive");
}

std::uint64_t GridConfig::fingerprint() const {
    Fnv1a h;
    h.mix_f64(origin_lon);
    h.mix_f64(origin_lat);
    h.mix_f64(width);
    h.mix_f64(height);
    h.mix_u32(theta);
    return h.value();
}

namespace {

std::uint32_t spread_bits(std::uint32_t v) {
    v &= 0xFFFF;
    v = (v | (v << 8)) & 0x00FF00FF;
    v = (v | (v << 4)) & 0x0F0F0F0F;
    v = (v | (v << 2)) & 0x33333333;
    v = (v | (v << 1)) & 0x55555555;
    return v;
}

std::uint32_t compact_bits(std::uint32_t v) {
    v &= 0x55555555;
    v = (v | (v >> 1)) & 0x33333333;
    v = (v | (v >> 2)) & 0x0F0F0F0F;
    v = (v | (v >> 4)) & 0x00FF00FF;
    v = (v | (v >> 8)) & 0x0000FFFF;
    return v;
}

std::int64_t sq(std::int64_t v) { return v * v; }

} // namespace

CellId zorder_encode(std::uint32_t col, std::uint32_t row) {
    return spread_bits(col) | (spread_bits(row) << 1);
}

std::pair<std::uint32_t, std::uint32_t> zorder_decode(CellId id) {
    return {compact_bits(id), compact_bits(id >> 1)};
}

PivotBall rect_ball(const Rect& r) {
    double dx = static_cast<double>(r.max_col - r.min_col) + 1.0;
    double dy = static_cast<double>(r.max_row - r.min_row) + 1.0;
    Vec2 pivot{(static_cast<double>(r.min_col) + static_cast<double>(r.max_col)) / 2.0,
               (static_cast<double>(r.min_row) + static_cast<double>(r.max_row)) / 2.0};
    return {pivot, 0.5 * std::sqrt(dx * dx + dy * dy)};
}

bool SpatialSet::contains_cell(CellId c) const {
    return std::binary_search(cells.begin(), cells.end(), c);
}

namespace {

SpatialSet finish_set(std::vector<CellId> cells, const GridConfig& grid, std::string dataset_id) {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

    SpatialSet s;
    s.dataset_id = std::move(dataset_id);
    s.cells = std::move(cells);
    s.grid_fp = grid.fingerprint();

    Rect mbr{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<std::uint32_t>::max(),
             0, 0};
    for (CellId c : s.cells) {
        auto [col, row] = zorder_decode(c);
        mbr.min_col = std::min(mbr.min_col, col);
        mbr.max_col = std::max(mbr.max_col, col);
        mbr.min_row = std::min(mbr.min_row, row);
        mbr.max_row = std::max(mbr.max_row, row);
    }
    s.mbr = mbr;
    PivotBall ball = rect_ball(mbr);
    s.pivot = ball.pivot;
    s.radius = ball.radius;
    return s;
}

} // namespace

SpatialSet rasterize(std::span<const GeoPoint> points, const GridConfig& grid,
                     std::string dataset_id) {
    if (points.empty())
        throw EmptyDatasetError("dataset '" + dataset_id + "' has no points");

    const double nu = grid.cell_width();
    const double mu = grid.cell_height();
    const std::uint32_t side = grid.side();

    std::vector<CellId> cells;
    cells.reserve(points.size());
    for (const GeoPoint& p : points) {
        if (!(p.lon >= grid.origin_lon) || !(p.lon < grid.origin_lon + grid.width) ||
            !(p.lat >= grid.origin_lat) || !(p.lat < grid.origin_lat + grid.height)) {
            throw OutOfBoundsError("point (lat=" + std::to_string(p.lat) +
                                   ", lon=" + std::to_string(p.lon) +
                                   ") lies outside the grid extent of dataset '" + dataset_id +
                                   "'");
        }
        auto col = static_cast<std::uint32_t>(std::floor((p.lon - grid.origin_lon) / nu));
        auto row = static_cast<std::uint32_t>(std::floor((p.lat - grid.origin_lat) / mu));
        // Guard the float boundary: in-range points may round up to side.
        col = std::min(col, side - 1);
        row = std::min(row, side - 1);
        cells.push_back(zorder_encode(col, row));
    }
    return finish_set(std::move(cells), grid, std::move(dataset_id));
}

SpatialSet set_from_cells(std::vector<CellId> cells, const GridConfig& grid,
                          std::string dataset_id) {
    if (cells.empty())
        throw EmptyDatasetError("dataset '" + dataset_id + "' has no cells");
    const CellId limit = static_cast<CellId>(1u) << (2 * grid.theta);
    for (CellId c : cells)
        if (c >= limit)
            throw InvalidParameterError("cell id " + std::to_string(c) +
                                        " out of range for theta=" + std::to_string(grid.theta));
    return finish_set(std::move(cells), grid, std::move(dataset_id));
}

namespace detail {

std::vector<CellCoord> decode_sorted(std::span<const CellId> cells) {
    std::vector<CellCoord> coords;
    coords.reserve(cells.size());
    for (CellId c : cells) {
        auto [col, row] = zorder_decode(c);
        coords.push_back({static_cast<std::int32_t>(col), static_cast<std::int32_t>(row)});
    }
    std::sort(coords.begin(), coords.end());
    return coords;
}

std::int64_t min_coord_distance_sq(std::span<const CellCoord> a, std::span<const CellCoord> b) {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (const CellCoord& p : a) {
        auto it = std::lower_bound(b.begin(), b.end(), p.col,
                                   [](const CellCoord& c, std::int32_t col) { return c.col < col; });
        for (auto r = it; r != b.end(); ++r) {
            std::int64_t dc = sq(r->col - p.col);
            if (dc >= best) break;
            best = std::min(best, dc + sq(r->row - p.row));
            if (best == 0) return 0;
        }
        for (auto l = it; l != b.begin();) {
            --l;
            std::int64_t dc = sq(l->col - p.col);
            if (dc >= best) break;
            best = std::min(best, dc + sq(l->row - p.row));
            if (best == 0) return 0;
        }
    }
    return best;
}

} // namespace detail

namespace {

void check_same_grid(const SpatialSet& a, const SpatialSet& b) {
    if (a.grid_fp != b.grid_fp)
        throw IncompatibleGridError("sets '" + a.dataset_id + "' and '" + b.dataset_id +
                                    "' were rasterized on different grids");
}

bool share_cell(const SpatialSet& a, const SpatialSet& b) {
    auto i = a.cells.begin();
    auto j = b.cells.begin();
    while (i != a.cells.end() && j != b.cells.end()) {
        if (*i == *j) return true;
        if (*i < *j)
            ++i;
        else
            ++j;
    }
    return false;
}

} // namespace

std::int64_t set_distance_sq(const SpatialSet& a, const SpatialSet& b) {
    check_same_grid(a, b);
    if (a.cells.empty() || b.cells.empty())
        throw EmptyDatasetError("set distance requires non-empty sets");
    if (!a.mbr.intersects(b.mbr) || !share_cell(a, b)) {
        auto ca = detail::decode_sorted(a.cells);
        auto cb = detail::decode_sorted(b.cells);
        return detail::min_coord_distance_sq(ca, cb);
    }
    return 0;
}

double set_distance(const SpatialSet& a, const SpatialSet& b) {
    return std::sqrt(static_cast<double>(set_distance_sq(a, b)));
}

bool is_connected(const SpatialSet& a, const SpatialSet& b, double delta) {
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");
    return static_cast<double>(set_distance_sq(a, b)) <= delta * delta;
}

std::uint32_t intersection_count(const SpatialSet& a, const SpatialSet& b) {
    check_same_grid(a, b);
    std::uint32_t n = 0;
    auto i = a.cells.begin();
    auto j = b.cells.begin();
    while (i != a.cells.end() && j != b.cells.end()) {
        if (*i == *j) {
            ++n;
            ++i;
            ++j;
        } else if (*i < *j) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

std::uint64_t coverage_increment(const SpatialSet& candidate, const CellIdSet& covered) {
    std::uint64_t gain = 0;
    for (CellId c : candidate.cells)
        if (!covered.contains(c)) ++gain;
    return gain;
}

namespace {

bool connected_graph_impl(std::span<const SpatialSet* const> sets, double delta) {
    if (sets.empty()) throw InvalidParameterError("connected-graph check requires >= 1 set");
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");
    const std::size_t n = sets.size();
    if (n == 1) return true;

    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };

    const double d2 = delta * delta;
    std::size_t components = n;
    for (std::size_t i = 0; i < n && components > 1; ++i) {
        for (std::size_t j = i + 1; j < n && components > 1; ++j) {
            if (find(i) == find(j)) continue;
            if (static_cast<double>(set_distance_sq(*sets[i], *sets[j])) <= d2) {
                parent[find(i)] = find(j);
                --components;
            }
        }
    }
    return components == 1;
}

} // namespace

bool is_connected_graph(std::span<const SpatialSet> sets, double delta) {
    std::vector<const SpatialSet*> ptrs;
    ptrs.reserve(sets.size());
    for (const SpatialSet& s : sets) ptrs.push_back(&s);
    return connected_graph_impl(ptrs, delta);
}

bool is_connected_graph(std::span<const SpatialSet* const> sets, double delta) {
    return connected_graph_impl(sets, delta);
}

} // namespace msds
