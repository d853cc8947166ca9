#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msds/geometry.hpp"

namespace msds::test {

inline GridConfig make_grid(std::uint32_t theta) {
    // One square degree per cell keeps cell units and degrees aligned.
    return GridConfig(0.0, 0.0, static_cast<double>(1u << theta),
                      static_cast<double>(1u << theta), theta);
}

inline SpatialSet set_of(const GridConfig& grid, std::string id,
                         const std::vector<std::pair<std::uint32_t, std::uint32_t>>& coords) {
    std::vector<CellId> cells;
    cells.reserve(coords.size());
    for (auto [col, row] : coords) cells.push_back(zorder_encode(col, row));
    return set_from_cells(std::move(cells), grid, std::move(id));
}

/// Clustered random set: cells scattered around a random anchor.
inline SpatialSet random_set(std::mt19937_64& rng, const GridConfig& grid, std::string id,
                             std::uint32_t max_cells, std::uint32_t spread = 8) {
    const std::uint32_t side = grid.side();
    std::uniform_int_distribution<std::uint32_t> anchor(0, side - 1);
    std::uniform_int_distribution<std::uint32_t> count(1, max_cells);
    std::uniform_int_distribution<std::int32_t> offset(-static_cast<std::int32_t>(spread),
                                                       static_cast<std::int32_t>(spread));
    const std::int32_t ac = static_cast<std::int32_t>(anchor(rng));
    const std::int32_t ar = static_cast<std::int32_t>(anchor(rng));
    std::vector<CellId> cells;
    const std::uint32_t n = count(rng);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::int32_t col = std::clamp(ac + offset(rng), 0, static_cast<std::int32_t>(side - 1));
        std::int32_t row = std::clamp(ar + offset(rng), 0, static_cast<std::int32_t>(side - 1));
        cells.push_back(zorder_encode(static_cast<std::uint32_t>(col),
                                      static_cast<std::uint32_t>(row)));
    }
    return set_from_cells(std::move(cells), grid, std::move(id));
}

inline std::vector<SpatialSet> random_corpus(std::mt19937_64& rng, const GridConfig& grid,
                                             std::size_t count, std::uint32_t max_cells,
                                             std::uint32_t spread = 8) {
    std::vector<SpatialSet> sets;
    sets.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        sets.push_back(random_set(rng, grid, "d" + std::to_string(i), max_cells, spread));
    return sets;
}

} // namespace msds::test
