#include "msds/gen.hpp"

#include <algorithm>
#include <cmath>

namespace msds {

namespace {

GeoPoint clamp_into(double lat, double lon, double extent) {
    const double hi = extent * (1.0 - 1e-9);
    return {std::clamp(lat, 0.0, hi), std::clamp(lon, 0.0, hi)};
}

std::vector<GeoPoint> gen_cluster(std::mt19937_64& rng, const SynthSpec& spec, std::size_t n) {
    std::uniform_real_distribution<double> anchor(0.0, spec.extent);
    std::normal_distribution<double> jitter(0.0, spec.extent / 80.0);
    const double clat = anchor(rng), clon = anchor(rng);
    std::vector<GeoPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back(clamp_into(clat + jitter(rng), clon + jitter(rng), spec.extent));
    return pts;
}

std::vector<GeoPoint> gen_corridor(std::mt19937_64& rng, const SynthSpec& spec, std::size_t n) {
    std::uniform_real_distribution<double> anchor(0.0, spec.extent);
    std::uniform_real_distribution<double> heading(0.0, 2.0 * 3.14159265358979);
    std::normal_distribution<double> cross(0.0, spec.extent / 400.0);
    const double length = spec.extent / 4.0;
    double lat = anchor(rng), lon = anchor(rng);
    const double dir = heading(rng);
    std::vector<GeoPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n - 1, 1));
        pts.push_back(clamp_into(lat + t * length * std::sin(dir) + cross(rng),
                                 lon + t * length * std::cos(dir) + cross(rng), spec.extent));
    }
    return pts;
}

std::vector<GeoPoint> gen_uniform(std::mt19937_64& rng, const SynthSpec& spec, std::size_t n) {
    std::uniform_real_distribution<double> any(0.0, spec.extent * (1.0 - 1e-9));
    std::vector<GeoPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back({any(rng), any(rng)});
    return pts;
}

} // namespace

std::vector<CorpusEntry> synth_corpus(std::uint64_t seed, const SynthSpec& spec) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> npts(spec.min_points, spec.max_points);
    std::uniform_real_distribution<double> which(0.0, 1.0);

    std::vector<CorpusEntry> out;
    out.reserve(spec.datasets);
    for (std::size_t i = 0; i < spec.datasets; ++i) {
        CorpusEntry e;
        e.id = "set" + std::to_string(i);
        const std::size_t n = npts(rng);
        const double roll = which(rng);
        if (roll < spec.cluster_fraction)
            e.points = gen_cluster(rng, spec, n);
        else if (roll < spec.cluster_fraction + spec.corridor_fraction)
            e.points = gen_corridor(rng, spec, n);
        else
            e.points = gen_uniform(rng, spec, n);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<GeoPoint> synth_query_points(std::mt19937_64& rng, const SynthSpec& spec) {
    std::uniform_real_distribution<double> which(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> npts(spec.min_points, spec.max_points);
    return which(rng) < 0.5 ? gen_corridor(rng, spec, npts(rng))
                            : gen_cluster(rng, spec, npts(rng));
}

SpatialSet random_cell_set(std::mt19937_64& rng, const GridConfig& grid, std::string id,
                           std::uint32_t max_cells, std::uint32_t spread) {
    const std::uint32_t side = grid.side();
    std::uniform_int_distribution<std::uint32_t> anchor(0, side - 1);
    std::uniform_int_distribution<std::uint32_t> count(1, max_cells);
    std::uniform_int_distribution<std::int32_t> offset(-static_cast<std::int32_t>(spread),
                                                       static_cast<std::int32_t>(spread));
    const auto ac = static_cast<std::int32_t>(anchor(rng));
    const auto ar = static_cast<std::int32_t>(anchor(rng));
    std::vector<CellId> cells;
    const std::uint32_t n = count(rng);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::int32_t col = std::clamp(ac + offset(rng), 0, static_cast<std::int32_t>(side - 1));
        std::int32_t row = std::clamp(ar + offset(rng), 0, static_cast<std::int32_t>(side - 1));
        cells.push_back(
            zorder_encode(static_cast<std::uint32_t>(col), static_cast<std::uint32_t>(row)));
    }
    return set_from_cells(std::move(cells), grid, std::move(id));
}

std::vector<SpatialSet> random_cell_corpus(std::mt19937_64& rng, const GridConfig& grid,
                                           std::size_t count, std::uint32_t max_cells,
                                           std::uint32_t spread) {
    std::vector<SpatialSet> sets;
    sets.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        sets.push_back(random_cell_set(rng, grid, "d" + std::to_string(i), max_cells, spread));
    return sets;
}

} // namespace msds
