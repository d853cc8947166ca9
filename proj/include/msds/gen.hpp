#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "msds/corpus.hpp"
#include "msds/geometry.hpp"

namespace msds {

/// Seeded synthetic corpora mixing three archetypes: clustered point clouds
/// (city-like), grid-aligned corridors (transit-line-like), and uniform
/// noise. Points land in the degree box [0, extent) x [0, extent).
struct SynthSpec {
    std::size_t datasets = 100;
    double extent = 10.0;
    std::size_t min_points = 20;
    std::size_t max_points = 200;
    double cluster_fraction = 0.5;
    double corridor_fraction = 0.3; // remainder is uniform noise
};

std::vector<CorpusEntry> synth_corpus(std::uint64_t seed, const SynthSpec& spec);

/// One synthetic query: a corridor or cluster near a seeded anchor.
std::vector<GeoPoint> synth_query_points(std::mt19937_64& rng, const SynthSpec& spec);

/// Cell-level random set for index-level tests and oracle instances.
SpatialSet random_cell_set(std::mt19937_64& rng, const GridConfig& grid, std::string id,
                           std::uint32_t max_cells, std::uint32_t spread);

std::vector<SpatialSet> random_cell_corpus(std::mt19937_64& rng, const GridConfig& grid,
                                           std::size_t count, std::uint32_t max_cells,
                                           std::uint32_t spread);

} // namespace msds
