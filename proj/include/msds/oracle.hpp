#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msds/geometry.hpp"
#include "msds/mcqc_search.hpp"
#include "msds/miq_search.hpp"

namespace msds::oracle {

// Reference implementations for tests and acceptance runs. Everything here is
// written against the definitions directly — naive Morton codec, hash-set
// intersections, nested-loop distances, BFS connectivity — and shares no code
// with the indexed search paths it is used to check.

CellId naive_zorder_encode(std::uint32_t col, std::uint32_t row);
std::pair<std::uint32_t, std::uint32_t> naive_zorder_decode(CellId id);

std::uint64_t naive_intersection(const SpatialSet& a, const SpatialSet& b);

/// Exhaustive pairwise min squared distance between cell centers.
std::int64_t naive_distance_sq(const SpatialSet& a, const SpatialSet& b);

bool naive_connected_graph(std::span<const SpatialSet* const> sets, double delta);

struct BruteMcqcResult {
    std::uint64_t coverage = 0;               // |S_Q  union  selection|
    std::vector<std::string> witness;         // lexicographically smallest optimal id set
};

TopKResults brute_miq(std::span<const SpatialSet> sets, const SpatialSet& query, std::uint32_t k);

BruteMcqcResult brute_mcqc(std::span<const SpatialSet> sets, const SpatialSet& query, double delta,
                           std::uint32_t k);

/// Index-free greedy with GASM's selection rule and tie-break.
McqcResult standard_greedy(std::span<const SpatialSet> sets, const SpatialSet& query, double delta,
                           std::uint32_t k);

struct OracleReport {
    std::uint64_t instance_fp = 0;
    std::string oracle_answer;
    std::string system_answer;
    bool match = false;
    std::optional<double> ratio; // greedy coverage / optimal coverage, when computed
};

} // namespace msds::oracle
