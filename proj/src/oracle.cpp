#include "msds/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_set>

namespace msds::oracle {

CellId naive_zorder_encode(std::uint32_t col, std::uint32_t row) {
    CellId id = 0;
    for (int bit = 0; bit < 16; ++bit) {
        id |= static_cast<CellId>((col >> bit) & 1u) << (2 * bit);
        id |= static_cast<CellId>((row >> bit) & 1u) << (2 * bit + 1);
    }
    return id;
}

std::pair<std::uint32_t, std::uint32_t> naive_zorder_decode(CellId id) {
    std::uint32_t col = 0, row = 0;
    for (int bit = 0; bit < 16; ++bit) {
        col |= ((id >> (2 * bit)) & 1u) << bit;
        row |= ((id >> (2 * bit + 1)) & 1u) << bit;
    }
    return {col, row};
}

std::uint64_t naive_intersection(const SpatialSet& a, const SpatialSet& b) {
    std::unordered_set<CellId> lookup(a.cells.begin(), a.cells.end());
    std::uint64_t n = 0;
    for (CellId c : b.cells)
        if (lookup.contains(c)) ++n;
    return n;
}

std::int64_t naive_distance_sq(const SpatialSet& a, const SpatialSet& b) {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (CellId ca : a.cells) {
        auto [ac, ar] = naive_zorder_decode(ca);
        for (CellId cb : b.cells) {
            auto [bc, br] = naive_zorder_decode(cb);
            std::int64_t dc = static_cast<std::int64_t>(ac) - static_cast<std::int64_t>(bc);
            std::int64_t dr = static_cast<std::int64_t>(ar) - static_cast<std::int64_t>(br);
            best = std::min(best, dc * dc + dr * dr);
        }
    }
    return best;
}

bool naive_connected_graph(std::span<const SpatialSet* const> sets, double delta) {
    const std::size_t n = sets.size();
    if (n == 0) return false;
    const double d2 = delta * delta;

    // Plain breadth-first search over the pairwise connectivity relation.
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> frontier{0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        std::size_t cur = frontier.back();
        frontier.pop_back();
        for (std::size_t j = 0; j < n; ++j) {
            if (seen[j]) continue;
            if (static_cast<double>(naive_distance_sq(*sets[cur], *sets[j])) <= d2) {
                seen[j] = true;
                ++reached;
                frontier.push_back(j);
            }
        }
    }
    return reached == n;
}

TopKResults brute_miq(std::span<const SpatialSet> sets, const SpatialSet& query, std::uint32_t k) {
    if (k < 1) throw InvalidParameterError("k must be >= 1");
    if (sets.size() > 100000) throw GuardExceededError("brute_miq guard: too many sets");

    std::vector<TopKEntry> all;
    for (const SpatialSet& s : sets) {
        auto n = static_cast<std::uint32_t>(naive_intersection(s, query));
        if (n > 0) all.push_back({s.dataset_id, n});
    }
    std::sort(all.begin(), all.end(), miq_rank_less);
    if (all.size() > k) all.resize(k);
    return TopKResults{k, std::move(all)};
}

namespace {

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > (static_cast<unsigned __int128>(1) << 62))
            return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r);
}

/// Connectivity of a subset (plus the query, bit n) over a precomputed
/// adjacency mask table, by BFS over bits.
bool mask_connected(std::uint32_t members, std::uint32_t query_bit,
                    std::span<const std::uint32_t> adjacency) {
    std::uint32_t all = members | query_bit;
    std::uint32_t seen = query_bit;
    std::uint32_t frontier = query_bit;
    while (frontier != 0) {
        std::uint32_t next = 0;
        std::uint32_t f = frontier;
        while (f != 0) {
            int bit = std::countr_zero(f);
            f &= f - 1;
            next |= adjacency[static_cast<std::size_t>(bit)] & all & ~seen;
        }
        seen |= next;
        frontier = next;
    }
    return seen == all;
}

} // namespace

BruteMcqcResult brute_mcqc(std::span<const SpatialSet> sets, const SpatialSet& query, double delta,
                           std::uint32_t k) {
    const auto m = static_cast<std::uint32_t>(sets.size());
    if (m > 24) throw GuardExceededError("brute_mcqc guard: too many sets for enumeration");
    if (choose(m, std::min(k, m)) > 1000000ull)
        throw GuardExceededError("brute_mcqc guard: C(m, k) too large");
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");

    // Pairwise connectivity masks; slot m is the query.
    const double d2 = delta * delta;
    std::vector<std::uint32_t> adjacency(m + 1, 0);
    for (std::uint32_t i = 0; i < m; ++i) {
        for (std::uint32_t j = i + 1; j < m; ++j) {
            if (static_cast<double>(naive_distance_sq(sets[i], sets[j])) <= d2) {
                adjacency[i] |= 1u << j;
                adjacency[j] |= 1u << i;
            }
        }
        if (static_cast<double>(naive_distance_sq(sets[i], query)) <= d2) {
            adjacency[i] |= 1u << m;
            adjacency[m] |= 1u << i;
        }
    }

    auto coverage_of = [&](std::uint32_t members) {
        std::unordered_set<CellId> u(query.cells.begin(), query.cells.end());
        std::uint32_t f = members;
        while (f != 0) {
            int bit = std::countr_zero(f);
            f &= f - 1;
            const auto& cells = sets[static_cast<std::size_t>(bit)].cells;
            u.insert(cells.begin(), cells.end());
        }
        return static_cast<std::uint64_t>(u.size());
    };

    auto witness_of = [&](std::uint32_t members) {
        std::vector<std::string> ids;
        std::uint32_t f = members;
        while (f != 0) {
            int bit = std::countr_zero(f);
            f &= f - 1;
            ids.push_back(sets[static_cast<std::size_t>(bit)].dataset_id);
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    };

    BruteMcqcResult best;
    best.coverage = query.cells.size();
    best.witness = {};

    // Enumerate every subset of size <= k; sizes below k matter because a
    // bigger subset can break the connectivity constraint.
    auto consider = [&](std::uint32_t members) {
        if (!mask_connected(members, 1u << m, adjacency)) return;
        std::uint64_t cov = coverage_of(members);
        if (cov < best.coverage) return;
        auto ids = witness_of(members);
        if (cov > best.coverage ||
            std::lexicographical_compare(ids.begin(), ids.end(), best.witness.begin(),
                                         best.witness.end())) {
            best.coverage = cov;
            best.witness = std::move(ids);
        }
    };

    const std::uint32_t limit = std::min(k, m);
    std::vector<std::uint32_t> idx;
    // Iterative subset enumeration by size.
    for (std::uint32_t size = 1; size <= limit; ++size) {
        idx.assign(size, 0);
        for (std::uint32_t i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            std::uint32_t members = 0;
            for (std::uint32_t i : idx) members |= 1u << i;
            consider(members);
            std::int64_t pos = size - 1;
            while (pos >= 0 && idx[static_cast<std::size_t>(pos)] ==
                                   m - size + static_cast<std::uint32_t>(pos))
                --pos;
            if (pos < 0) break;
            ++idx[static_cast<std::size_t>(pos)];
            for (auto i = static_cast<std::uint32_t>(pos) + 1; i < size; ++i)
                idx[i] = idx[i - 1] + 1;
        }
    }
    return best;
}

McqcResult standard_greedy(std::span<const SpatialSet> sets, const SpatialSet& query, double delta,
                           std::uint32_t k) {
    if (k < 1) throw InvalidParameterError("k must be >= 1");
    if (delta < 0.0) throw InvalidParameterError("connectivity threshold delta must be >= 0");
    const double d2 = delta * delta;

    McqcResult result;
    std::unordered_set<CellId> covered(query.cells.begin(), query.cells.end());
    std::vector<const SpatialSet*> members{&query};
    std::vector<bool> picked(sets.size(), false);

    for (std::uint32_t round = 0; round < k; ++round) {
        std::int64_t best_gain = -1;
        std::size_t best_idx = sets.size();
        for (std::size_t i = 0; i < sets.size(); ++i) {
            if (picked[i]) continue;
            bool connected = false;
            for (const SpatialSet* mem : members) {
                if (static_cast<double>(naive_distance_sq(sets[i], *mem)) <= d2) {
                    connected = true;
                    break;
                }
            }
            if (!connected) continue;
            std::int64_t gain = 0;
            for (CellId c : sets[i].cells)
                if (!covered.contains(c)) ++gain;
            if (gain > best_gain ||
                (gain == best_gain && sets[i].dataset_id < sets[best_idx].dataset_id)) {
                best_gain = gain;
                best_idx = i;
            }
        }
        if (best_idx == sets.size()) {
            result.truncated = true;
            break;
        }
        picked[best_idx] = true;
        members.push_back(&sets[best_idx]);
        covered.insert(sets[best_idx].cells.begin(), sets[best_idx].cells.end());
        result.selected.push_back({sets[best_idx].dataset_id, static_cast<std::uint64_t>(best_gain)});
    }

    result.total_coverage = covered.size();
    return result;
}

} // namespace msds::oracle
