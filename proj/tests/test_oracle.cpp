#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "msds/oracle.hpp"
#include "support.hpp"

using namespace msds;
using test::make_grid;
using test::set_of;

TEST_CASE("brute miq") {
    auto grid = make_grid(6);

    SUBCASE("empty corpus yields nothing") {
        auto q = set_of(grid, "q", {{1, 1}});
        CHECK(oracle::brute_miq({}, q, 5).entries.empty());
    }

    SUBCASE("corpus holding only the query returns it in full") {
        auto q = set_of(grid, "q", {{1, 1}, {2, 2}});
        std::vector<SpatialSet> sets{q};
        auto res = oracle::brute_miq(sets, q, 3);
        REQUIRE(res.entries.size() == 1);
        CHECK(res.entries[0] == TopKEntry{"q", 2});
    }

    SUBCASE("hash-set counting agrees with a nested-loop count") {
        std::mt19937_64 rng(181);
        for (int i = 0; i < 100; ++i) {
            auto a = test::random_set(rng, grid, "a", 15);
            auto b = test::random_set(rng, grid, "b", 15);
            std::uint64_t slow = 0;
            for (CellId x : a.cells)
                for (CellId y : b.cells)
                    if (x == y) ++slow;
            CHECK(oracle::naive_intersection(a, b) == slow);
        }
    }
}

TEST_CASE("brute mcqc") {
    auto grid = make_grid(6);

    SUBCASE("everything selectable under a huge delta covers the full union") {
        std::mt19937_64 rng(191);
        auto sets = test::random_corpus(rng, grid, 6, 8);
        auto q = test::random_set(rng, grid, "q", 8);
        CellIdSet all(q.cells.begin(), q.cells.end());
        for (const auto& s : sets) all.insert(s.cells.begin(), s.cells.end());
        auto res = oracle::brute_mcqc(sets, q, 1e9, 10);
        CHECK(res.coverage == all.size());
    }

    SUBCASE("nothing within delta leaves the bare query and an empty witness") {
        auto q = set_of(grid, "q", {{1, 1}});
        std::vector<SpatialSet> sets{set_of(grid, "far", {{60, 60}})};
        auto res = oracle::brute_mcqc(sets, q, 1.0, 2);
        CHECK(res.coverage == q.size());
        CHECK(res.witness.empty());
    }

    SUBCASE("guard rejects oversized enumerations") {
        std::mt19937_64 rng(193);
        auto sets = test::random_corpus(rng, grid, 30, 4);
        auto q = set_of(grid, "q", {{1, 1}});
        CHECK_THROWS_AS(oracle::brute_mcqc(sets, q, 1.0, 3), GuardExceededError);
    }
}

TEST_CASE("standard greedy") {
    auto grid = make_grid(6);

    SUBCASE("no connected candidate truncates immediately") {
        auto q = set_of(grid, "q", {{1, 1}});
        std::vector<SpatialSet> sets{set_of(grid, "far", {{60, 60}})};
        auto res = oracle::standard_greedy(sets, q, 1.0, 2);
        CHECK(res.truncated);
        CHECK(res.selected.empty());
        CHECK(res.total_coverage == q.size());
    }

    SUBCASE("single connected set is picked at k=1") {
        auto q = set_of(grid, "q", {{1, 1}});
        auto near = set_of(grid, "near", {{2, 1}, {3, 1}});
        std::vector<SpatialSet> sets{near, set_of(grid, "far", {{60, 60}})};
        auto res = oracle::standard_greedy(sets, q, 1.0, 1);
        REQUIRE(res.selected.size() == 1);
        CHECK(res.selected[0] == McqcSelection{"near", 2});
    }
}
