#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>
#include <unordered_set>

#include "msds/mcqc_search.hpp"
#include "msds/oracle.hpp"
#include "support.hpp"

using namespace msds;
using test::make_grid;
using test::set_of;

TEST_CASE("find connect set") {
    auto grid = make_grid(8);
    std::mt19937_64 rng(139);
    auto sets = test::random_corpus(rng, grid, 50, 15);
    auto tree = IBtree::build(sets, 4, grid);

    SUBCASE("probe far beyond the root returns nothing") {
        PivotBall probe{{1e7, 1e7}, 1.0};
        CHECK(find_connect_set(tree, probe, 2.0).empty());
    }

    SUBCASE("huge delta returns every leaf") {
        PivotBall probe{{0.0, 0.0}, 0.0};
        CHECK(find_connect_set(tree, probe, 1e18).size() == tree.leaf_count());
    }

    SUBCASE("every dataset within delta lives in a returned leaf") {
        for (int round = 0; round < 30; ++round) {
            auto probe_set = test::random_set(rng, grid, "p", 10);
            const double delta = 3.0;
            auto leaves = find_connect_set(tree, probe_set.ball(), delta);
            std::set<std::string> reachable;
            for (const LeafNode* leaf : leaves)
                for (const auto& ch : leaf->children) reachable.insert(ch->id());
            for (const auto& s : sets) {
                double d = std::sqrt(static_cast<double>(oracle::naive_distance_sq(s, probe_set)));
                if (d <= delta) CHECK(reachable.contains(s.dataset_id));
            }
        }
    }
}

TEST_CASE("gasm") {
    auto grid = make_grid(8);

    SUBCASE("nothing connected means an empty truncated result") {
        auto a = set_of(grid, "a", {{200, 200}});
        auto tree = IBtree::build({a}, 2, grid);
        auto query = set_of(grid, "q", {{10, 10}});
        auto res = gasm(tree, query, 2.0, 3);
        CHECK(res.selected.empty());
        CHECK(res.truncated);
        CHECK(res.total_coverage == query.size());
    }

    SUBCASE("query covering everything still selects zero-gain candidates") {
        std::vector<SpatialSet> sets{set_of(grid, "a", {{10, 10}}), set_of(grid, "b", {{11, 10}})};
        auto tree = IBtree::build(sets, 2, grid);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> all;
        for (std::uint32_t c = 8; c < 16; ++c)
            for (std::uint32_t r = 8; r < 16; ++r) all.push_back({c, r});
        auto query = set_of(grid, "q", all);
        auto res = gasm(tree, query, 2.0, 2);
        CHECK(res.selected.size() == 2);
        for (const auto& sel : res.selected) CHECK(sel.increment == 0);
        CHECK(res.total_coverage == query.size());
        CHECK_FALSE(res.truncated);
    }

    SUBCASE("parameter validation") {
        auto a = set_of(grid, "a", {{1, 1}});
        auto tree = IBtree::build({a}, 2, grid);
        CHECK_THROWS_AS(gasm(tree, a, 1.0, 0), InvalidParameterError);
        CHECK_THROWS_AS(gasm(tree, a, -1.0, 1), InvalidParameterError);
    }

    SUBCASE("agrees with the index-free standard greedy") {
        std::mt19937_64 rng(149);
        for (int round = 0; round < 60; ++round) {
            auto sets = test::random_corpus(rng, grid, 40, 15);
            auto tree = IBtree::build(sets, 4, grid);
            auto query = test::random_set(rng, grid, "q", 15);
            for (double delta : {0.0, 2.0, 6.0}) {
                CHECK(gasm(tree, query, delta, 4) == oracle::standard_greedy(sets, query, delta, 4));
            }
        }
    }

    SUBCASE("selected prefixes stay connected and increments add up") {
        std::mt19937_64 rng(151);
        for (int round = 0; round < 30; ++round) {
            auto sets = test::random_corpus(rng, grid, 30, 15);
            auto tree = IBtree::build(sets, 4, grid);
            auto query = test::random_set(rng, grid, "q", 15);
            const double delta = 4.0;
            auto res = gasm(tree, query, delta, 5);

            std::vector<SpatialSet> prefix{query};
            std::uint64_t total = query.size();
            for (const auto& sel : res.selected) {
                prefix.push_back(tree.find(sel.dataset_id)->set);
                CHECK(is_connected_graph(prefix, delta));
                total += sel.increment;
            }
            CHECK(res.total_coverage == total);
        }
    }

    SUBCASE("each pick dominates every connected candidate") {
        std::mt19937_64 rng(157);
        for (int round = 0; round < 20; ++round) {
            auto sets = test::random_corpus(rng, grid, 25, 12);
            auto tree = IBtree::build(sets, 3, grid);
            auto query = test::random_set(rng, grid, "q", 12);
            const double delta = 3.0;
            const double d2 = delta * delta;
            auto res = gasm(tree, query, delta, 4);

            std::unordered_set<CellId> covered(query.cells.begin(), query.cells.end());
            std::vector<const SpatialSet*> members{&query};
            std::unordered_set<std::string> picked;
            for (const auto& sel : res.selected) {
                for (const auto& s : sets) {
                    if (picked.contains(s.dataset_id)) continue;
                    bool connected = false;
                    for (const auto* m : members)
                        connected = connected ||
                                    static_cast<double>(oracle::naive_distance_sq(s, *m)) <= d2;
                    if (!connected) continue;
                    std::uint64_t g = 0;
                    for (CellId c : s.cells)
                        if (!covered.contains(c)) ++g;
                    bool dominated = sel.increment > g ||
                                     (sel.increment == g && sel.dataset_id <= s.dataset_id);
                    CHECK(dominated);
                }
                const auto& chosen = tree.find(sel.dataset_id)->set;
                picked.insert(sel.dataset_id);
                members.push_back(&chosen);
                covered.insert(chosen.cells.begin(), chosen.cells.end());
            }
        }
    }
}

TEST_CASE("gadg") {
    auto grid = make_grid(8);

    SUBCASE("graph-expansion walkthrough picks the deep neighbor") {
        // Q at one cell; A and C connect to Q directly, B only through A.
        // After A (gain 4), B gains 9-1=8 versus C's 3, so B wins.
        auto query = set_of(grid, "q", {{10, 10}});
        auto a = set_of(grid, "s_a", {{10, 11}, {11, 11}, {12, 11}, {9, 11}});
        auto c = set_of(grid, "s_c", {{11, 10}, {12, 10}, {13, 10}});
        std::vector<std::pair<std::uint32_t, std::uint32_t>> b_coords{
            {12, 11}, {13, 11}, {14, 11}, {12, 12}, {13, 12},
            {14, 12}, {12, 13}, {13, 13}, {14, 13}};
        auto b = set_of(grid, "s_b", b_coords);
        REQUIRE(oracle::naive_distance_sq(b, query) > 1);

        auto tree = IBtree::build({a, b, c}, 2, grid);
        auto graph = build_graph(tree, 1.0);
        auto res = gadg(tree, graph, query, 1.0, 2);

        REQUIRE(res.selected.size() == 2);
        CHECK(res.selected[0] == McqcSelection{"s_a", 4});
        CHECK(res.selected[1] == McqcSelection{"s_b", 8});
        CHECK(res.total_coverage == 13);
        CHECK(res == gasm(tree, query, 1.0, 2));
    }

    SUBCASE("k equal to one matches a single gasm round") {
        std::mt19937_64 rng(163);
        auto sets = test::random_corpus(rng, grid, 30, 12);
        auto tree = IBtree::build(sets, 4, grid);
        auto graph = build_graph(tree, 3.0);
        auto query = test::random_set(rng, grid, "q", 12);
        CHECK(gadg(tree, graph, query, 3.0, 1) == gasm(tree, query, 3.0, 1));
    }

    SUBCASE("matches gasm on random instances across deltas") {
        std::mt19937_64 rng(167);
        for (int round = 0; round < 100; ++round) {
            auto sets = test::random_corpus(rng, grid, 35, 15);
            auto tree = IBtree::build(sets, 4, grid);
            auto query = test::random_set(rng, grid, "q", 15);
            for (double delta : {0.0, 1.0, 4.0, 12.0}) {
                auto graph = build_graph(tree, delta);
                CHECK(gadg(tree, graph, query, delta, 5) == gasm(tree, query, delta, 5));
            }
        }
    }

    SUBCASE("stale or mismatched graphs are rejected") {
        std::mt19937_64 rng(173);
        auto sets = test::random_corpus(rng, grid, 20, 10);
        auto tree = IBtree::build(sets, 4, grid);
        auto graph = build_graph(tree, 2.0);
        auto query = test::random_set(rng, grid, "q", 10);

        CHECK_THROWS_AS(gadg(tree, graph, query, 3.0, 2), StaleGraphError);
        tree.update(test::random_set(rng, grid, sets[0].dataset_id, 10));
        CHECK_THROWS_AS(gadg(tree, graph, query, 2.0, 2), StaleGraphError);
    }
}

TEST_CASE("greedy approximation bound with vacuous connectivity") {
    // With delta above the grid diagonal every candidate connects, so the
    // classic guarantee applies: coverage >= (1 - (1-1/k)^k) * OPT, checked
    // as integers: coverage * k^k >= OPT * (k^k - (k-1)^k).
    auto grid = make_grid(6);
    const double diag = 64.0 * std::sqrt(2.0) + 1.0;
    std::mt19937_64 rng(179);
    for (int round = 0; round < 40; ++round) {
        auto sets = test::random_corpus(rng, grid, 12, 10);
        auto tree = IBtree::build(sets, 3, grid);
        auto query = test::random_set(rng, grid, "q", 10);
        const std::uint32_t k = 3;

        auto greedy = gasm(tree, query, diag, k);
        auto opt = oracle::brute_mcqc(sets, query, diag, k);

        const std::uint64_t kk = 27, k1k = 8; // 3^3 and 2^3
        CHECK(greedy.total_coverage * kk >= opt.coverage * (kk - k1k));
        CHECK(greedy.total_coverage <= opt.coverage);
    }
}
