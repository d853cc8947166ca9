#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "msds/geometry.hpp"
#include "msds/oracle.hpp"
#include "support.hpp"

using namespace msds;
using test::make_grid;
using test::set_of;

TEST_CASE("zorder round trip and naive-encoder agreement") {
    for (std::uint32_t col = 0; col < 64; ++col) {
        for (std::uint32_t row = 0; row < 64; ++row) {
            CellId id = zorder_encode(col, row);
            CHECK(id == oracle::naive_zorder_encode(col, row));
            auto [c, r] = zorder_decode(id);
            CHECK(c == col);
            CHECK(r == row);
        }
    }

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::uint32_t> coord(0, (1u << 15) - 1);
    for (int i = 0; i < 2000; ++i) {
        std::uint32_t col = coord(rng), row = coord(rng);
        CHECK(zorder_encode(col, row) == oracle::naive_zorder_encode(col, row));
        auto [c, r] = zorder_decode(zorder_encode(col, row));
        CHECK(c == col);
        CHECK(r == row);
    }
}

TEST_CASE("rasterize maps points to sorted unique cells") {
    GridConfig grid(0.0, 0.0, 4.0, 4.0, 2); // theta=2, nu=mu=1

    SUBCASE("origin maps to cell 0") {
        std::vector<GeoPoint> pts{{0.0, 0.0}};
        auto s = rasterize(pts, grid, "a");
        CHECK(s.cells == std::vector<CellId>{0});
    }

    SUBCASE("points in one cell collapse to one id") {
        std::vector<GeoPoint> pts{{1.2, 2.3}, {1.8, 2.9}};
        auto s = rasterize(pts, grid, "a");
        CHECK(s.cells.size() == 1);
    }

    SUBCASE("hand-interleaved example") {
        // (lat=2, lon=1) -> col 1, row 2 -> 9; (lat=0, lon=3) -> col 3, row 0 -> 5.
        std::vector<GeoPoint> pts{{2.0, 1.0}, {0.0, 3.0}};
        auto s = rasterize(pts, grid, "a");
        CHECK(s.cells == std::vector<CellId>{5, 9});
        CHECK(zorder_encode(1, 2) == 9);
        CHECK(zorder_encode(3, 0) == 5);
    }

    SUBCASE("out-of-bounds point is named") {
        std::vector<GeoPoint> pts{{5.0, 1.0}};
        CHECK_THROWS_AS(rasterize(pts, grid, "a"), OutOfBoundsError);
        std::vector<GeoPoint> neg{{-0.5, 1.0}};
        CHECK_THROWS_AS(rasterize(neg, grid, "a"), OutOfBoundsError);
    }

    SUBCASE("empty input rejected") {
        CHECK_THROWS_AS(rasterize({}, grid, "a"), EmptyDatasetError);
    }
}

TEST_CASE("spatial set derived fields") {
    auto grid = make_grid(4);
    auto s = set_of(grid, "a", {{2, 3}, {5, 7}});
    CHECK(s.mbr == Rect{2, 3, 5, 7});
    CHECK(s.pivot == Vec2{3.5, 5.0});
    // Half diagonal of a 4 x 5 cell box.
    CHECK(s.radius == doctest::Approx(0.5 * std::sqrt(16.0 + 25.0)));

    // Every cell center lies strictly inside the radius.
    for (CellId c : s.cells) {
        auto [col, row] = zorder_decode(c);
        double dx = static_cast<double>(col) - s.pivot.x;
        double dy = static_cast<double>(row) - s.pivot.y;
        CHECK(std::sqrt(dx * dx + dy * dy) < s.radius);
    }
}

TEST_CASE("set distance") {
    auto grid = make_grid(5);

    SUBCASE("shared cell means zero") {
        auto a = set_of(grid, "a", {{1, 1}, {4, 4}});
        auto b = set_of(grid, "b", {{4, 4}, {9, 9}});
        CHECK(set_distance(a, b) == 0.0);
    }

    SUBCASE("closest pair at offset (1,2) gives sqrt(5)") {
        auto q = set_of(grid, "q", {{0, 0}, {2, 1}});
        auto d = set_of(grid, "d", {{3, 3}, {6, 5}});
        CHECK(set_distance(q, d) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
    }

    SUBCASE("identical sets are at distance zero") {
        auto a = set_of(grid, "a", {{7, 7}});
        CHECK(set_distance(a, a) == 0.0);
    }

    SUBCASE("grid mismatch rejected") {
        auto a = set_of(make_grid(5), "a", {{1, 1}});
        auto b = set_of(make_grid(6), "b", {{1, 1}});
        CHECK_THROWS_AS(set_distance(a, b), IncompatibleGridError);
    }

    SUBCASE("matches exhaustive pairwise minimum on random sets") {
        std::mt19937_64 rng(11);
        auto grid4 = make_grid(4);
        for (int i = 0; i < 300; ++i) {
            auto a = test::random_set(rng, grid4, "a", 5);
            auto b = test::random_set(rng, grid4, "b", 5);
            CHECK(set_distance_sq(a, b) == oracle::naive_distance_sq(a, b));
        }
    }

    SUBCASE("symmetric, non-negative, zero iff intersecting") {
        std::mt19937_64 rng(13);
        auto grid8 = make_grid(8);
        for (int i = 0; i < 200; ++i) {
            auto a = test::random_set(rng, grid8, "a", 20);
            auto b = test::random_set(rng, grid8, "b", 20);
            auto d = set_distance_sq(a, b);
            CHECK(d >= 0);
            CHECK(d == set_distance_sq(b, a));
            CHECK((d == 0) == (intersection_count(a, b) > 0));
        }
    }
}

TEST_CASE("union-distance decomposition") {
    // dist(a union b, c) = min(dist(a,c), dist(b,c)) - the identity GADG
    // candidate gathering relies on.
    std::mt19937_64 rng(17);
    auto grid = make_grid(7);
    for (int i = 0; i < 200; ++i) {
        auto a = test::random_set(rng, grid, "a", 15);
        auto b = test::random_set(rng, grid, "b", 15);
        auto c = test::random_set(rng, grid, "c", 15);
        std::vector<CellId> merged = a.cells;
        merged.insert(merged.end(), b.cells.begin(), b.cells.end());
        auto m = set_from_cells(std::move(merged), grid, "m");
        CHECK(set_distance_sq(m, c) == std::min(set_distance_sq(a, c), set_distance_sq(b, c)));
    }
}

TEST_CASE("delta connectivity") {
    auto grid = make_grid(5);
    // Three sets with pairwise distances 1, 1, sqrt(2).
    auto s1 = set_of(grid, "s1", {{4, 4}});
    auto s2 = set_of(grid, "s2", {{4, 5}});
    auto s3 = set_of(grid, "s3", {{5, 4}});

    CHECK(set_distance(s1, s2) == doctest::Approx(1.0));
    CHECK(set_distance(s2, s3) == doctest::Approx(std::sqrt(2.0)));

    CHECK(is_connected(s1, s2, 1.0));
    CHECK_FALSE(is_connected(s2, s3, 1.0));
    CHECK(is_connected(s1, s1, 0.0));
    CHECK_THROWS_AS(is_connected(s1, s2, -0.1), InvalidParameterError);

    SUBCASE("graph connectivity through a hub") {
        std::vector<SpatialSet> sets{s1, s2, s3};
        CHECK(is_connected_graph(sets, 1.0)); // path s2 - s1 - s3
        std::vector<SpatialSet> single{s1};
        CHECK(is_connected_graph(single, 0.0));
        auto far = set_of(grid, "far", {{30, 30}});
        std::vector<SpatialSet> split{s1, far};
        CHECK_FALSE(is_connected_graph(split, 2.0));
        CHECK(is_connected_graph(split, 100.0));
    }
}

TEST_CASE("intersection count") {
    auto grid = make_grid(6);

    SUBCASE("disjoint MBRs give zero") {
        auto a = set_of(grid, "a", {{1, 1}, {2, 2}});
        auto b = set_of(grid, "b", {{40, 40}, {41, 41}});
        CHECK(intersection_count(a, b) == 0);
    }

    SUBCASE("subset gives its own size") {
        auto a = set_of(grid, "a", {{3, 3}, {4, 4}});
        auto b = set_of(grid, "b", {{3, 3}, {4, 4}, {5, 5}});
        CHECK(intersection_count(a, b) == a.size());
    }

    SUBCASE("matches hash-set oracle on random sets") {
        std::mt19937_64 rng(19);
        for (int i = 0; i < 300; ++i) {
            auto a = test::random_set(rng, grid, "a", 30);
            auto b = test::random_set(rng, grid, "b", 30);
            CHECK(intersection_count(a, b) == oracle::naive_intersection(a, b));
        }
    }
}

TEST_CASE("coverage increment") {
    auto grid = make_grid(6);

    SUBCASE("candidate inside covered gains nothing") {
        auto c = set_of(grid, "c", {{1, 1}, {2, 2}});
        CellIdSet covered(c.cells.begin(), c.cells.end());
        CHECK(coverage_increment(c, covered) == 0);
    }

    SUBCASE("empty covered gains the whole candidate") {
        auto c = set_of(grid, "c", {{1, 1}, {2, 2}, {3, 3}});
        CHECK(coverage_increment(c, {}) == c.size());
    }

    SUBCASE("nine cells overlapping one covered cell gain eight") {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> coords;
        for (std::uint32_t col = 10; col < 13; ++col)
            for (std::uint32_t row = 10; row < 13; ++row) coords.push_back({col, row});
        auto c = set_of(grid, "c", coords);
        CellIdSet covered{zorder_encode(10, 10)};
        CHECK(coverage_increment(c, covered) == 8);
    }

    SUBCASE("matches |c union covered| - |covered| literally") {
        std::mt19937_64 rng(23);
        for (int i = 0; i < 200; ++i) {
            auto cand = test::random_set(rng, grid, "c", 25);
            auto other = test::random_set(rng, grid, "o", 25);
            CellIdSet covered(other.cells.begin(), other.cells.end());
            CellIdSet both = covered;
            both.insert(cand.cells.begin(), cand.cells.end());
            CHECK(coverage_increment(cand, covered) == both.size() - covered.size());
        }
    }
}
