#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>
#include <random>

#include "msds/coordinator.hpp"
#include "msds/oracle.hpp"
#include "support.hpp"

using namespace msds;
using test::make_grid;
using test::set_of;

namespace {

struct TestBed {
    GridConfig grid;
    std::vector<std::unique_ptr<SourceService>> services;
    std::vector<InProcChannel*> channels; // borrowed, owned by the center
    Center center;

    explicit TestBed(const GridConfig& g) : grid(g) {}

    SourceService& add_source(const std::string& id, std::vector<SpatialSet> sets,
                              std::uint32_t capacity = 4) {
        auto tree = IBtree::build(std::move(sets), capacity, grid);
        services.push_back(std::make_unique<SourceService>(id, "inproc:" + id, std::move(tree)));
        auto ch = std::make_unique<InProcChannel>(*services.back());
        channels.push_back(ch.get());
        center.attach_source(std::move(ch));
        return *services.back();
    }
};

GlobalQuery query_of(const SpatialSet& s) {
    GlobalQuery q;
    q.query_id = s.dataset_id;
    q.cells = s.cells;
    q.grid_fp = s.grid_fp;
    return q;
}

} // namespace

TEST_CASE("source registration and the global index") {
    auto grid = make_grid(8);
    TestBed bed(grid);

    bed.add_source("s1", {set_of(grid, "a", {{10, 10}, {20, 20}})});
    DegRect root = bed.center.global_root_rect();
    CHECK(root.min_lon == doctest::Approx(10.0));
    CHECK(root.max_lon == doctest::Approx(21.0));

    bed.add_source("s2", {set_of(grid, "b", {{100, 100}})});
    bed.add_source("s3", {set_of(grid, "c", {{200, 40}})});
    bed.add_source("s4", {set_of(grid, "d", {{40, 200}})});
    bed.add_source("s5", {set_of(grid, "e", {{250, 250}})});
    CHECK(bed.center.source_count() == 5);

    root = bed.center.global_root_rect();
    for (const auto& d : bed.center.sources()) {
        CHECK(root.min_lon <= d.min_lon);
        CHECK(root.max_lat >= d.max_lat);
    }

    SUBCASE("five REGISTER frames were metered") {
        CommMeter total = bed.center.meter_total();
        CHECK(total.rx[static_cast<std::size_t>(MsgType::Register)].frames == 5);
    }

    SUBCASE("duplicate source ids are rejected") {
        auto tree = IBtree::build({set_of(grid, "x", {{1, 1}})}, 2, grid);
        auto svc = std::make_unique<SourceService>("s1", "inproc:dup", std::move(tree));
        CHECK_THROWS_AS(bed.center.attach_source(std::make_unique<InProcChannel>(*svc)),
                        DuplicateDatasetError);
    }

    SUBCASE("a query outside every region has no candidates") {
        DegRect far{300.0, 300.0, 301.0, 301.0};
        CHECK(bed.center.candidate_sources(far, RouteMode::Miq).empty());
        CHECK(bed.center.candidate_sources(far, RouteMode::Mcqc, 5.0).empty());
    }
}

TEST_CASE("routing matches a linear scan over descriptors") {
    auto grid = make_grid(8);
    TestBed bed(grid);
    std::mt19937_64 rng(233);
    for (int i = 0; i < 6; ++i)
        bed.add_source("s" + std::to_string(i), test::random_corpus(rng, grid, 15, 10));

    for (int round = 0; round < 60; ++round) {
        auto q = test::random_set(rng, grid, "q", 15, 30);
        const GridConfig& g = grid;
        DegRect qrect{g.origin_lon + q.mbr.min_col * g.cell_width(),
                      g.origin_lat + q.mbr.min_row * g.cell_height(),
                      g.origin_lon + (q.mbr.max_col + 1.0) * g.cell_width(),
                      g.origin_lat + (q.mbr.max_row + 1.0) * g.cell_height()};

        auto fast_miq = bed.center.candidate_sources(qrect, RouteMode::Miq);
        std::vector<std::string> scan_miq;
        for (const auto& d : bed.center.sources())
            if (qrect.intersects(DegRect{d.min_lon, d.min_lat, d.max_lon, d.max_lat}))
                scan_miq.push_back(d.source_id);
        std::sort(scan_miq.begin(), scan_miq.end());
        CHECK(fast_miq == scan_miq);

        const double delta_deg = 4.0;
        auto fast_mcqc = bed.center.candidate_sources(qrect, RouteMode::Mcqc, delta_deg);
        std::vector<std::string> scan_mcqc;
        for (const auto& d : bed.center.sources()) {
            PivotBall src_ball{{d.pivot_lon, d.pivot_lat}, d.radius_deg};
            if (ball_gap(src_ball, qrect.ball()) <= delta_deg) scan_mcqc.push_back(d.source_id);
        }
        std::sort(scan_mcqc.begin(), scan_mcqc.end());
        CHECK(fast_mcqc == scan_mcqc);

        // Routing soundness: every source holding a dataset the brute force
        // would return is a candidate.
        for (const auto& d : bed.center.sources()) {
            bool relevant = false;
            auto* svc = [&]() -> SourceService* {
                for (auto& s : bed.services)
                    if (s->id() == d.source_id) return s.get();
                return nullptr;
            }();
            svc->store().tree().for_each_leaf([&](const LeafNode& leaf) {
                for (const auto& ch : leaf.children)
                    relevant = relevant || oracle::naive_intersection(ch->set, q) > 0;
            });
            if (relevant) CHECK(std::binary_search(fast_miq.begin(), fast_miq.end(), d.source_id));
        }
    }
}

TEST_CASE("query clipping") {
    auto grid = make_grid(8);
    TestBed bed(grid);
    bed.add_source("s1", {set_of(grid, "a", {{10, 10}, {30, 30}})});
    const SourceDescriptor& src = bed.center.sources().front();

    SUBCASE("covering source keeps the full query") {
        auto q = set_of(grid, "q", {{12, 12}, {20, 20}});
        auto clipped = bed.center.clip_query(q, {}, src, RouteMode::Miq);
        REQUIRE(clipped.has_value());
        CHECK(clipped->cells == q.cells);
    }

    SUBCASE("disjoint source is dropped") {
        auto q = set_of(grid, "q", {{200, 200}});
        CHECK_FALSE(bed.center.clip_query(q, {}, src, RouteMode::Miq).has_value());
    }

    SUBCASE("half overlap keeps exactly the overlap cells and preserves answers") {
        auto q = set_of(grid, "q", {{9, 10}, {10, 10}, {30, 30}, {60, 60}, {70, 70}});
        auto clipped = bed.center.clip_query(q, {}, src, RouteMode::Miq);
        REQUIRE(clipped.has_value());
        CHECK(clipped->cells ==
              std::vector<CellId>{zorder_encode(10, 10), zorder_encode(30, 30)});

        // Clip invariance: the source answers identically for both forms.
        auto& store = bed.services[0]->store();
        CHECK(miq_search(store.tree(), *clipped, 3) == miq_search(store.tree(), q, 3));
    }

    SUBCASE("MCQC transmits the full query") {
        auto q = set_of(grid, "q", {{9, 10}, {60, 60}});
        auto full = bed.center.clip_query(q, {}, src, RouteMode::Mcqc);
        REQUIRE(full.has_value());
        CHECK(full->cells == q.cells);
    }
}

TEST_CASE("global MIQ") {
    auto grid = make_grid(8);
    std::mt19937_64 rng(239);

    SUBCASE("one candidate source behaves like a local search") {
        TestBed bed(grid);
        auto sets = test::random_corpus(rng, grid, 30, 15);
        bed.add_source("s1", sets);
        auto q = test::random_set(rng, grid, "q", 20, 30);
        auto global = bed.center.global_miq(query_of(q), 5);
        auto local = miq_search(bed.services[0]->store().tree(), q, 5);
        REQUIRE(global.entries.size() == local.entries.size());
        for (std::size_t i = 0; i < local.entries.size(); ++i) {
            CHECK(global.entries[i].dataset_id == local.entries[i].dataset_id);
            CHECK(global.entries[i].intersection == local.entries[i].intersection);
        }
    }

    SUBCASE("partition invariance: one source versus five") {
        std::mt19937_64 gen(241);
        auto corpus = test::random_corpus(gen, grid, 200, 15, 60);

        TestBed single(grid);
        single.add_source("all", corpus);

        TestBed split(grid);
        for (int part = 0; part < 5; ++part) {
            std::vector<SpatialSet> sub;
            for (std::size_t i = part; i < corpus.size(); i += 5) sub.push_back(corpus[i]);
            split.add_source("p" + std::to_string(part), sub);
        }

        for (int round = 0; round < 20; ++round) {
            auto q = test::random_set(gen, grid, "q", 25, 50);
            auto a = single.center.global_miq(query_of(q), 10);
            auto b = split.center.global_miq(query_of(q), 10);
            REQUIRE(a.entries.size() == b.entries.size());
            for (std::size_t i = 0; i < a.entries.size(); ++i) {
                CHECK(a.entries[i].dataset_id == b.entries[i].dataset_id);
                CHECK(a.entries[i].intersection == b.entries[i].intersection);
            }
        }
    }

    SUBCASE("bytes grow with the number of candidate sources") {
        auto corpus_a = std::vector<SpatialSet>{set_of(grid, "a", {{10, 10}})};
        auto corpus_b = std::vector<SpatialSet>{set_of(grid, "b", {{12, 12}})};
        auto q = set_of(grid, "q", {{10, 10}, {12, 12}});

        TestBed one(grid);
        one.add_source("s1", corpus_a);
        one.center.global_miq(query_of(q), 3);
        auto bytes_one = one.center.meter_total().total_bytes();

        TestBed two(grid);
        two.add_source("s1", corpus_a);
        two.add_source("s2", corpus_b);
        two.center.global_miq(query_of(q), 3);
        auto bytes_two = two.center.meter_total().total_bytes();
        CHECK(bytes_two > bytes_one);
    }

    SUBCASE("zero candidates cost zero data-source bytes") {
        TestBed bed(grid);
        bed.add_source("s1", {set_of(grid, "a", {{10, 10}})});
        bed.center.reset_meters();
        auto q = set_of(grid, "q", {{200, 200}});
        auto res = bed.center.global_miq(query_of(q), 3);
        CHECK(res.entries.empty());
        CHECK(bed.center.meter_total().total_bytes() == 0);
    }

    SUBCASE("a dead source fails loudly, naming itself") {
        TestBed bed(grid);
        bed.add_source("s1", {set_of(grid, "a", {{10, 10}})});
        bed.add_source("s2", {set_of(grid, "b", {{12, 12}})});
        bed.channels[1]->kill();
        auto q = set_of(grid, "q", {{10, 10}, {12, 12}});
        try {
            bed.center.global_miq(query_of(q), 3);
            FAIL("expected PartialResultError");
        } catch (const PartialResultError& e) {
            CHECK(e.failed_sources == std::vector<std::string>{"s2"});
        }
    }
}

TEST_CASE("global MCQC") {
    auto grid = make_grid(8);

    SUBCASE("the dominating source wins") {
        TestBed bed(grid);
        // s_small holds one set near the query; s_big holds a nested, larger corpus.
        bed.add_source("s_small", {set_of(grid, "only", {{10, 11}, {11, 11}})});
        bed.add_source("s_big", {set_of(grid, "b1", {{10, 11}, {11, 11}, {12, 11}}),
                                 set_of(grid, "b2", {{12, 12}, {13, 12}, {14, 12}})});
        auto q = set_of(grid, "q", {{10, 10}});
        auto res = bed.center.global_mcqc(query_of(q), 2.0, 2);
        CHECK(res.source_id == "s_big");
        CHECK(res.result.total_coverage == 7);
    }

    SUBCASE("no connected dataset anywhere returns the flagged empty result") {
        TestBed bed(grid);
        bed.add_source("s1", {set_of(grid, "a", {{100, 100}})});
        auto q = set_of(grid, "q", {{10, 10}});
        auto res = bed.center.global_mcqc(query_of(q), 1.0, 2);
        CHECK(res.result.selected.empty());
        if (!res.source_id.empty()) CHECK(res.result.truncated);
    }
}

TEST_CASE("live queries and delta polling") {
    auto grid = make_grid(8);
    TestBed bed(grid);
    std::mt19937_64 rng(251);
    bed.add_source("s1", {set_of(grid, "a", {{10, 10}}), set_of(grid, "b", {{40, 40}})});
    bed.add_source("s2", {set_of(grid, "c", {{12, 10}})});

    auto q = set_of(grid, "liveq", {{10, 10}, {11, 10}, {12, 10}});
    auto reg = bed.center.register_live(query_of(q), QueryMode::Miq, 2);
    auto before = bed.center.live_miq_snapshot(reg);
    CHECK(before.entries.size() == 2);

    // Push an update into s1 through a separate ingest channel.
    InProcChannel ingest(*bed.services[0]);
    UpdateEvent grow;
    grow.kind = UpdateKind::Update;
    grow.dataset_id = "b";
    grow.sequence = 1;
    grow.cells = {zorder_encode(10, 10), zorder_encode(11, 10), zorder_encode(12, 10)};
    Frame resp = ingest.round_trip(encode_update(grow, true));
    CHECK(resp.type == MsgType::Result);

    auto changed = bed.center.poll_deltas();
    CHECK(changed == std::vector<std::string>{reg});
    auto after = bed.center.live_miq_snapshot(reg);
    REQUIRE(!after.entries.empty());
    CHECK(after.entries[0].dataset_id == "b");
    CHECK(after.entries[0].intersection == 3);

    // The merged live snapshot equals a fresh global re-query.
    auto requeried = bed.center.global_miq(query_of(q), 2);
    CHECK(after.entries == requeried.entries);
}
