#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <random>

#include "msds/dynamic.hpp"
#include "msds/oracle.hpp"
#include "support.hpp"

using namespace msds;
using test::make_grid;
using test::set_of;

namespace {

UpdateEvent cell_event(UpdateKind kind, const SpatialSet& s, std::uint64_t seq) {
    UpdateEvent e;
    e.kind = kind;
    e.dataset_id = s.dataset_id;
    e.sequence = seq;
    e.cells = s.cells;
    return e;
}

} // namespace

TEST_CASE("live query registration") {
    auto grid = make_grid(8);
    std::mt19937_64 rng(211);
    auto sets = test::random_corpus(rng, grid, 40, 15);

    SUBCASE("snapshot is stable without updates") {
        SourceStore store(IBtree::build(sets, 4, grid));
        auto query = test::random_set(rng, grid, "q1", 15);
        auto [id, snap] = store.register_live_query(query, {QueryMode::Miq, 5, 0.0});
        CHECK(id == "q1");
        CHECK(*store.live_snapshot(id) == snap);
        CHECK(snap.miq == miq_search(store.tree(), query, 5));
    }

    SUBCASE("empty source yields an empty snapshot in both modes") {
        SourceStore store{IBtree(grid, 4)};
        auto query = test::random_set(rng, grid, "q1", 10);
        auto [_, miq_snap] = store.register_live_query(query, {QueryMode::Miq, 5, 0.0});
        CHECK(miq_snap.miq.entries.empty());
        auto q2 = query;
        q2.dataset_id = "q2";
        auto [__, mcqc_snap] = store.register_live_query(q2, {QueryMode::Mcqc, 3, 2.0});
        CHECK(mcqc_snap.mcqc.selected.empty());
        CHECK(mcqc_snap.mcqc.truncated);
    }

    SUBCASE("duplicate registration is rejected") {
        SourceStore store(IBtree::build(sets, 4, grid));
        auto query = test::random_set(rng, grid, "q1", 10);
        store.register_live_query(query, {QueryMode::Miq, 5, 0.0});
        CHECK_THROWS_AS(store.register_live_query(query, {QueryMode::Miq, 3, 0.0}),
                        DuplicateDatasetError);
    }
}

TEST_CASE("update filtering and deltas") {
    auto grid = make_grid(8);
    std::mt19937_64 rng(223);

    SUBCASE("an update disjoint from every live query emits nothing") {
        std::vector<SpatialSet> sets{set_of(grid, "a", {{10, 10}, {11, 11}}),
                                     set_of(grid, "far", {{200, 200}})};
        SourceStore store(IBtree::build(sets, 2, grid));
        auto query = set_of(grid, "q", {{10, 10}, {12, 12}});
        store.register_live_query(query, {QueryMode::Miq, 2, 0.0});
        auto q2 = set_of(grid, "q2", {{10, 10}});
        store.register_live_query(q2, {QueryMode::Mcqc, 2, 1.0});

        auto deltas =
            store.apply_update(cell_event(UpdateKind::Update, set_of(grid, "far", {{201, 201}}), 1));
        CHECK(deltas.empty());
    }

    SUBCASE("an update pushing a dataset into the top-k emits one delta") {
        std::vector<SpatialSet> sets{set_of(grid, "a", {{10, 10}}),
                                     set_of(grid, "b", {{50, 50}})};
        SourceStore store(IBtree::build(sets, 2, grid));
        auto query = set_of(grid, "q", {{10, 10}, {11, 10}, {12, 10}});
        store.register_live_query(query, {QueryMode::Miq, 1, 0.0});

        // "b" grows to beat "a".
        auto grown = set_of(grid, "b", {{11, 10}, {12, 10}});
        auto deltas = store.apply_update(cell_event(UpdateKind::Update, grown, 1));
        REQUIRE(deltas.size() == 1);
        REQUIRE(deltas[0].snapshot.miq.entries.size() == 1);
        CHECK(deltas[0].snapshot.miq.entries[0] == TopKEntry{"b", 2});
    }

    SUBCASE("an update demoting a member emits one delta") {
        std::vector<SpatialSet> sets{set_of(grid, "a", {{10, 10}, {11, 10}}),
                                     set_of(grid, "b", {{10, 10}})};
        SourceStore store(IBtree::build(sets, 2, grid));
        auto query = set_of(grid, "q", {{10, 10}, {11, 10}});
        store.register_live_query(query, {QueryMode::Miq, 1, 0.0});
        CHECK(store.live_snapshot("q")->miq.entries[0].dataset_id == "a");

        auto shrunk = set_of(grid, "a", {{60, 60}});
        auto deltas = store.apply_update(cell_event(UpdateKind::Update, shrunk, 1));
        REQUIRE(deltas.size() == 1);
        CHECK(deltas[0].snapshot.miq.entries[0].dataset_id == "b");
    }

    SUBCASE("sequence numbers must increase") {
        std::vector<SpatialSet> sets{set_of(grid, "a", {{10, 10}})};
        SourceStore store(IBtree::build(sets, 2, grid));
        store.apply_update(cell_event(UpdateKind::Update, set_of(grid, "a", {{11, 11}}), 5));
        CHECK_THROWS_AS(
            store.apply_update(cell_event(UpdateKind::Update, set_of(grid, "a", {{9, 9}}), 5)),
            InvalidParameterError);
    }

    SUBCASE("batch application coalesces to one delta per query") {
        std::vector<SpatialSet> sets{set_of(grid, "a", {{10, 10}}),
                                     set_of(grid, "b", {{30, 30}})};
        SourceStore store(IBtree::build(sets, 2, grid));
        auto query = set_of(grid, "q", {{10, 10}, {11, 10}, {12, 10}, {13, 10}});
        store.register_live_query(query, {QueryMode::Miq, 2, 0.0});

        std::vector<UpdateEvent> batch{
            cell_event(UpdateKind::Update, set_of(grid, "a", {{11, 10}}), 1),
            cell_event(UpdateKind::Update, set_of(grid, "a", {{11, 10}, {12, 10}}), 2),
            cell_event(UpdateKind::Insert, set_of(grid, "c", {{13, 10}}), 3),
        };
        auto deltas = store.apply_batch(batch);
        REQUIRE(deltas.size() == 1);
        CHECK(deltas[0].registration_id == "q");
        CHECK(deltas[0].snapshot.miq == miq_search(store.tree(), query, 2));

        // A batch that nets out to no change emits nothing.
        std::vector<UpdateEvent> quiet{
            cell_event(UpdateKind::Update, set_of(grid, "b", {{31, 31}}), 4),
            cell_event(UpdateKind::Update, set_of(grid, "b", {{30, 30}}), 5),
        };
        CHECK(store.apply_batch(quiet).empty());
    }
}

TEST_CASE("static equivalence under replayed streams") {
    auto grid = make_grid(8);
    std::mt19937_64 rng(227);
    auto sets = test::random_corpus(rng, grid, 60, 15);
    SourceStore store(IBtree::build(sets, 4, grid));

    std::map<std::string, SpatialSet> shadow;
    for (const auto& s : sets) shadow[s.dataset_id] = s;

    auto miq_query = test::random_set(rng, grid, "liveq", 20, 40);
    const double delta = 4.0;
    store.register_live_query(miq_query, {QueryMode::Miq, 10, 0.0});
    auto mcqc_query = miq_query;
    mcqc_query.dataset_id = "livec";
    store.register_live_query(mcqc_query, {QueryMode::Mcqc, 4, delta});

    std::uniform_int_distribution<int> coin(0, 2);
    for (int step = 1; step <= 120; ++step) {
        SpatialSet changed;
        UpdateKind kind;
        if (coin(rng) == 0) {
            changed = test::random_set(rng, grid, "n" + std::to_string(step), 15);
            kind = UpdateKind::Insert;
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, shadow.size() - 1);
            auto it = std::next(shadow.begin(), static_cast<std::ptrdiff_t>(pick(rng)));
            changed = test::random_set(rng, grid, it->first, 15);
            kind = UpdateKind::Update;
        }
        shadow[changed.dataset_id] = changed;
        store.apply_update(cell_event(kind, changed, static_cast<std::uint64_t>(step)));

        // Fully independent oracles over the shadow corpus.
        std::vector<SpatialSet> corpus;
        for (auto& [_, s] : shadow) corpus.push_back(s);
        CHECK(store.live_snapshot("liveq")->miq == oracle::brute_miq(corpus, miq_query, 10));
        CHECK(store.live_snapshot("livec")->mcqc ==
              oracle::standard_greedy(corpus, mcqc_query, delta, 4));
    }
}
