#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "msds/wire.hpp"
#include "support.hpp"

using namespace msds;
using test::make_grid;
using test::set_of;

TEST_CASE("frame codec") {
    Frame f{MsgType::Result, {1, 2, 3, 4, 5}};
    auto bytes = encode_frame(f);
    CHECK(bytes.size() == f.wire_size());

    SUBCASE("round trip") {
        Frame back = decode_frame(bytes);
        CHECK(back.type == f.type);
        CHECK(back.payload == f.payload);
    }

    SUBCASE("streaming decode waits for the full frame") {
        std::size_t consumed = 0;
        for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
            auto part = std::span(bytes).first(cut);
            CHECK_FALSE(try_decode_frame(part, consumed).has_value());
        }
        auto whole = try_decode_frame(bytes, consumed);
        REQUIRE(whole.has_value());
        CHECK(consumed == bytes.size());
    }

    SUBCASE("garbage is rejected") {
        auto bad = bytes;
        bad[4] = 0xEE; // unknown type
        CHECK_THROWS_AS(decode_frame(bad), FormatError);
        std::vector<std::uint8_t> zero_len{0, 0, 0, 0};
        CHECK_THROWS_AS(decode_frame(zero_len), FormatError);
        auto trailing = bytes;
        trailing.push_back(9);
        CHECK_THROWS_AS(decode_frame(trailing), FormatError);
    }
}

TEST_CASE("payload codecs") {
    auto grid = make_grid(8);

    SUBCASE("register") {
        auto sets = std::vector<SpatialSet>{set_of(grid, "a", {{10, 12}, {30, 40}})};
        auto tree = IBtree::build(sets, 4, grid);
        auto d = make_descriptor("s1", "localhost:9", tree);
        auto back = decode_register(encode_register(d));
        CHECK(back == d);
        CHECK(back.min_lon <= 10.0);
        CHECK(back.max_lon >= 31.0);
    }

    SUBCASE("query") {
        QueryEnvelope q;
        q.mode = QueryMode::Mcqc;
        q.query_id = "q7";
        q.live = true;
        q.k = 12;
        q.delta = 3.5;
        q.grid_fp = grid.fingerprint();
        q.cells = {3, 9, 77, 1024};
        q.points = {{1.5, 2.5}, {3.25, 4.75}};
        auto back = decode_query(encode_query(q));
        CHECK(back == q);
    }

    SUBCASE("results") {
        ResultBody miq;
        miq.kind = ResultBody::Kind::Miq;
        miq.miq = TopKResults{5, {{"a", 9}, {"b", 3}}};
        CHECK(decode_result(encode_result(miq)) == miq);

        ResultBody mcqc;
        mcqc.kind = ResultBody::Kind::Mcqc;
        mcqc.mcqc = McqcResult{{{"x", 4}, {"y", 0}}, 17, true};
        CHECK(decode_result(encode_result(mcqc)) == mcqc);

        ResultBody global;
        global.kind = ResultBody::Kind::GlobalMiq;
        global.global_miq = {{"s1", "a", 9}, {"s2", "b", 3}};
        CHECK(decode_result(encode_result(global)) == global);
    }

    SUBCASE("updates") {
        UpdateEvent e;
        e.kind = UpdateKind::Insert;
        e.dataset_id = "fresh";
        e.sequence = 42;
        e.cells = {5, 6, 100};
        auto [back, batch_end] = decode_update(encode_update(e, false));
        CHECK_FALSE(batch_end);
        CHECK(back.kind == e.kind);
        CHECK(back.dataset_id == e.dataset_id);
        CHECK(back.sequence == e.sequence);
        CHECK(back.cells == e.cells);

        UpdateEvent pts;
        pts.dataset_id = "p";
        pts.sequence = 43;
        pts.points = {{0.5, 0.25}};
        auto [back2, end2] = decode_update(encode_update(pts, true));
        CHECK(end2);
        CHECK(back2.points.size() == 1);
        CHECK(back2.points[0].lat == 0.5);
    }

    SUBCASE("deltas and errors") {
        DeltaBody d;
        d.registration_id = "reg1";
        d.body.kind = ResultBody::Kind::Miq;
        d.body.miq = TopKResults{3, {{"z", 1}}};
        CHECK(decode_delta(encode_delta(d)) == d);

        ErrorBody err{kErrStaleGraph, "rebuild required"};
        auto back = decode_error(encode_error(err));
        CHECK(back.code == err.code);
        CHECK(back.message == err.message);
        CHECK_THROWS_AS(throw_remote_error(back), StaleGraphError);
    }
}

TEST_CASE("comm meter arithmetic") {
    CommMeter m;
    m.note_tx(MsgType::QueryMiq, 100);
    m.note_tx(MsgType::QueryMiq, 50);
    m.note_rx(MsgType::Result, 400);
    CHECK(m.tx[static_cast<std::size_t>(MsgType::QueryMiq)].frames == 2);
    CHECK(m.tx_bytes() == 150);
    CHECK(m.rx_bytes() == 400);
    CHECK(m.total_bytes() == 550);

    CommMeter n;
    n.note_rx(MsgType::ResultDelta, 7);
    m += n;
    CHECK(m.rx_bytes() == 407);
    m.reset();
    CHECK(m.total_bytes() == 0);
}
