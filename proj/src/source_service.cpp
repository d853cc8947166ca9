#include "msds/source_service.hpp"

#include <algorithm>

namespace msds {

SourceService::SourceService(std::string source_id, std::string address, IBtree tree)
    : source_id_(std::move(source_id)), address_(std::move(address)), store_(std::move(tree)) {}

std::vector<std::uint8_t> SourceService::banner_bytes(std::uint64_t origin) {
    std::lock_guard lock(mu_);
    auto frame = encode_register(make_descriptor(source_id_, address_, store_.tree()));
    auto bytes = encode_frame(frame);
    meter_.note_tx(MsgType::Register, bytes.size());
    advertised_rect_ = store_.tree().root()->rect;
    if (std::find(banner_origins_.begin(), banner_origins_.end(), origin) ==
        banner_origins_.end())
        banner_origins_.push_back(origin);
    return bytes;
}

void SourceService::refresh_descriptor_if_grown() {
    if (store_.tree().empty()) return;
    Rect now = store_.tree().root()->rect;
    if (now == advertised_rect_) return;
    advertised_rect_ = now;
    auto frame = encode_register(make_descriptor(source_id_, address_, store_.tree()));
    auto bytes = encode_frame(frame);
    for (std::uint64_t origin : banner_origins_) {
        meter_.note_tx(MsgType::Register, bytes.size());
        pending_[origin].push_back(bytes);
    }
}

namespace {

ResultBody body_of(const LiveSnapshot& snap) {
    ResultBody body;
    if (snap.mode == QueryMode::Miq) {
        body.kind = ResultBody::Kind::Miq;
        body.miq = snap.miq;
    } else {
        body.kind = ResultBody::Kind::Mcqc;
        body.mcqc = snap.mcqc;
    }
    return body;
}

} // namespace

Frame SourceService::dispatch(const Frame& request, std::uint64_t origin) {
    switch (request.type) {
        case MsgType::QueryMiq:
        case MsgType::QueryMcqc: {
            QueryEnvelope q = decode_query(request);
            if (q.grid_fp != store_.grid().fingerprint())
                throw IncompatibleGridError("query cells are not on this source's grid");
            SpatialSet set = set_from_cells(q.cells, store_.grid(), q.query_id);
            LiveQuerySpec spec{q.mode, q.k, q.delta};
            if (q.live) {
                auto [reg_id, snap] = store_.register_live_query(std::move(set), spec);
                delta_route_[reg_id] = origin;
                return encode_result(body_of(snap));
            }
            return encode_result(body_of(store_.run_static(set, spec)));
        }
        case MsgType::UpdateNotify: {
            auto [event, batch_end] = decode_update(request);
            store_.ingest(event);
            refresh_descriptor_if_grown();
            if (batch_end) queue_deltas(store_.emit_pending());
            return encode_result(ResultBody{});
        }
        default:
            throw FormatError(std::string("unexpected frame type ") +
                              msg_type_name(request.type));
    }
}

void SourceService::queue_deltas(std::vector<ResultDelta> deltas) {
    for (ResultDelta& d : deltas) {
        auto route = delta_route_.find(d.registration_id);
        if (route == delta_route_.end()) continue;
        auto frame = encode_delta(DeltaBody{d.registration_id, body_of(d.snapshot)});
        auto bytes = encode_frame(frame);
        meter_.note_tx(MsgType::ResultDelta, bytes.size());
        pending_[route->second].push_back(std::move(bytes));
    }
}

std::vector<std::uint8_t> SourceService::handle_frame(std::span<const std::uint8_t> bytes,
                                                      std::uint64_t origin) {
    std::lock_guard lock(mu_);
    Frame response;
    bool rx_metered = false;
    try {
        Frame request = decode_frame(bytes);
        meter_.note_rx(request.type, bytes.size());
        rx_metered = true;
        response = dispatch(request, origin);
    } catch (const std::exception& e) {
        if (!rx_metered) meter_.note_rx(MsgType::Error, bytes.size());
        response = encode_error(error_body_for(e));
    }
    auto out = encode_frame(response);
    meter_.note_tx(response.type, out.size());
    return out;
}

std::vector<std::vector<std::uint8_t>> SourceService::take_deltas(std::uint64_t origin) {
    std::lock_guard lock(mu_);
    auto it = pending_.find(origin);
    if (it == pending_.end()) return {};
    auto frames = std::move(it->second);
    pending_.erase(it);
    return frames;
}

} // namespace msds
