#include "msds/transport.hpp"

#include "msds/tcp.hpp"

namespace msds {

std::atomic<std::uint64_t> InProcChannel::next_origin_{1000000};

InProcChannel::InProcChannel(SourceService& service)
    : service_(&service), origin_(next_origin_.fetch_add(1)) {}

Frame InProcChannel::round_trip(const Frame& request) {
    if (dead_) throw TransportError("source is unreachable");
    auto bytes = encode_frame(request);
    meter_.note_tx(request.type, bytes.size());
    auto response_bytes = service_->handle_frame(bytes, origin_);
    Frame response = decode_frame(response_bytes);
    meter_.note_rx(response.type, response_bytes.size());
    return response;
}

Frame InProcChannel::read_banner() {
    if (dead_) throw TransportError("source is unreachable");
    auto bytes = service_->banner_bytes(origin_);
    Frame banner = decode_frame(bytes);
    meter_.note_rx(banner.type, bytes.size());
    return banner;
}

std::vector<Frame> InProcChannel::drain_async() {
    if (dead_) throw TransportError("source is unreachable");
    std::vector<Frame> out;
    for (auto& bytes : service_->take_deltas(origin_)) {
        Frame f = decode_frame(bytes);
        meter_.note_rx(f.type, bytes.size());
        out.push_back(std::move(f));
    }
    return out;
}

TcpChannel::TcpChannel(const std::string& host, std::uint16_t port)
    : fd_(tcp_connect(host, port)) {}

TcpChannel::~TcpChannel() { tcp_close(fd_); }

void TcpChannel::pump_available() {
    std::uint8_t chunk[4096];
    while (true) {
        std::size_t got = tcp_recv_some(fd_, chunk, sizeof chunk, false);
        if (got == SIZE_MAX) break; // nothing pending
        if (got == 0) throw TransportError("source closed the connection");
        rdbuf_.insert(rdbuf_.end(), chunk, chunk + got);
    }
    std::size_t consumed = 0;
    while (auto frame = try_decode_frame(rdbuf_, consumed)) {
        meter_.note_rx(frame->type, consumed);
        rdbuf_.erase(rdbuf_.begin(), rdbuf_.begin() + static_cast<std::ptrdiff_t>(consumed));
        inbox_.push_back(std::move(*frame));
    }
}

Frame TcpChannel::next_frame_blocking() {
    while (true) {
        pump_available();
        if (!inbox_.empty()) {
            Frame f = std::move(inbox_.front());
            inbox_.pop_front();
            return f;
        }
        std::uint8_t chunk[4096];
        std::size_t got = tcp_recv_some(fd_, chunk, sizeof chunk, true);
        if (got == 0) throw TransportError("source closed the connection");
        rdbuf_.insert(rdbuf_.end(), chunk, chunk + got);
    }
}

Frame TcpChannel::round_trip(const Frame& request) {
    auto bytes = encode_frame(request);
    meter_.note_tx(request.type, bytes.size());
    tcp_send_all(fd_, bytes.data(), bytes.size());
    // Deltas can interleave with the response; stash them for drain_async.
    std::vector<Frame> stashed;
    while (true) {
        Frame f = next_frame_blocking();
        if (f.type == MsgType::ResultDelta) {
            stashed.push_back(std::move(f));
            continue;
        }
        for (auto& d : stashed) inbox_.push_back(std::move(d));
        return f;
    }
}

Frame TcpChannel::read_banner() { return next_frame_blocking(); }

std::vector<Frame> TcpChannel::drain_async() {
    pump_available();
    std::vector<Frame> out(std::make_move_iterator(inbox_.begin()),
                           std::make_move_iterator(inbox_.end()));
    inbox_.clear();
    return out;
}

} // namespace msds
