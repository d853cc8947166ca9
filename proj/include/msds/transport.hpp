#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "msds/source_service.hpp"
#include "msds/wire.hpp"

namespace msds {

/// One metered request/response link to a data source. Unsolicited
/// RESULT_DELTA frames are queued and surfaced through drain_async.
class Channel {
  public:
    virtual ~Channel() = default;

    virtual Frame round_trip(const Frame& request) = 0;

    /// The REGISTER frame a source pushes when the link opens.
    virtual Frame read_banner() = 0;

    /// Queued unsolicited frames, without blocking.
    virtual std::vector<Frame> drain_async() = 0;

    CommMeter& meter() { return meter_; }
    const CommMeter& meter() const { return meter_; }

  protected:
    CommMeter meter_;
};

/// Same framing and byte accounting as TCP, minus the sockets.
class InProcChannel final : public Channel {
  public:
    explicit InProcChannel(SourceService& service);

    Frame round_trip(const Frame& request) override;
    Frame read_banner() override;
    std::vector<Frame> drain_async() override;

    /// Simulates a dead source: subsequent calls throw TransportError.
    void kill() { dead_ = true; }

  private:
    SourceService* service_;
    std::uint64_t origin_;
    bool dead_ = false;

    static std::atomic<std::uint64_t> next_origin_;
};

/// Client side of the TCP transport.
class TcpChannel final : public Channel {
  public:
    TcpChannel(const std::string& host, std::uint16_t port);
    ~TcpChannel() override;

    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    Frame round_trip(const Frame& request) override;
    Frame read_banner() override;
    std::vector<Frame> drain_async() override;

  private:
    int fd_ = -1;
    std::vector<std::uint8_t> rdbuf_;
    std::deque<Frame> inbox_;

    Frame next_frame_blocking();
    void pump_available();
};

} // namespace msds
