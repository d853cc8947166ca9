#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "msds/dynamic.hpp"
#include "msds/wire.hpp"

namespace msds {

/// Protocol-facing wrapper around one source's store: decodes request frames,
/// serializes responses, and queues RESULT_DELTA frames for the connection
/// that registered each live query. Requests serialize on one writer lock.
class SourceService {
  public:
    SourceService(std::string source_id, std::string address, IBtree tree);

    const std::string& id() const { return source_id_; }

    /// The REGISTER frame a source pushes on every new connection. The
    /// origin is remembered: when an update grows the root region, a fresh
    /// REGISTER is queued to every banner consumer so routing stays sound.
    std::vector<std::uint8_t> banner_bytes(std::uint64_t origin);

    /// Handles one request frame and returns the encoded response frame.
    /// `origin` identifies the requesting connection for delta routing.
    std::vector<std::uint8_t> handle_frame(std::span<const std::uint8_t> bytes,
                                           std::uint64_t origin);

    /// Queued delta frames addressed to this origin, already metered as sent.
    std::vector<std::vector<std::uint8_t>> take_deltas(std::uint64_t origin);

    SourceStore& store() { return store_; }
    const CommMeter& meter() const { return meter_; }

  private:
    std::mutex mu_;
    std::string source_id_;
    std::string address_;
    SourceStore store_;
    CommMeter meter_;
    std::unordered_map<std::string, std::uint64_t> delta_route_;
    std::unordered_map<std::uint64_t, std::vector<std::vector<std::uint8_t>>> pending_;
    std::vector<std::uint64_t> banner_origins_;
    Rect advertised_rect_;

    Frame dispatch(const Frame& request, std::uint64_t origin);
    void queue_deltas(std::vector<ResultDelta> deltas);
    void refresh_descriptor_if_grown();
};

} // namespace msds
