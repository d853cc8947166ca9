#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msds/dynamic.hpp"
#include "msds/geometry.hpp"

namespace msds {

// Length-prefixed binary frames shared by the TCP and in-process transports:
// u32 length (type byte + payload), u8 message type, payload. All integers
// little-endian; every payload opens with a u16 protocol version.

constexpr std::uint16_t kProtocolVersion = 1;
constexpr std::uint32_t kMaxFrameBytes = 1u << 28;

enum class MsgType : std::uint8_t {
    Register = 1,
    QueryMiq = 2,
    QueryMcqc = 3,
    Result = 4,
    UpdateNotify = 5,
    ResultDelta = 6,
    Error = 7,
};

constexpr std::size_t kMsgTypeCount = 8;
const char* msg_type_name(MsgType t);

struct Frame {
    MsgType type = MsgType::Error;
    std::vector<std::uint8_t> payload;

    std::size_t wire_size() const { return 4 + 1 + payload.size(); }
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);

/// Decodes a buffer holding exactly one frame.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Streaming decode: returns the first complete frame and how many bytes it
/// consumed, or nothing if the buffer is still short.
std::optional<Frame> try_decode_frame(std::span<const std::uint8_t> bytes,
                                      std::size_t& consumed);

/// Per-message-type byte and frame counters for one endpoint.
struct CommMeter {
    struct Line {
        std::uint64_t frames = 0;
        std::uint64_t bytes = 0;

        bool operator==(const Line&) const = default;
    };
    std::array<Line, kMsgTypeCount> tx{};
    std::array<Line, kMsgTypeCount> rx{};

    void note_tx(MsgType t, std::size_t wire_bytes) {
        auto& line = tx[static_cast<std::size_t>(t)];
        ++line.frames;
        line.bytes += wire_bytes;
    }
    void note_rx(MsgType t, std::size_t wire_bytes) {
        auto& line = rx[static_cast<std::size_t>(t)];
        ++line.frames;
        line.bytes += wire_bytes;
    }

    std::uint64_t tx_bytes() const;
    std::uint64_t rx_bytes() const;
    std::uint64_t total_bytes() const { return tx_bytes() + rx_bytes(); }
    void reset() { *this = CommMeter{}; }

    CommMeter& operator+=(const CommMeter& o);
    bool operator==(const CommMeter&) const = default;
};

/// A data source's root advertisement, in degrees so the center can route
/// across sources built at different resolutions.
struct SourceDescriptor {
    std::string source_id;
    std::string address;
    double min_lon = 0, min_lat = 0, max_lon = 0, max_lat = 0; // root MBR, degrees
    double pivot_lon = 0, pivot_lat = 0;
    double radius_deg = 0;
    Rect root_cell_rect;
    GridConfig grid;
    std::uint32_t dataset_count = 0;

    bool operator==(const SourceDescriptor&) const = default;
};

SourceDescriptor make_descriptor(std::string source_id, std::string address, const IBtree& tree);

/// Query request as transmitted: cells are already on the target grid.
struct QueryEnvelope {
    QueryMode mode = QueryMode::Miq;
    std::string query_id;
    bool live = false;
    std::uint32_t k = 0;
    double delta = 0.0; // target-grid cell units, MCQC only
    std::uint64_t grid_fp = 0;
    std::vector<CellId> cells;
    std::vector<GeoPoint> points; // user-to-center only

    bool operator==(const QueryEnvelope&) const = default;
};

struct GlobalMiqEntry {
    std::string source_id;
    std::string dataset_id;
    std::uint32_t intersection = 0;

    bool operator==(const GlobalMiqEntry&) const = default;
};

/// Per-source wire bytes for one fanned-out query.
struct SourceBytes {
    std::string source_id;
    std::uint64_t bytes = 0;

    bool operator==(const SourceBytes&) const = default;
};

struct ResultBody {
    enum class Kind : std::uint8_t { Ack = 0, Miq = 1, Mcqc = 2, GlobalMiq = 3, GlobalMcqc = 4 };
    Kind kind = Kind::Ack;
    TopKResults miq;
    McqcResult mcqc;
    std::vector<GlobalMiqEntry> global_miq;
    std::string mcqc_source;               // winning source for GlobalMcqc
    std::vector<SourceBytes> source_bytes; // global kinds only

    bool operator==(const ResultBody&) const = default;
};

struct DeltaBody {
    std::string registration_id;
    ResultBody body;

    bool operator==(const DeltaBody&) const = default;
};

struct ErrorBody {
    std::uint16_t code = 0;
    std::string message;
};

// Error codes carried on the wire.
enum : std::uint16_t {
    kErrGeneric = 1,
    kErrNotFound = 2,
    kErrDuplicate = 3,
    kErrInvalidParameter = 4,
    kErrIncompatibleGrid = 5,
    kErrFormat = 6,
    kErrStaleGraph = 7,
    kErrGuard = 8,
    kErrOutOfBounds = 9,
    kErrEmptyDataset = 10,
};

Frame encode_register(const SourceDescriptor& d);
SourceDescriptor decode_register(const Frame& f);

Frame encode_query(const QueryEnvelope& q);
QueryEnvelope decode_query(const Frame& f);

Frame encode_result(const ResultBody& r);
ResultBody decode_result(const Frame& f);

Frame encode_update(const UpdateEvent& e, bool batch_end);
std::pair<UpdateEvent, bool> decode_update(const Frame& f);

Frame encode_delta(const DeltaBody& d);
DeltaBody decode_delta(const Frame& f);

Frame encode_error(const ErrorBody& e);
ErrorBody decode_error(const Frame& f);

/// Maps a caught exception onto a wire error body.
ErrorBody error_body_for(const std::exception& e);

/// Rebuilds and throws the library exception matching a wire error.
[[noreturn]] void throw_remote_error(const ErrorBody& e);

} // namespace msds
