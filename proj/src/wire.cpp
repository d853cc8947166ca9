#include "msds/wire.hpp"

#include <algorithm>
#include <cmath>

#include "msds/bytes.hpp"

namespace msds {

const char* msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::Register: return "REGISTER";
        case MsgType::QueryMiq: return "QUERY_MIQ";
        case MsgType::QueryMcqc: return "QUERY_MCQC";
        case MsgType::Result: return "RESULT";
        case MsgType::UpdateNotify: return "UPDATE_NOTIFY";
        case MsgType::ResultDelta: return "RESULT_DELTA";
        case MsgType::Error: return "ERROR";
    }
    return "UNKNOWN";
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(1 + frame.payload.size()));
    w.put_u8(static_cast<std::uint8_t>(frame.type));
    w.put_raw(frame.payload);
    return std::move(w.buf);
}

std::optional<Frame> try_decode_frame(std::span<const std::uint8_t> bytes, std::size_t& consumed) {
    consumed = 0;
    if (bytes.size() < 4) return std::nullopt;
    ByteReader r(bytes);
    std::uint32_t len = r.get_u32();
    if (len < 1 || len > kMaxFrameBytes) throw FormatError("bad frame length");
    if (bytes.size() < 4 + static_cast<std::size_t>(len)) return std::nullopt;

    Frame f;
    auto type = r.get_u8();
    if (type < 1 || type >= kMsgTypeCount) throw FormatError("unknown message type");
    f.type = static_cast<MsgType>(type);
    f.payload.assign(bytes.begin() + 5, bytes.begin() + 4 + len);
    consumed = 4 + len;
    return f;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    std::size_t consumed = 0;
    auto f = try_decode_frame(bytes, consumed);
    if (!f.has_value()) throw FormatError("truncated frame");
    if (consumed != bytes.size()) throw FormatError("trailing bytes after frame");
    return std::move(*f);
}

std::uint64_t CommMeter::tx_bytes() const {
    std::uint64_t n = 0;
    for (const Line& l : tx) n += l.bytes;
    return n;
}

std::uint64_t CommMeter::rx_bytes() const {
    std::uint64_t n = 0;
    for (const Line& l : rx) n += l.bytes;
    return n;
}

CommMeter& CommMeter::operator+=(const CommMeter& o) {
    for (std::size_t i = 0; i < kMsgTypeCount; ++i) {
        tx[i].frames += o.tx[i].frames;
        tx[i].bytes += o.tx[i].bytes;
        rx[i].frames += o.rx[i].frames;
        rx[i].bytes += o.rx[i].bytes;
    }
    return *this;
}

SourceDescriptor make_descriptor(std::string source_id, std::string address, const IBtree& tree) {
    if (tree.empty()) throw EmptyDatasetError("cannot advertise an empty index");
    SourceDescriptor d;
    d.source_id = std::move(source_id);
    d.address = std::move(address);
    d.grid = tree.grid();
    d.root_cell_rect = tree.root()->rect;
    d.dataset_count = static_cast<std::uint32_t>(tree.dataset_count());

    const GridConfig& g = d.grid;
    const Rect& r = d.root_cell_rect;
    d.min_lon = g.origin_lon + r.min_col * g.cell_width();
    d.max_lon = g.origin_lon + (r.max_col + 1.0) * g.cell_width();
    d.min_lat = g.origin_lat + r.min_row * g.cell_height();
    d.max_lat = g.origin_lat + (r.max_row + 1.0) * g.cell_height();
    d.pivot_lon = (d.min_lon + d.max_lon) / 2.0;
    d.pivot_lat = (d.min_lat + d.max_lat) / 2.0;
    double w = d.max_lon - d.min_lon, h = d.max_lat - d.min_lat;
    d.radius_deg = 0.5 * std::sqrt(w * w + h * h);
    return d;
}

namespace {

void put_version(ByteWriter& w) { w.put_u16(kProtocolVersion); }

ByteReader open_payload(const Frame& f, MsgType expect) {
    if (f.type != expect)
        throw FormatError(std::string("expected ") + msg_type_name(expect) + " frame, got " +
                          msg_type_name(f.type));
    ByteReader r(f.payload);
    if (r.get_u16() != kProtocolVersion) throw FormatError("unsupported protocol version");
    return r;
}

void put_grid(ByteWriter& w, const GridConfig& g) {
    w.put_f64(g.origin_lon);
    w.put_f64(g.origin_lat);
    w.put_f64(g.width);
    w.put_f64(g.height);
    w.put_u32(g.theta);
}

GridConfig get_grid(ByteReader& r) {
    double x0 = r.get_f64();
    double y0 = r.get_f64();
    double w = r.get_f64();
    double h = r.get_f64();
    std::uint32_t theta = r.get_u32();
    return GridConfig(x0, y0, w, h, theta);
}

void put_result_body(ByteWriter& w, const ResultBody& r) {
    w.put_u8(static_cast<std::uint8_t>(r.kind));
    switch (r.kind) {
        case ResultBody::Kind::Ack:
            break;
        case ResultBody::Kind::Miq:
            w.put_u32(r.miq.k);
            w.put_u32(static_cast<std::uint32_t>(r.miq.entries.size()));
            for (const auto& e : r.miq.entries) {
                w.put_string(e.dataset_id);
                w.put_u32(e.intersection);
            }
            break;
        case ResultBody::Kind::Mcqc:
            w.put_u8(r.mcqc.truncated ? 1 : 0);
            w.put_u64(r.mcqc.total_coverage);
            w.put_u32(static_cast<std::uint32_t>(r.mcqc.selected.size()));
            for (const auto& s : r.mcqc.selected) {
                w.put_string(s.dataset_id);
                w.put_u64(s.increment);
            }
            break;
        case ResultBody::Kind::GlobalMiq:
            w.put_u32(static_cast<std::uint32_t>(r.global_miq.size()));
            for (const auto& e : r.global_miq) {
                w.put_string(e.source_id);
                w.put_string(e.dataset_id);
                w.put_u32(e.intersection);
            }
            break;
        case ResultBody::Kind::GlobalMcqc:
            w.put_string(r.mcqc_source);
            w.put_u8(r.mcqc.truncated ? 1 : 0);
            w.put_u64(r.mcqc.total_coverage);
            w.put_u32(static_cast<std::uint32_t>(r.mcqc.selected.size()));
            for (const auto& s : r.mcqc.selected) {
                w.put_string(s.dataset_id);
                w.put_u64(s.increment);
            }
            break;
    }
    if (r.kind == ResultBody::Kind::GlobalMiq || r.kind == ResultBody::Kind::GlobalMcqc) {
        w.put_u32(static_cast<std::uint32_t>(r.source_bytes.size()));
        for (const auto& sb : r.source_bytes) {
            w.put_string(sb.source_id);
            w.put_u64(sb.bytes);
        }
    }
}

ResultBody get_result_body(ByteReader& r) {
    ResultBody out;
    auto kind = r.get_u8();
    if (kind > static_cast<std::uint8_t>(ResultBody::Kind::GlobalMcqc))
        throw FormatError("unknown result kind");
    out.kind = static_cast<ResultBody::Kind>(kind);
    switch (out.kind) {
        case ResultBody::Kind::Ack:
            break;
        case ResultBody::Kind::Miq: {
            out.miq.k = r.get_u32();
            std::uint32_t n = r.get_u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                TopKEntry e;
                e.dataset_id = r.get_string();
                e.intersection = r.get_u32();
                out.miq.entries.push_back(std::move(e));
            }
            break;
        }
        case ResultBody::Kind::Mcqc: {
            out.mcqc.truncated = r.get_u8() != 0;
            out.mcqc.total_coverage = r.get_u64();
            std::uint32_t n = r.get_u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                McqcSelection s;
                s.dataset_id = r.get_string();
                s.increment = r.get_u64();
                out.mcqc.selected.push_back(std::move(s));
            }
            break;
        }
        case ResultBody::Kind::GlobalMiq: {
            std::uint32_t n = r.get_u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                GlobalMiqEntry e;
                e.source_id = r.get_string();
                e.dataset_id = r.get_string();
                e.intersection = r.get_u32();
                out.global_miq.push_back(std::move(e));
            }
            break;
        }
        case ResultBody::Kind::GlobalMcqc: {
            out.mcqc_source = r.get_string();
            out.mcqc.truncated = r.get_u8() != 0;
            out.mcqc.total_coverage = r.get_u64();
            std::uint32_t n = r.get_u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                McqcSelection s;
                s.dataset_id = r.get_string();
                s.increment = r.get_u64();
                out.mcqc.selected.push_back(std::move(s));
            }
            break;
        }
    }
    if (out.kind == ResultBody::Kind::GlobalMiq || out.kind == ResultBody::Kind::GlobalMcqc) {
        std::uint32_t n = r.get_u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            SourceBytes sb;
            sb.source_id = r.get_string();
            sb.bytes = r.get_u64();
            out.source_bytes.push_back(std::move(sb));
        }
    }
    return out;
}

} // namespace

Frame encode_register(const SourceDescriptor& d) {
    ByteWriter w;
    put_version(w);
    w.put_string(d.source_id);
    w.put_string(d.address);
    w.put_f64(d.min_lon);
    w.put_f64(d.min_lat);
    w.put_f64(d.max_lon);
    w.put_f64(d.max_lat);
    w.put_f64(d.pivot_lon);
    w.put_f64(d.pivot_lat);
    w.put_f64(d.radius_deg);
    w.put_u32(d.root_cell_rect.min_col);
    w.put_u32(d.root_cell_rect.min_row);
    w.put_u32(d.root_cell_rect.max_col);
    w.put_u32(d.root_cell_rect.max_row);
    put_grid(w, d.grid);
    w.put_u32(d.dataset_count);
    return Frame{MsgType::Register, std::move(w.buf)};
}

SourceDescriptor decode_register(const Frame& f) {
    ByteReader r = open_payload(f, MsgType::Register);
    SourceDescriptor d;
    d.source_id = r.get_string();
    d.address = r.get_string();
    d.min_lon = r.get_f64();
    d.min_lat = r.get_f64();
    d.max_lon = r.get_f64();
    d.max_lat = r.get_f64();
    d.pivot_lon = r.get_f64();
    d.pivot_lat = r.get_f64();
    d.radius_deg = r.get_f64();
    d.root_cell_rect.min_col = r.get_u32();
    d.root_cell_rect.min_row = r.get_u32();
    d.root_cell_rect.max_col = r.get_u32();
    d.root_cell_rect.max_row = r.get_u32();
    d.grid = get_grid(r);
    d.dataset_count = r.get_u32();
    if (!r.done()) throw FormatError("trailing bytes in REGISTER payload");
    return d;
}

Frame encode_query(const QueryEnvelope& q) {
    ByteWriter w;
    put_version(w);
    w.put_string(q.query_id);
    w.put_u8(q.live ? 1 : 0);
    w.put_u32(q.k);
    w.put_f64(q.delta);
    w.put_u64(q.grid_fp);
    w.put_sorted_u32s(q.cells);
    w.put_u32(static_cast<std::uint32_t>(q.points.size()));
    for (const GeoPoint& p : q.points) {
        w.put_f64(p.lat);
        w.put_f64(p.lon);
    }
    return Frame{q.mode == QueryMode::Miq ? MsgType::QueryMiq : MsgType::QueryMcqc,
                 std::move(w.buf)};
}

QueryEnvelope decode_query(const Frame& f) {
    if (f.type != MsgType::QueryMiq && f.type != MsgType::QueryMcqc)
        throw FormatError("expected a query frame");
    ByteReader r(f.payload);
    if (r.get_u16() != kProtocolVersion) throw FormatError("unsupported protocol version");
    QueryEnvelope q;
    q.mode = f.type == MsgType::QueryMiq ? QueryMode::Miq : QueryMode::Mcqc;
    q.query_id = r.get_string();
    q.live = r.get_u8() != 0;
    q.k = r.get_u32();
    q.delta = r.get_f64();
    q.grid_fp = r.get_u64();
    q.cells = r.get_sorted_u32s();
    std::uint32_t npts = r.get_u32();
    for (std::uint32_t i = 0; i < npts; ++i) {
        GeoPoint p;
        p.lat = r.get_f64();
        p.lon = r.get_f64();
        q.points.push_back(p);
    }
    if (!r.done()) throw FormatError("trailing bytes in query payload");
    return q;
}

Frame encode_result(const ResultBody& body) {
    ByteWriter w;
    put_version(w);
    put_result_body(w, body);
    return Frame{MsgType::Result, std::move(w.buf)};
}

ResultBody decode_result(const Frame& f) {
    ByteReader r = open_payload(f, MsgType::Result);
    ResultBody body = get_result_body(r);
    if (!r.done()) throw FormatError("trailing bytes in RESULT payload");
    return body;
}

Frame encode_update(const UpdateEvent& e, bool batch_end) {
    ByteWriter w;
    put_version(w);
    w.put_u8(static_cast<std::uint8_t>(e.kind));
    w.put_string(e.dataset_id);
    w.put_u64(e.sequence);
    w.put_u8(batch_end ? 1 : 0);
    w.put_u8(e.has_points() ? 0 : 1);
    if (e.has_points()) {
        w.put_u32(static_cast<std::uint32_t>(e.points.size()));
        for (const GeoPoint& p : e.points) {
            w.put_f64(p.lat);
            w.put_f64(p.lon);
        }
    } else {
        w.put_sorted_u32s(e.cells);
    }
    return Frame{MsgType::UpdateNotify, std::move(w.buf)};
}

std::pair<UpdateEvent, bool> decode_update(const Frame& f) {
    ByteReader r = open_payload(f, MsgType::UpdateNotify);
    UpdateEvent e;
    auto kind = r.get_u8();
    if (kind > 1) throw FormatError("unknown update kind");
    e.kind = static_cast<UpdateKind>(kind);
    e.dataset_id = r.get_string();
    e.sequence = r.get_u64();
    bool batch_end = r.get_u8() != 0;
    auto payload_kind = r.get_u8();
    if (payload_kind == 0) {
        std::uint32_t n = r.get_u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            GeoPoint p;
            p.lat = r.get_f64();
            p.lon = r.get_f64();
            e.points.push_back(p);
        }
    } else if (payload_kind == 1) {
        e.cells = r.get_sorted_u32s();
    } else {
        throw FormatError("unknown update payload kind");
    }
    if (!r.done()) throw FormatError("trailing bytes in UPDATE_NOTIFY payload");
    return {std::move(e), batch_end};
}

Frame encode_delta(const DeltaBody& d) {
    ByteWriter w;
    put_version(w);
    w.put_string(d.registration_id);
    put_result_body(w, d.body);
    return Frame{MsgType::ResultDelta, std::move(w.buf)};
}

DeltaBody decode_delta(const Frame& f) {
    ByteReader r = open_payload(f, MsgType::ResultDelta);
    DeltaBody d;
    d.registration_id = r.get_string();
    d.body = get_result_body(r);
    if (!r.done()) throw FormatError("trailing bytes in RESULT_DELTA payload");
    return d;
}

Frame encode_error(const ErrorBody& e) {
    ByteWriter w;
    put_version(w);
    w.put_u16(e.code);
    w.put_string(e.message);
    return Frame{MsgType::Error, std::move(w.buf)};
}

ErrorBody decode_error(const Frame& f) {
    ByteReader r = open_payload(f, MsgType::Error);
    ErrorBody e;
    e.code = r.get_u16();
    e.message = r.get_string();
    if (!r.done()) throw FormatError("trailing bytes in ERROR payload");
    return e;
}

ErrorBody error_body_for(const std::exception& e) {
    std::uint16_t code = kErrGeneric;
    if (dynamic_cast<const NotFoundError*>(&e)) code = kErrNotFound;
    else if (dynamic_cast<const DuplicateDatasetError*>(&e)) code = kErrDuplicate;
    else if (dynamic_cast<const InvalidParameterError*>(&e)) code = kErrInvalidParameter;
    else if (dynamic_cast<const IncompatibleGridError*>(&e)) code = kErrIncompatibleGrid;
    else if (dynamic_cast<const FormatError*>(&e)) code = kErrFormat;
    else if (dynamic_cast<const StaleGraphError*>(&e)) code = kErrStaleGraph;
    else if (dynamic_cast<const GuardExceededError*>(&e)) code = kErrGuard;
    else if (dynamic_cast<const OutOfBoundsError*>(&e)) code = kErrOutOfBounds;
    else if (dynamic_cast<const EmptyDatasetError*>(&e)) code = kErrEmptyDataset;
    return ErrorBody{code, e.what()};
}

void throw_remote_error(const ErrorBody& e) {
    switch (e.code) {
        case kErrNotFound: throw NotFoundError(e.message);
        case kErrDuplicate: throw DuplicateDatasetError(e.message);
        case kErrInvalidParameter: throw InvalidParameterError(e.message);
        case kErrIncompatibleGrid: throw IncompatibleGridError(e.message);
        case kErrFormat: throw FormatError(e.message);
        case kErrStaleGraph: throw StaleGraphError(e.message);
        case kErrGuard: throw GuardExceededError(e.message);
        case kErrOutOfBounds: throw OutOfBoundsError(e.message);
        case kErrEmptyDataset: throw EmptyDatasetError(e.message);
        default: throw Error(e.message);
    }
}

} // namespace msds
