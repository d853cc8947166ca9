#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msds/errors.hpp"

namespace msds {

/// Little-endian byte sink used by all snapshot and wire encoders.
struct ByteWriter {
    std::vector<std::uint8_t> buf;

    void put_u8(std::uint8_t v) { buf.push_back(v); }

    void put_u16(std::uint16_t v) {
        buf.push_back(static_cast<std::uint8_t>(v));
        buf.push_back(static_cast<std::uint8_t>(v >> 8));
    }

    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

    void put_varint(std::uint64_t v) {
        while (v >= 0x80) {
            buf.push_back(static_cast<std::uint8_t>(v) | 0x80);
            v >>= 7;
        }
        buf.push_back(static_cast<std::uint8_t>(v));
    }

    void put_string(std::string_view s) {
        put_u32(static_cast<std::uint32_t>(s.size()));
        buf.insert(buf.end(), s.begin(), s.end());
    }

    void put_raw(std::span<const std::uint8_t> bytes) {
        buf.insert(buf.end(), bytes.begin(), bytes.end());
    }

    /// Sorted id list as count + first value + deltas, all varint.
    void put_sorted_u32s(std::span<const std::uint32_t> vals) {
        put_u32(static_cast<std::uint32_t>(vals.size()));
        std::uint32_t prev = 0;
        for (std::uint32_t v : vals) {
            put_varint(v - prev);
            prev = v;
        }
    }
};

/// Bounds-checked little-endian reader; throws FormatError on truncation.
struct ByteReader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;

    explicit ByteReader(std::span<const std::uint8_t> bytes) : data(bytes) {}

    std::size_t remaining() const { return data.size() - pos; }
    bool done() const { return pos == data.size(); }

    void require(std::size_t n) const {
        if (remaining() < n) throw FormatError("truncated input: need " + std::to_string(n) +
                                               " bytes, have " + std::to_string(remaining()));
    }

    std::uint8_t get_u8() {
        require(1);
        return data[pos++];
    }

    std::uint16_t get_u16() {
        require(2);
        std::uint16_t v = static_cast<std::uint16_t>(data[pos]) |
                          static_cast<std::uint16_t>(data[pos + 1]) << 8;
        pos += 2;
        return v;
    }

    std::uint32_t get_u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }

    std::uint64_t get_u64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }

    double get_f64() { return std::bit_cast<double>(get_u64()); }

    std::uint64_t get_varint() {
        std::uint64_t v = 0;
        int shift = 0;
        while (true) {
            if (shift > 63) throw FormatError("varint overflow");
            std::uint8_t b = get_u8();
            v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
            if ((b & 0x80) == 0) return v;
            shift += 7;
        }
    }

    std::string get_string() {
        std::uint32_t n = get_u32();
        require(n);
        std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
        pos += n;
        return s;
    }

    std::vector<std::uint32_t> get_sorted_u32s() {
        std::uint32_t n = get_u32();
        std::vector<std::uint32_t> vals;
        vals.reserve(n);
        std::uint64_t prev = 0;
        for (std::uint32_t i = 0; i < n; ++i) {
            prev += get_varint();
            if (prev > 0xFFFFFFFFull) throw FormatError("u32 delta sequence overflow");
            vals.push_back(static_cast<std::uint32_t>(prev));
        }
        return vals;
    }
};

/// FNV-1a, used for grid/content fingerprints and result hashes.
struct Fnv1a {
    std::uint64_t state = 0xcbf29ce484222325ull;

    void mix(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= p[i];
            state *= 0x100000001b3ull;
        }
    }

    void mix_u32(std::uint32_t v) { mix(&v, sizeof v); }
    void mix_u64(std::uint64_t v) { mix(&v, sizeof v); }
    void mix_f64(double v) { mix_u64(std::bit_cast<std::uint64_t>(v)); }
    void mix_str(std::string_view s) {
        mix_u64(s.size());
        mix(s.data(), s.size());
    }

    std::uint64_t value() const { return state; }
};

} // namespace msds
