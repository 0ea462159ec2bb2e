#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/map.hpp"

namespace qslam {

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

struct ByteWriter {
    std::vector<std::uint8_t> bytes;
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const std::size_t n = bytes.size();
        bytes.resize(n + sizeof(T));
        std::memcpy(bytes.data() + n, &v, sizeof(T));
    }
};

struct ByteReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;
    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos + sizeof(T) > size) throw CorruptMap("truncated");
        T v;
        std::memcpy(&v, data + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
};

// Packed symmetric order matching the eta component order:
// (0,0), (1,1), (2,2), (0,1), (1,2), (0,2).
inline constexpr std::array<std::array<int, 2>, 6> kSym3 = {{
    {0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}}};

}  // namespace detail

inline constexpr std::uint32_t kMapVersion = 1;

/// Binary map format: magic "QMAP", version, patch count, fixed-size patch
/// records, trailing CRC32. All fields little-endian, doubles as 64-bit IEEE.
inline std::vector<std::uint8_t> serialize_map(const QuadricMap& map) {
    detail::ByteWriter w;
    w.bytes.insert(w.bytes.end(), {'Q', 'M', 'A', 'P'});
    w.put<std::uint32_t>(kMapVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.patches.size()));
    for (const auto& [id, p] : map.patches) {
        w.put<std::uint64_t>(id);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(p.cls));
        for (int i = 0; i < 10; ++i) w.put<double>(p.coeffs.c[i]);
        for (int i = 0; i < 3; ++i) w.put<double>(p.moments.mu[i]);
        for (const auto& [r, c] : detail::kSym3) w.put<double>(p.moments.S(r, c));
        for (int i = 0; i < 6; ++i) w.put<double>(p.moments.eta_bar[i]);
        for (int r = 0; r < 6; ++r) {
            for (int c = r; c < 6; ++c) w.put<double>(p.moments.Q(r, c));
        }
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 3; ++c) w.put<double>(p.moments.P(r, c));
        }
        for (int i = 0; i < 15; ++i) w.put<double>(p.moments.m4[i]);
        w.put<double>(p.mse);
        w.put<std::uint64_t>(p.moments.k);
    }
    w.put<std::uint32_t>(detail::crc32(w.bytes.data(), w.bytes.size()));
    return w.bytes;
}

inline QuadricMap deserialize_map(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) throw CorruptMap("too short");
    if (std::memcmp(bytes.data(), "QMAP", 4) != 0) throw CorruptMap("bad magic");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (stored_crc != detail::crc32(bytes.data(), bytes.size() - 4)) {
        throw CorruptMap("checksum mismatch");
    }
    detail::ByteReader r{bytes.data(), bytes.size() - 4, 4};
    const auto version = r.get<std::uint32_t>();
    if (version != kMapVersion) throw CorruptMap("unsupported version");
    const auto count = r.get<std::uint32_t>();
    QuadricMap map;
    for (std::uint32_t n = 0; n < count; ++n) {
        Patch p;
        const auto id = r.get<std::uint64_t>();
        const auto cls = r.get<std::uint8_t>();
        if (cls > 2) throw CorruptMap("bad patch class");
        p.id = id;
        p.cls = static_cast<PatchClass>(cls);
        for (int i = 0; i < 10; ++i) p.coeffs.c[i] = r.get<double>();
        for (int i = 0; i < 3; ++i) p.moments.mu[i] = r.get<double>();
        for (const auto& [row, col] : detail::kSym3) {
            const double v = r.get<double>();
            p.moments.S(row, col) = v;
            p.moments.S(col, row) = v;
        }
        for (int i = 0; i < 6; ++i) p.moments.eta_bar[i] = r.get<double>();
        for (int row = 0; row < 6; ++row) {
            for (int col = row; col < 6; ++col) {
                const double v = r.get<double>();
                p.moments.Q(row, col) = v;
                p.moments.Q(col, row) = v;
            }
        }
        for (int row = 0; row < 6; ++row) {
            for (int col = 0; col < 3; ++col) p.moments.P(row, col) = r.get<double>();
        }
        for (int i = 0; i < 15; ++i) p.moments.m4[i] = r.get<double>();
        p.mse = r.get<double>();
        p.moments.k = r.get<std::uint64_t>();
        map.total_points += p.moments.k;
        map.next_id = std::max(map.next_id, id + 1);
        map.patches.emplace(id, std::move(p));
    }
    if (r.pos != r.size) throw CorruptMap("trailing bytes");
    return map;
}

inline void save_map(const QuadricMap& map, const std::string& path) {
    const auto bytes = serialize_map(map);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline QuadricMap load_map(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_map(bytes);
}

}  // namespace qslam
