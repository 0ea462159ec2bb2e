#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/map.hpp"

namespace qslam {

/// Morton-interleaved cell code of a quantized 3D position.
struct GeoCell {
    std::uint64_t code = 0;
    bool operator==(const GeoCell&) const = default;
};

namespace detail {

inline constexpr std::int64_t kCellBits = 20;
inline constexpr std::int64_t kCellOffset = 1ll << (kCellBits - 1);

inline std::uint64_t spread_bits(std::uint64_t v) {
    // Spaces the low 20 bits of v three apart.
    v &= (1ull << 20) - 1;
    v = (v | (v << 32)) & 0x1f00000000ffffull;
    v = (v | (v << 16)) & 0x1f0000ff0000ffull;
    v = (v | (v << 8)) & 0x100f00f00f00f00full;
    v = (v | (v << 4)) & 0x10c30c30c30c30c3ull;
    v = (v | (v << 2)) & 0x1249249249249249ull;
    return v;
}

inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

inline std::int64_t cell_index(double coord, double resolution) {
    return static_cast<std::int64_t>(std::floor(coord / resolution));
}

inline GeoCell encode_indices(std::int64_t ix, std::int64_t iy, std::int64_t iz) {
    for (std::int64_t v : {ix, iy, iz}) {
        if (v < -detail::kCellOffset || v >= detail::kCellOffset) throw OutOfRange{};
    }
    const std::uint64_t ux = static_cast<std::uint64_t>(ix + detail::kCellOffset);
    const std::uint64_t uy = static_cast<std::uint64_t>(iy + detail::kCellOffset);
    const std::uint64_t uz = static_cast<std::uint64_t>(iz + detail::kCellOffset);
    return {detail::spread_bits(ux) | (detail::spread_bits(uy) << 1) |
            (detail::spread_bits(uz) << 2)};
}

inline GeoCell encode_cell(const Vec3& p, double resolution) {
    return encode_indices(cell_index(p.x(), resolution), cell_index(p.y(), resolution),
                          cell_index(p.z(), resolution));
}

/// Open-addressed double-hash table from cell code to patch id; one patch per
/// occupied cell, the one with the smallest mse.
class MapIndex {
public:
    MapIndex() = default;
    explicit MapIndex(double resolution) : resolution_(resolution) {}

    double resolution() const { return resolution_; }
    std::size_t size() const { return occupied_; }
    std::uint64_t probe_count() const { return probes_; }
    void reset_probe_count() { probes_ = 0; }

    void insert(GeoCell cell, std::uint64_t patch_id, double mse) {
        if (capacity_ == 0 || (occupied_ + 1) * 10 > capacity_ * 7) rehash();
        insert_slot(cell.code, patch_id, mse);
    }

    std::optional<std::uint64_t> lookup(GeoCell cell) const {
        ++probes_;
        if (capacity_ == 0) return std::nullopt;
        const std::uint64_t mask = capacity_ - 1;
        std::uint64_t pos = detail::mix64(cell.code) & mask;
        const std::uint64_t step = (detail::mix64(~cell.code) | 1) & mask;
        for (std::size_t n = 0; n < capacity_; ++n) {
            const Slot& s = slots_[pos];
            if (!s.occupied) return std::nullopt;
            if (s.code == cell.code) return s.patch_id;
            pos = (pos + step) & mask;
        }
        return std::nullopt;
    }

private:
    struct Slot {
        std::uint64_t code = 0;
        std::uint64_t patch_id = 0;
        double mse = 0.0;
        bool occupied = false;
    };

    void insert_slot(std::uint64_t code, std::uint64_t patch_id, double mse) {
        const std::uint64_t mask = capacity_ - 1;
        std::uint64_t pos = detail::mix64(code) & mask;
        const std::uint64_t step = (detail::mix64(~code) | 1) & mask;
        while (true) {
            Slot& s = slots_[pos];
            if (!s.occupied) {
                s = {code, patch_id, mse, true};
                ++occupied_;
                return;
            }
            if (s.code == code) {
                if (mse < s.mse || (mse == s.mse && patch_id < s.patch_id)) {
                    s.patch_id = patch_id;
                    s.mse = mse;
                }
                return;
            }
            pos = (pos + step) & mask;
        }
    }

    void rehash() {
        std::size_t cap = capacity_ ? capacity_ * 2 : 64;
        std::vector<Slot> old = std::move(slots_);
        slots_.assign(cap, Slot{});
        capacity_ = cap;
        occupied_ = 0;
        for (const Slot& s : old) {
            if (s.occupied) insert_slot(s.code, s.patch_id, s.mse);
        }
    }

    double resolution_ = 1.5;
    std::vector<Slot> slots_;
    std::size_t capacity_ = 0;
    std::size_t occupied_ = 0;
    mutable std::uint64_t probes_ = 0;
};

inline MapIndex build_index(const QuadricMap& map, double resolution) {
    MapIndex index(resolution);
    for (const auto& [id, patch] : map.patches) {
        index.insert(encode_cell(patch.moments.mu, resolution), id, patch.mse);
    }
    return index;
}

/// Probes every cell intersecting the ball around p; constant probe count for
/// a fixed radius/resolution ratio, regardless of map size.
inline std::vector<Patch> neighbors(const MapIndex& index, const QuadricMap& map,
                                    const Vec3& p, double radius) {
    const double res = index.resolution();
    std::vector<Patch> found;
    const std::int64_t lo[3] = {cell_index(p.x() - radius, res), cell_index(p.y() - radius, res),
                                cell_index(p.z() - radius, res)};
    const std::int64_t hi[3] = {cell_index(p.x() + radius, res), cell_index(p.y() + radius, res),
                                cell_index(p.z() + radius, res)};
    for (std::int64_t ix = lo[0]; ix <= hi[0]; ++ix) {
        for (std::int64_t iy = lo[1]; iy <= hi[1]; ++iy) {
            for (std::int64_t iz = lo[2]; iz <= hi[2]; ++iz) {
                // Closest point of the cell box to p must be within the ball.
                double d2 = 0.0;
                const std::int64_t idx[3] = {ix, iy, iz};
                for (int a = 0; a < 3; ++a) {
                    const double lo_a = static_cast<double>(idx[a]) * res;
                    const double hi_a = lo_a + res;
                    const double c = p[a];
                    if (c < lo_a) d2 += (lo_a - c) * (lo_a - c);
                    else if (c > hi_a) d2 += (c - hi_a) * (c - hi_a);
                }
                if (d2 > radius * radius) continue;
                const auto id = index.lookup(encode_indices(ix, iy, iz));
                if (!id) continue;
                auto it = map.patches.find(*id);
                if (it != map.patches.end()) found.push_back(it->second);
            }
        }
    }
    return found;
}

}  // namespace qslam
