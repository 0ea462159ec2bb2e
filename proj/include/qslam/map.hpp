#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "qslam/moments.hpp"
#include "qslam/patch.hpp"
#include "qslam/se3.hpp"

namespace qslam {

/// A patch bundled with the raw points it was fitted from. Scan-side only;
/// map patches keep moments, never points.
struct ScanPatch {
    Patch patch;
    std::vector<Vec3> points;
};

/// Mean squared algebraic residual from moments alone (no raw points).
inline double incremental_mse(const Patch& patch) {
    const MomentSet& m = patch.moments;
    if (m.k == 0) return 0.0;
    const double kd = static_cast<double>(m.k);
    const Vec6 ce = patch.coeffs.c_eta();
    const Vec3 cp = patch.coeffs.c_p();
    const double c9 = patch.coeffs.c9();
    const double s_term = cp.dot((m.S + kd * m.mu * m.mu.transpose()) * cp);
    const double p_term = ce.dot((m.P + kd * m.eta_bar * m.mu.transpose()) * cp);
    const double q_term = ce.dot((m.Q + kd * m.eta_bar * m.eta_bar.transpose()) * ce);
    return (s_term + 2.0 * p_term + q_term) / kd +
           2.0 * c9 * cp.dot(m.mu) + 2.0 * c9 * ce.dot(m.eta_bar) + c9 * c9;
}

inline void refit_patch(Patch& patch, const FitConfig& cfg) {
    if (patch.moments.k < cfg.min_fit_points) return;
    const FitResult fit = fit_quadric(patch.moments, cfg.min_fit_points);
    Patch reclassified = classify_patch(patch.moments, fit, cfg);
    patch.cls = reclassified.cls;
    patch.coeffs = reclassified.coeffs;
    patch.mse = reclassified.mse;
}

/// Absorb new points (already in the patch frame) and re-solve/reclassify.
inline Patch grow_patch(const Patch& patch, std::span<const Vec3> new_points,
                        const FitConfig& cfg = {}) {
    if (new_points.empty()) return patch;
    Patch grown = patch;
    for (const auto& p : new_points) grown.moments.add_point(p);
    refit_patch(grown, cfg);
    return grown;
}

inline Patch merge_patches(const Patch& a, const Patch& b, const FitConfig& cfg = {}) {
    Patch merged = a;
    merged.moments.merge(b.moments);
    merged.is_ground = a.is_ground || b.is_ground;
    refit_patch(merged, cfg);
    return merged;
}

/// Re-express a patch in another frame: moments via the exact monomial
/// transform, coefficients via the adjoint map, renormalized afterwards.
inline Patch transform_patch(const Patch& patch, const Pose& T) {
    Patch out = patch;
    out.moments = patch.moments.transformed(T);
    if (!patch.coeffs.is_zero()) {
        const Mat10 Linv = monomial_transform(se3_inverse(T));
        Vec10 c = Linv.transpose() * patch.coeffs.c;
        const double norm = c.head<9>().norm();
        if (norm > 0) {
            c /= norm;
            out.mse = patch.mse / (norm * norm);
        }
        out.coeffs = QuadricCoeffs{c};
    }
    return out;
}

/// Keyed patch collection: a submap or global map.
struct QuadricMap {
    std::map<std::uint64_t, Patch> patches;
    Pose origin = Pose::identity();
    std::uint64_t total_points = 0;
    std::uint64_t next_id = 0;

    std::uint64_t insert(Patch patch) {
        patch.id = next_id++;
        total_points += patch.moments.k;
        patches.emplace(patch.id, std::move(patch));
        return next_id - 1;
    }
};

struct MapConfig {
    std::uint64_t submap_min_points = 50;
    double prune_radius = 100.0;
};

/// Correspondence list: (index into scan patches, map patch id).
using ScanMapAssoc = std::vector<std::pair<std::size_t, std::uint64_t>>;

inline void integrate_scan(QuadricMap& map, const std::vector<ScanPatch>& scan,
                           const Pose& pose, const ScanMapAssoc& assoc,
                           const FitConfig& fit_cfg = {}, const MapConfig& map_cfg = {}) {
    std::vector<bool> matched(scan.size(), false);
    for (const auto& [src, target_id] : assoc) {
        auto it = map.patches.find(target_id);
        if (it == map.patches.end()) continue;
        matched[src] = true;
        std::vector<Vec3> transformed;
        transformed.reserve(scan[src].points.size());
        for (const auto& p : scan[src].points) transformed.push_back(pose * p);
        it->second = grow_patch(it->second, transformed, fit_cfg);
        map.total_points += transformed.size();
    }
    for (std::size_t i = 0; i < scan.size(); ++i) {
        if (matched[i] || scan[i].patch.moments.k < map_cfg.submap_min_points) continue;
        map.insert(transform_patch(scan[i].patch, pose));
    }
}

inline void prune(QuadricMap& map, const Vec3& vehicle_position, double radius) {
    for (auto it = map.patches.begin(); it != map.patches.end();) {
        if ((it->second.moments.mu - vehicle_position).norm() > radius) {
            it = map.patches.erase(it);
        } else {
            ++it;
        }
    }
}

}  // namespace qslam
