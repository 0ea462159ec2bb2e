#pragma once

#include <limits>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/geohash.hpp"
#include "qslam/map.hpp"
#include "qslam/registration.hpp"
#include "qslam/segmentation.hpp"

namespace qslam {

struct LocConfig {
    double resolution = 1.5;     // GeoHash cell edge, meters
    double search_radius = 60.0;
    int reassoc_iters = 3;
    std::size_t min_matched = 3;
    double assoc_gate = 5.0;     // wider than odometry: noisy initial pose
    // Tighter center prescreen than odometry: under the noise protocol the
    // true center gap stays within a few meters, while parallel faces of
    // neighboring blocks sit 6+ m away and cause translation snapping.
    double assoc_mu_radius = 5.0;
    // The odometry weighting amplifies slightly-misaligned targets by up to
    // alpha/beta and starves the solver of pairs at protocol-level yaw noise;
    // with the tight center prescreen doing outlier rejection, raw distances
    // gate far more reliably here.
    bool weighted_association = false;
    // Degenerate quadric patches (box corners fit exactly as plane pairs) put
    // cost barriers a few degrees from the optimum, so a single descent from a
    // noisy heading can lock onto the wrong side. Three yaw starts at
    // {-h, 0, +h} cut the worst-case initial heading error to h/2 relative to
    // a +/-1.5h prior; 0 disables the extra starts.
    double yaw_hypothesis_deg = 3.3;
    // A solution farther than this from the initial guess contradicts the
    // prior that supplied the guess; such hypotheses are rejected outright.
    double trust_radius = 0.5;
};

/// Builds ground/non-ground residual problems from an association.
inline void build_problems(const std::vector<ScanPatch>& source,
                           const std::vector<Patch>& targets, const Association& assoc,
                           double cov_floor, ResidualProblem& ground,
                           ResidualProblem& other) {
    for (const auto& [si, ti, dist] : assoc.pairs) {
        (source[si].patch.is_ground ? ground : other)
            .add_pair(targets[ti], source[si].points, cov_floor);
    }
}

/// Scan-to-global-map registration from a noisy initial pose.
inline Pose localize(const Scan& scan, const QuadricMap& map, const MapIndex& index,
                     const Pose& T0, const SegConfig& seg_cfg = {},
                     const FitConfig& fit_cfg = {}, const RegConfig& reg_cfg = {},
                     const LocConfig& loc_cfg = {}) {
    const std::vector<ScanPatch> patches = extract_patches(scan, seg_cfg, fit_cfg);
    if (patches.empty()) throw LocalizationFailed("no patches in scan");
    const std::vector<Patch> targets =
        neighbors(index, map, T0.t, loc_cfg.search_radius);
    if (targets.empty()) throw LocalizationFailed("no neighbor patches");

    RegConfig cfg = reg_cfg;
    cfg.assoc_gate = loc_cfg.assoc_gate;
    cfg.assoc_mu_radius = loc_cfg.assoc_mu_radius;
    cfg.weighted_association = loc_cfg.weighted_association;

    std::vector<double> yaw_offsets{0.0};
    if (loc_cfg.yaw_hypothesis_deg > 0.0) {
        const double h = loc_cfg.yaw_hypothesis_deg * M_PI / 180.0;
        yaw_offsets = {-h, 0.0, h};
    }
    bool found = false;
    Pose best = T0;
    double best_score = std::numeric_limits<double>::max();
    for (double offset : yaw_offsets) {
        Pose T = T0;
        T.R = so3_exp(Vec3(0.0, 0.0, offset)) * T.R;
        bool ok = true;
        for (int iter = 0; iter < loc_cfg.reassoc_iters && ok; ++iter) {
            try {
                const Association assoc = associate(patches, targets, T, cfg);
                if (assoc.pairs.size() < loc_cfg.min_matched) {
                    ok = false;
                    break;
                }
                ResidualProblem ground, other;
                build_problems(patches, targets, assoc, cfg.cov_floor, ground, other);
                T = two_step_solve_lenient(ground, other, T, cfg).pose;
            } catch (const Error&) {
                ok = false;
            }
        }
        if (!ok) continue;
        if (loc_cfg.trust_radius > 0.0 && (T.t - T0.t).norm() > loc_cfg.trust_radius) continue;
        try {
            const Association assoc = associate(patches, targets, T, cfg);
            if (assoc.pairs.size() < loc_cfg.min_matched) continue;
            double total = 0.0;
            for (const auto& [si, ti, dist] : assoc.pairs) total += dist;
            const double score = total / static_cast<double>(assoc.pairs.size());
            if (score < best_score) {
                best_score = score;
                best = T;
                found = true;
            }
        } catch (const Error&) {
            continue;
        }
    }
    if (!found) throw LocalizationFailed("no hypothesis converged");
    return best;
}

}  // namespace qslam
