#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "qslam/config.hpp"
#include "qslam/errors.hpp"
#include "qslam/evaluate.hpp"
#include "qslam/geohash.hpp"
#include "qslam/localization.hpp"
#include "qslam/map.hpp"
#include "qslam/registration.hpp"
#include "qslam/segmentation.hpp"

namespace qslam {

/// Per-frame wall-clock split, milliseconds.
struct FrameTiming {
    double extract_ms = 0.0;
    double assoc_ms = 0.0;
    double opt_ms = 0.0;
    double map_ms = 0.0;
    double total_ms() const { return extract_ms + assoc_ms + opt_ms + map_ms; }
};

struct FrameReport {
    FrameTiming timing;
    bool converged = true;
    bool fallback = false;  // pose taken from the constant-velocity prediction
    std::size_t matched = 0;
};

struct OdometryResult {
    Trajectory trajectory;
    std::vector<FrameReport> frames;
    std::size_t fallback_count = 0;
};

struct MappingResult {
    Trajectory trajectory;
    QuadricMap map;
    std::vector<FrameReport> frames;
    std::size_t fallback_count = 0;
};

struct LocalizeResult {
    std::vector<double> t_errors;  // meters, successful frames only
    std::vector<double> r_errors;  // degrees
    Trajectory trajectory;
    std::size_t failures = 0;
    double rmse_t = 0.0;
    double rmse_r_deg = 0.0;
};

namespace detail {

class StopWatch {
public:
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - mark_).count();
        mark_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point mark_ = std::chrono::steady_clock::now();
};

inline std::vector<ScanPatch> selected_patches(const std::vector<ScanPatch>& all,
                                               std::size_t budget_points) {
    std::vector<ScanPatch> out;
    for (std::size_t i : select_patches(all, budget_points)) out.push_back(all[i]);
    return out;
}

inline std::vector<Patch> bare_patches(const std::vector<ScanPatch>& patches) {
    std::vector<Patch> out;
    out.reserve(patches.size());
    for (const auto& sp : patches) out.push_back(sp.patch);
    return out;
}

/// One reassociate/solve round trip; throws on association or solve failure.
inline SolveReport match_once(const std::vector<ScanPatch>& source,
                              const std::vector<Patch>& targets, Pose T, int reassoc_iters,
                              const RegConfig& cfg, double* assoc_ms, double* opt_ms,
                              std::size_t* matched, Association* last_assoc = nullptr) {
    SolveReport report;
    report.pose = T;
    for (int iter = 0; iter < reassoc_iters; ++iter) {
        StopWatch watch;
        const Association assoc = associate(source, targets, report.pose, cfg);
        *assoc_ms += watch.lap_ms();
        *matched = assoc.pairs.size();
        if (last_assoc) *last_assoc = assoc;
        ResidualProblem ground, other;
        build_problems(source, targets, assoc, cfg.cov_floor, ground, other);
        report = two_step_solve_lenient(ground, other, report.pose, cfg);
        *opt_ms += watch.lap_ms();
    }
    return report;
}

/// Per-frame RNG stream: one master seed split by frame index.
inline std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t frame) {
    return std::mt19937_64(mix64(seed + 0x51ed2701u) ^ mix64(frame * 0x2545f4914f6cdd1dull + 1));
}

}  // namespace detail

/// Scan-to-scan odometry over frames supplied by provider(i) for i in [0, n).
template <typename Provider>
OdometryResult run_odometry(std::size_t n_frames, Provider&& provider, const RunConfig& cfg) {
    OdometryResult result;
    Pose T_world = Pose::identity();   // world <- current sensor
    Pose motion = Pose::identity();    // previous <- current, constant-velocity prior
    std::vector<ScanPatch> targets;    // previous frame's selected patches

    for (std::size_t frame = 0; frame < n_frames; ++frame) {
        const Scan scan = provider(frame);
        FrameReport report;
        detail::StopWatch watch;
        std::vector<ScanPatch> patches;
        try {
            patches = detail::selected_patches(extract_patches(scan, cfg.seg, cfg.fit),
                                               cfg.reg.budget_points);
        } catch (const Error&) {
            patches.clear();
        }
        report.timing.extract_ms = watch.lap_ms();

        if (frame > 0) {
            Pose T = motion;
            if (patches.empty() || targets.empty()) {
                report.fallback = true;
            } else {
                try {
                    const SolveReport solve = detail::match_once(
                        patches, detail::bare_patches(targets), T, cfg.odom_reassoc_iters,
                        cfg.reg, &report.timing.assoc_ms, &report.timing.opt_ms,
                        &report.matched);
                    T = solve.pose;
                    report.converged = solve.converged;
                } catch (const Error&) {
                    T = motion;
                    report.fallback = true;
                }
            }
            if (report.fallback) ++result.fallback_count;
            motion = T;
            T_world = se3_compose(T_world, T);
        }
        if (!patches.empty()) targets = std::move(patches);
        result.trajectory.push_back({static_cast<int>(frame), 0.1 * static_cast<double>(frame),
                                     T_world});
        result.frames.push_back(report);
        if (cfg.max_frames >= 0 && static_cast<int>(frame + 1) >= cfg.max_frames) break;
    }
    return result;
}

inline OdometryResult run_odometry(const std::vector<Scan>& scans, const RunConfig& cfg) {
    return run_odometry(scans.size(), [&](std::size_t i) { return scans[i]; }, cfg);
}

/// Odometry plus incremental submap refinement: each frame is first matched
/// scan-to-scan, then re-matched against the submap before integration.
template <typename Provider>
MappingResult run_mapping(std::size_t n_frames, Provider&& provider, const RunConfig& cfg) {
    MappingResult result;
    Pose T_world = Pose::identity();
    Pose motion = Pose::identity();
    std::vector<ScanPatch> prev_targets;

    for (std::size_t frame = 0; frame < n_frames; ++frame) {
        const Scan scan = provider(frame);
        FrameReport report;
        detail::StopWatch watch;
        std::vector<ScanPatch> patches;
        try {
            patches = extract_patches(scan, cfg.seg, cfg.fit);
        } catch (const Error&) {
            patches.clear();
        }
        std::vector<ScanPatch> selected =
            detail::selected_patches(patches, cfg.reg.budget_points);
        report.timing.extract_ms = watch.lap_ms();

        ScanMapAssoc map_assoc;
        if (frame > 0) {
            Pose T = se3_compose(T_world, motion);  // world <- current, predicted
            bool scan_ok = false;
            if (!selected.empty() && !prev_targets.empty()) {
                try {
                    Pose rel = motion;
                    const SolveReport solve = detail::match_once(
                        selected, detail::bare_patches(prev_targets), rel,
                        cfg.odom_reassoc_iters, cfg.reg, &report.timing.assoc_ms,
                        &report.timing.opt_ms, &report.matched);
                    motion = solve.pose;
                    T = se3_compose(T_world, motion);
                    report.converged = solve.converged;
                    scan_ok = true;
                } catch (const Error&) {
                }
            }
            // Scan-submap refinement in the map frame.
            if (!selected.empty() && !result.map.patches.empty()) {
                std::vector<Patch> map_targets;
                std::vector<std::uint64_t> map_ids;
                for (const auto& [id, patch] : result.map.patches) {
                    map_targets.push_back(patch);
                    map_ids.push_back(id);
                }
                try {
                    Association assoc;
                    const SolveReport solve = detail::match_once(
                        selected, map_targets, T, 1, cfg.reg, &report.timing.assoc_ms,
                        &report.timing.opt_ms, &report.matched, &assoc);
                    T = solve.pose;
                    report.converged = report.converged && solve.converged;
                    motion = se3_compose(se3_inverse(T_world), T);
                    for (const auto& [si, ti, dist] : assoc.pairs) {
                        map_assoc.emplace_back(si, map_ids[ti]);
                    }
                    scan_ok = true;
                } catch (const Error&) {
                }
            }
            if (!scan_ok) {
                report.fallback = true;
                ++result.fallback_count;
            }
            T_world = T;
        }
        watch.lap_ms();
        // map_assoc indexes the selected list, so integrate that list after
        // frame 0; the first frame seeds the map with everything.
        integrate_scan(result.map, frame == 0 ? patches : selected, T_world, map_assoc,
                       cfg.fit, cfg.map);
        prune(result.map, T_world.t, cfg.map.prune_radius);
        report.timing.map_ms = watch.lap_ms();

        if (!selected.empty()) prev_targets = std::move(selected);
        result.trajectory.push_back({static_cast<int>(frame), 0.1 * static_cast<double>(frame),
                                     T_world});
        result.frames.push_back(report);
        if (cfg.max_frames >= 0 && static_cast<int>(frame + 1) >= cfg.max_frames) break;
    }
    return result;
}

inline MappingResult run_mapping(const std::vector<Scan>& scans, const RunConfig& cfg) {
    return run_mapping(scans.size(), [&](std::size_t i) { return scans[i]; }, cfg);
}

/// Global-map localization from uniformly perturbed ground-truth poses:
/// U(-noise_xy, noise_xy) meters in x and y, U(-noise_yaw, noise_yaw) degrees
/// of yaw, drawn from a per-frame split of the run seed.
template <typename Provider>
LocalizeResult run_localize(std::size_t n_frames, Provider&& provider,
                            const std::vector<Pose>& gt, const QuadricMap& map,
                            const MapIndex& index, const RunConfig& cfg) {
    if (gt.size() < n_frames) throw MisalignedTrajectories("fewer ground-truth poses than frames");
    LocalizeResult result;
    for (std::size_t frame = 0; frame < n_frames; ++frame) {
        auto rng = detail::frame_rng(cfg.seed, frame);
        std::uniform_real_distribution<double> uxy(-cfg.noise_xy, cfg.noise_xy);
        std::uniform_real_distribution<double> uyaw(-cfg.noise_yaw_deg * M_PI / 180.0,
                                                    cfg.noise_yaw_deg * M_PI / 180.0);
        const double nx = uxy(rng), ny = uxy(rng), nyaw = uyaw(rng);
        Pose T0 = gt[frame];
        T0.R = so3_exp(Vec3(0, 0, nyaw)) * T0.R;
        T0.t += Vec3(nx, ny, 0);

        try {
            const Pose T = localize(provider(frame), map, index, T0, cfg.seg, cfg.fit,
                                    cfg.reg, cfg.loc);
            const Pose err = se3_compose(se3_inverse(gt[frame]), T);
            result.t_errors.push_back(err.t.norm());
            result.r_errors.push_back(rotation_angle(err.R) * 180.0 / M_PI);
            result.trajectory.push_back({static_cast<int>(frame),
                                         0.1 * static_cast<double>(frame), T});
        } catch (const LocalizationFailed&) {
            ++result.failures;
        }
        if (cfg.max_frames >= 0 && static_cast<int>(frame + 1) >= cfg.max_frames) break;
    }
    double st = 0, sr = 0;
    for (double e : result.t_errors) st += e * e;
    for (double e : result.r_errors) sr += e * e;
    if (!result.t_errors.empty()) {
        result.rmse_t = std::sqrt(st / static_cast<double>(result.t_errors.size()));
        result.rmse_r_deg = std::sqrt(sr / static_cast<double>(result.r_errors.size()));
    }
    return result;
}

inline LocalizeResult run_localize(const std::vector<Scan>& scans, const std::vector<Pose>& gt,
                                   const QuadricMap& map, const MapIndex& index,
                                   const RunConfig& cfg) {
    return run_localize(scans.size(), [&](std::size_t i) { return scans[i]; }, gt, map, index,
                        cfg);
}

inline void write_timing_csv(const std::vector<FrameReport>& frames, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << "frame,extract_ms,assoc_ms,opt_ms,map_ms,total_ms,converged,fallback,matched\n";
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& r = frames[i];
        f << i << ',' << r.timing.extract_ms << ',' << r.timing.assoc_ms << ','
          << r.timing.opt_ms << ',' << r.timing.map_ms << ',' << r.timing.total_ms() << ','
          << (r.converged ? 1 : 0) << ',' << (r.fallback ? 1 : 0) << ',' << r.matched << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace qslam
