#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/se3.hpp"

namespace qslam {

struct TrajectoryEntry {
    int frame = 0;
    double timestamp = 0.0;
    Pose pose;
};
using Trajectory = std::vector<TrajectoryEntry>;

inline Trajectory to_trajectory(const std::vector<Pose>& poses, double dt = 0.1) {
    Trajectory t;
    t.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        t.push_back({static_cast<int>(i), static_cast<double>(i) * dt, poses[i]});
    }
    return t;
}

inline constexpr std::array<double, 8> kKittiLengths = {100, 200, 300, 400,
                                                        500, 600, 700, 800};

struct Metrics {
    double ate_percent = 0.0;         // average translation error, %
    double are_deg_per_100m = 0.0;    // average rotation error, deg / 100 m
    std::array<double, 8> ate_by_length{};
    std::array<double, 8> are_by_length{};
    std::array<int, 8> segments_by_length{};
    // Per-axis mean absolute errors (UrbanLoco-style).
    Vec3 mte = Vec3::Zero();          // meters, (x, y, z)
    Vec3 mre = Vec3::Zero();          // degrees, (yaw, pitch, roll)
};

inline double rotation_angle(const Mat3& R) {
    return std::acos(std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0));
}

inline Vec3 yaw_pitch_roll(const Mat3& R) {
    const double yaw = std::atan2(R(1, 0), R(0, 0));
    const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
    const double roll = std::atan2(R(2, 1), R(2, 2));
    return {yaw, pitch, roll};
}

/// KITTI-style segment errors over fixed path lengths plus per-axis means.
inline Metrics evaluate(const Trajectory& traj, const Trajectory& gt) {
    if (traj.size() != gt.size()) {
        throw MisalignedTrajectories("trajectory length " + std::to_string(traj.size()) +
                                     " vs ground truth " + std::to_string(gt.size()));
    }
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj[i].frame != gt[i].frame) {
            throw MisalignedTrajectories("frame indices differ at position " + std::to_string(i));
        }
    }
    Metrics m;
    const std::size_t n = traj.size();
    if (n == 0) return m;

    std::vector<double> dist(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        dist[i] = dist[i - 1] + (gt[i].pose.t - gt[i - 1].pose.t).norm();
    }
    constexpr int kStep = 10;
    std::array<double, 8> terr_sum{}, rerr_sum{};
    std::array<int, 8> count{};
    for (std::size_t first = 0; first < n; first += kStep) {
        for (std::size_t li = 0; li < kKittiLengths.size(); ++li) {
            const double len = kKittiLengths[li];
            std::size_t last = first;
            while (last < n && dist[last] - dist[first] < len) ++last;
            if (last >= n) break;
            const Pose gt_rel = se3_compose(se3_inverse(gt[first].pose), gt[last].pose);
            const Pose est_rel = se3_compose(se3_inverse(traj[first].pose), traj[last].pose);
            const Pose err = se3_compose(se3_inverse(est_rel), gt_rel);
            terr_sum[li] += err.t.norm() / len;
            rerr_sum[li] += rotation_angle(err.R) * 180.0 / M_PI / len;
            ++count[li];
        }
    }
    double terr_total = 0, rerr_total = 0;
    int total = 0;
    for (std::size_t li = 0; li < kKittiLengths.size(); ++li) {
        m.segments_by_length[li] = count[li];
        if (count[li] > 0) {
            m.ate_by_length[li] = 100.0 * terr_sum[li] / count[li];
            m.are_by_length[li] = 100.0 * rerr_sum[li] / count[li];
        }
        terr_total += terr_sum[li];
        rerr_total += rerr_sum[li];
        total += count[li];
    }
    if (total > 0) {
        m.ate_percent = 100.0 * terr_total / total;
        m.are_deg_per_100m = 100.0 * rerr_total / total;
    }

    for (std::size_t i = 0; i < n; ++i) {
        m.mte += (traj[i].pose.t - gt[i].pose.t).cwiseAbs();
        const Vec3 e_est = yaw_pitch_roll(traj[i].pose.R);
        const Vec3 e_gt = yaw_pitch_roll(gt[i].pose.R);
        for (int a = 0; a < 3; ++a) {
            double d = std::abs(e_est[a] - e_gt[a]);
            if (d > M_PI) d = 2.0 * M_PI - d;
            m.mre[a] += d * 180.0 / M_PI;
        }
    }
    m.mte /= static_cast<double>(n);
    m.mre /= static_cast<double>(n);
    return m;
}

inline void write_metrics_csv(const Metrics& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << "metric,value\n";
    f << "ate_percent," << m.ate_percent << '\n';
    f << "are_deg_per_100m," << m.are_deg_per_100m << '\n';
    f << "mte_x_m," << m.mte[0] << "\nmte_y_m," << m.mte[1] << "\nmte_z_m," << m.mte[2] << '\n';
    f << "mre_yaw_deg," << m.mre[0] << "\nmre_pitch_deg," << m.mre[1]
      << "\nmre_roll_deg," << m.mre[2] << '\n';
    for (std::size_t li = 0; li < kKittiLengths.size(); ++li) {
        f << "ate_" << kKittiLengths[li] << "m," << m.ate_by_length[li] << '\n';
        f << "are_" << kKittiLengths[li] << "m," << m.are_by_length[li] << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace qslam
