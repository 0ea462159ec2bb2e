#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/map.hpp"
#include "qslam/patch.hpp"

namespace qslam {

/// One LiDAR frame.
struct Scan {
    std::vector<Vec3> points;
};

struct SegConfig {
    int rows = 64;
    int cols = 1800;
    double vfov_min_deg = -24.8;
    double vfov_max_deg = 2.0;
    double seg_angle_thresh_deg = 10.0;
    double ground_angle_thresh_deg = 10.0;
    int ground_parts = 4;
    int min_segment_points = 30;
    int max_patch_points = 1000;
};

struct RangeImage {
    int rows = 0;
    int cols = 0;
    double vfov_min = 0.0;  // radians
    double vfov_max = 0.0;
    std::vector<double> range;   // 0 = no return
    std::vector<std::int32_t> index;  // -1 = no return

    double& at(int r, int c) { return range[r * cols + c]; }
    double at(int r, int c) const { return range[r * cols + c]; }
    std::int32_t idx(int r, int c) const { return index[r * cols + c]; }
};

struct SegmentLabels {
    enum class Kind : std::uint8_t { Unassigned, Ground, Segment };
    struct Label {
        Kind kind = Kind::Unassigned;
        int id = -1;
    };
    std::vector<Label> labels;
    int ground_parts = 0;
    int segment_count = 0;
};

inline RangeImage project_to_range_image(const Scan& scan, int rows, int cols,
                                         double vfov_min_rad, double vfov_max_rad) {
    if (scan.points.empty()) throw EmptyScan{};
    RangeImage img;
    img.rows = rows;
    img.cols = cols;
    img.vfov_min = vfov_min_rad;
    img.vfov_max = vfov_max_rad;
    img.range.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    img.index.assign(static_cast<std::size_t>(rows) * cols, -1);
    const double vspan = vfov_max_rad - vfov_min_rad;
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
        const Vec3& p = scan.points[i];
        const double r = p.norm();
        if (!(r > 0.0) || !p.allFinite()) continue;
        const double elev = std::asin(std::clamp(p.z() / r, -1.0, 1.0));
        if (elev < vfov_min_rad || elev > vfov_max_rad) continue;
        const int row = static_cast<int>(std::lround((elev - vfov_min_rad) / vspan * (rows - 1)));
        const double az = std::atan2(p.y(), p.x());
        int col = static_cast<int>(std::floor((az + M_PI) / (2.0 * M_PI) * cols));
        col = ((col % cols) + cols) % cols;
        double& cell = img.at(row, col);
        if (cell == 0.0 || r < cell) {
            cell = r;
            img.index[row * cols + col] = static_cast<std::int32_t>(i);
        }
    }
    return img;
}

/// Marks near-horizontal returns on the lower rings as ground and splits the
/// ground set into equal-width bins along the sensor x-axis.
inline SegmentLabels extract_ground(const Scan& scan, const RangeImage& img,
                                    const SegConfig& cfg) {
    SegmentLabels out;
    out.labels.resize(scan.points.size());
    out.ground_parts = cfg.ground_parts;
    const double thresh = cfg.ground_angle_thresh_deg * M_PI / 180.0;
    // The column sweep covers every beam that points below the horizon; far
    // ground sits at shallow elevations well above the lowest rings.
    int ground_rows = img.rows;
    if (img.rows > 1 && img.vfov_max > 0.0) {
        const double step = (img.vfov_max - img.vfov_min) / (img.rows - 1);
        ground_rows = std::clamp(
            static_cast<int>(std::ceil(-img.vfov_min / step)), 1, img.rows);
    }
    std::vector<std::int32_t> ground_idx;
    for (int c = 0; c < img.cols; ++c) {
        for (int r = 0; r + 1 < ground_rows; ++r) {
            const std::int32_t ia = img.idx(r, c);
            const std::int32_t ib = img.idx(r + 1, c);
            if (ia < 0 || ib < 0) continue;
            const Vec3 d = scan.points[ib] - scan.points[ia];
            const double angle = std::atan2(std::abs(d.z()), d.head<2>().norm());
            if (angle < thresh) {
                for (std::int32_t i : {ia, ib}) {
                    if (out.labels[i].kind != SegmentLabels::Kind::Ground) {
                        out.labels[i].kind = SegmentLabels::Kind::Ground;
                        ground_idx.push_back(i);
                    }
                }
            } else {
                break;
            }
        }
    }
    if (ground_idx.empty()) return out;
    double xmin = std::numeric_limits<double>::max();
    double xmax = std::numeric_limits<double>::lowest();
    for (std::int32_t i : ground_idx) {
        xmin = std::min(xmin, scan.points[i].x());
        xmax = std::max(xmax, scan.points[i].x());
    }
    const int parts = std::max(1, cfg.ground_parts);
    const double width = (xmax - xmin) / parts;
    for (std::int32_t i : ground_idx) {
        int part = width > 0 ? static_cast<int>((scan.points[i].x() - xmin) / width) : 0;
        out.labels[i].id = std::clamp(part, 0, parts - 1);
    }
    return out;
}

/// Range-image flood fill over the 4-neighborhood; two neighboring returns
/// join iff the angle beta between them exceeds the threshold.
inline void segment_patches(const Scan& scan, const RangeImage& img, SegmentLabels& labels,
                            const SegConfig& cfg) {
    const double thresh = cfg.seg_angle_thresh_deg * M_PI / 180.0;
    const double psi_row = (img.vfov_max - img.vfov_min) / std::max(1, img.rows - 1);
    const double psi_col = 2.0 * M_PI / img.cols;
    std::vector<int> cell_seg(img.range.size(), -1);
    auto usable = [&](int r, int c) {
        const std::int32_t i = img.idx(r, c);
        return i >= 0 && labels.labels[i].kind != SegmentLabels::Kind::Ground;
    };
    int next_seg = 0;
    std::vector<std::vector<std::int32_t>> members;
    for (int r0 = 0; r0 < img.rows; ++r0) {
        for (int c0 = 0; c0 < img.cols; ++c0) {
            if (!usable(r0, c0) || cell_seg[r0 * img.cols + c0] >= 0) continue;
            members.emplace_back();
            std::deque<std::pair<int, int>> queue{{r0, c0}};
            cell_seg[r0 * img.cols + c0] = next_seg;
            while (!queue.empty()) {
                auto [r, c] = queue.front();
                queue.pop_front();
                members.back().push_back(img.idx(r, c));
                const double d_here = img.at(r, c);
                const std::pair<int, int> nbrs[4] = {
                    {r - 1, c}, {r + 1, c}, {r, (c + 1) % img.cols}, {r, (c - 1 + img.cols) % img.cols}};
                for (int n = 0; n < 4; ++n) {
                    const auto [rn, cn] = nbrs[n];
                    if (rn < 0 || rn >= img.rows) continue;
                    if (!usable(rn, cn) || cell_seg[rn * img.cols + cn] >= 0) continue;
                    const double psi = (n < 2) ? psi_row : psi_col;
                    const double d1 = std::max(d_here, img.at(rn, cn));
                    const double d2 = std::min(d_here, img.at(rn, cn));
                    const double beta = std::atan2(d2 * std::sin(psi), d1 - d2 * std::cos(psi));
                    if (beta > thresh) {
                        cell_seg[rn * img.cols + cn] = next_seg;
                        queue.emplace_back(rn, cn);
                    }
                }
            }
            ++next_seg;
        }
    }
    // Densify ids, dropping undersized segments.
    int dense = 0;
    for (auto& seg : members) {
        if (static_cast<int>(seg.size()) < cfg.min_segment_points) continue;
        for (std::int32_t i : seg) {
            labels.labels[i].kind = SegmentLabels::Kind::Segment;
            labels.labels[i].id = dense;
        }
        ++dense;
    }
    labels.segment_count = dense;
}

/// Splits segments above the point cap along their principal axis.
inline void split_oversized(const Scan& scan, SegmentLabels& labels, int max_patch_points) {
    if (max_patch_points <= 0) return;
    std::vector<std::vector<std::int32_t>> segs(labels.segment_count);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (labels.labels[i].kind == SegmentLabels::Kind::Segment) {
            segs[labels.labels[i].id].push_back(static_cast<std::int32_t>(i));
        }
    }
    std::vector<std::vector<std::int32_t>> result;
    for (auto& seg : segs) {
        if (static_cast<int>(seg.size()) <= max_patch_points) {
            result.push_back(std::move(seg));
            continue;
        }
        Vec3 mean = Vec3::Zero();
        for (std::int32_t i : seg) mean += scan.points[i];
        mean /= static_cast<double>(seg.size());
        Mat3 scatter = Mat3::Zero();
        for (std::int32_t i : seg) {
            const Vec3 d = scan.points[i] - mean;
            scatter += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
        const Vec3 axis = eig.eigenvectors().col(2);
        std::sort(seg.begin(), seg.end(), [&](std::int32_t a, std::int32_t b) {
            const double pa = axis.dot(scan.points[a]), pb = axis.dot(scan.points[b]);
            return pa != pb ? pa < pb : a < b;
        });
        const std::size_t n = seg.size();
        const std::size_t pieces = (n + max_patch_points - 1) / max_patch_points;
        const std::size_t chunk = (n + pieces - 1) / pieces;
        for (std::size_t start = 0; start < n; start += chunk) {
            const std::size_t end = std::min(start + chunk, n);
            result.emplace_back(seg.begin() + start, seg.begin() + end);
        }
    }
    for (std::size_t id = 0; id < result.size(); ++id) {
        for (std::int32_t i : result[id]) labels.labels[i].id = static_cast<int>(id);
    }
    labels.segment_count = static_cast<int>(result.size());
}

/// Full per-scan front end: project, label, split, fit, classify.
inline std::vector<ScanPatch> extract_patches(const Scan& scan, const SegConfig& seg_cfg,
                                              const FitConfig& fit_cfg) {
    const RangeImage img = project_to_range_image(
        scan, seg_cfg.rows, seg_cfg.cols,
        seg_cfg.vfov_min_deg * M_PI / 180.0, seg_cfg.vfov_max_deg * M_PI / 180.0);
    SegmentLabels labels = extract_ground(scan, img, seg_cfg);
    segment_patches(scan, img, labels, seg_cfg);
    split_oversized(scan, labels, seg_cfg.max_patch_points);

    std::vector<std::vector<std::int32_t>> groups(seg_cfg.ground_parts + labels.segment_count);
    std::vector<bool> ground_group(groups.size(), false);
    for (int g = 0; g < seg_cfg.ground_parts; ++g) ground_group[g] = true;
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const auto& l = labels.labels[i];
        if (l.kind == SegmentLabels::Kind::Ground && l.id >= 0) {
            groups[l.id].push_back(static_cast<std::int32_t>(i));
        } else if (l.kind == SegmentLabels::Kind::Segment) {
            groups[seg_cfg.ground_parts + l.id].push_back(static_cast<std::int32_t>(i));
        }
    }
    std::vector<ScanPatch> patches;
    std::uint64_t id = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < std::max<std::uint64_t>(fit_cfg.min_fit_points, 3)) continue;
        ScanPatch sp;
        sp.points.reserve(groups[g].size());
        for (std::int32_t i : groups[g]) sp.points.push_back(scan.points[i]);
        sp.patch = make_patch(accumulate_moments(sp.points), fit_cfg, id++, ground_group[g]);
        patches.push_back(std::move(sp));
    }
    return patches;
}

}  // namespace qslam
