#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/evaluate.hpp"

namespace qslam {

namespace detail {

struct SvgCanvas {
    double xmin, xmax, ymin, ymax;
    int width = 800, height = 600, margin = 50;
    std::ostringstream body;

    double sx(double x) const {
        return margin + (x - xmin) / std::max(xmax - xmin, 1e-9) * (width - 2 * margin);
    }
    double sy(double y) const {
        return height - margin - (y - ymin) / std::max(ymax - ymin, 1e-9) * (height - 2 * margin);
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
        body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) body << sx(x) << ',' << sy(y) << ' ';
        body << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& color = "black") {
        body << "<text x=\"" << x << "\" y=\"" << y << "\" fill=\"" << color
             << "\" font-size=\"13\" font-family=\"sans-serif\">" << s << "</text>\n";
    }
    void save(const std::string& path) {
        std::ofstream f(path);
        if (!f) throw IoError("cannot open " + path);
        f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
          << height << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
          << body.str() << "</svg>\n";
        if (!f) throw IoError("write failed: " + path);
    }
};

}  // namespace detail

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f.precision(12);
    f << "frame,timestamp,x,y,z\n";
    for (const auto& e : traj) {
        f << e.frame << ',' << e.timestamp << ',' << e.pose.t.x() << ',' << e.pose.t.y() << ','
          << e.pose.t.z() << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

/// Trajectory overlay and error-vs-length curves as standalone SVGs + CSVs.
/// Returns false (with a warning) when there is nothing to plot.
inline bool emit_plots(const Trajectory& traj, const Trajectory& gt, const Metrics& metrics,
                       const std::string& out_dir) {
    if (traj.empty()) {
        std::cerr << "warning: empty trajectory, skipping plots\n";
        return false;
    }
    write_trajectory_csv(traj, out_dir + "/trajectory_est.csv");
    if (!gt.empty()) write_trajectory_csv(gt, out_dir + "/trajectory_gt.csv");
    write_metrics_csv(metrics, out_dir + "/metrics.csv");

    detail::SvgCanvas svg{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
                          std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    std::vector<std::pair<double, double>> est_xy, gt_xy;
    for (const auto& e : traj) est_xy.emplace_back(e.pose.t.x(), e.pose.t.y());
    for (const auto& e : gt) gt_xy.emplace_back(e.pose.t.x(), e.pose.t.y());
    for (const auto* pts : {&est_xy, &gt_xy}) {
        for (const auto& [x, y] : *pts) {
            svg.xmin = std::min(svg.xmin, x);
            svg.xmax = std::max(svg.xmax, x);
            svg.ymin = std::min(svg.ymin, y);
            svg.ymax = std::max(svg.ymax, y);
        }
    }
    if (!gt_xy.empty()) svg.polyline(gt_xy, "#2060c0");
    svg.polyline(est_xy, "#d04020");
    svg.text(60, 25, "estimate", "#d04020");
    if (!gt_xy.empty()) svg.text(150, 25, "ground truth", "#2060c0");
    svg.save(out_dir + "/trajectory.svg");

    detail::SvgCanvas err{kKittiLengths.front(), kKittiLengths.back(), 0.0, 0.0};
    std::vector<std::pair<double, double>> ate_pts, are_pts;
    for (std::size_t i = 0; i < kKittiLengths.size(); ++i) {
        if (metrics.segments_by_length[i] == 0) continue;
        ate_pts.emplace_back(kKittiLengths[i], metrics.ate_by_length[i]);
        are_pts.emplace_back(kKittiLengths[i], metrics.are_by_length[i]);
        err.ymax = std::max({err.ymax, metrics.ate_by_length[i], metrics.are_by_length[i]});
    }
    if (!ate_pts.empty()) {
        err.ymax = std::max(err.ymax, 1e-6);
        err.polyline(ate_pts, "#d04020");
        err.polyline(are_pts, "#2060c0");
        err.text(60, 25, "ATE % vs length", "#d04020");
        err.text(200, 25, "ARE deg/100m vs length", "#2060c0");
        err.save(out_dir + "/error_vs_length.svg");
    }
    return true;
}

}  // namespace qslam
