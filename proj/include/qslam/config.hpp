#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "qslam/errors.hpp"
#include "qslam/localization.hpp"
#include "qslam/map.hpp"
#include "qslam/patch.hpp"
#include "qslam/registration.hpp"
#include "qslam/segmentation.hpp"

namespace qslam {

/// Everything a pipeline run needs; parsed from a key=value file plus CLI
/// overrides. Unknown keys are rejected.
struct RunConfig {
    std::string dataset;
    std::string format = "kitti";  // kitti | csv
    std::string gt;
    std::string output = ".";
    std::string map_file;
    std::string traj_file;
    std::uint64_t seed = 0;
    int max_frames = -1;

    SegConfig seg;
    FitConfig fit;
    RegConfig reg;
    MapConfig map;
    LocConfig loc;

    int odom_reassoc_iters = 2;
    double noise_xy = 0.2;
    double noise_yaw_deg = 5.0;
    bool delete_unindexed = false;

    void set(const std::string& key, const std::string& value);
    void validate() const;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

inline long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long i = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    using detail::to_bool;
    using detail::to_double;
    using detail::to_int;
    if (key == "dataset") dataset = value;
    else if (key == "format") format = value;
    else if (key == "gt" || key == "gt_file") gt = value;
    else if (key == "output") output = value;
    else if (key == "map" || key == "map_file") map_file = value;
    else if (key == "traj" || key == "traj_file") traj_file = value;
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "max_frames") max_frames = static_cast<int>(to_int(key, value));
    else if (key == "rows") seg.rows = static_cast<int>(to_int(key, value));
    else if (key == "cols") seg.cols = static_cast<int>(to_int(key, value));
    else if (key == "vertical_fov_deg") {
        const auto colon = value.find(':');
        if (colon == std::string::npos) throw ConfigError("vertical_fov_deg expects min:max");
        seg.vfov_min_deg = to_double(key, value.substr(0, colon));
        seg.vfov_max_deg = to_double(key, value.substr(colon + 1));
    }
    else if (key == "seg_angle_thresh_deg") seg.seg_angle_thresh_deg = to_double(key, value);
    else if (key == "ground_angle_thresh_deg") seg.ground_angle_thresh_deg = to_double(key, value);
    else if (key == "ground_parts") seg.ground_parts = static_cast<int>(to_int(key, value));
    else if (key == "min_segment_points") seg.min_segment_points = static_cast<int>(to_int(key, value));
    else if (key == "max_patch_points") seg.max_patch_points = static_cast<int>(to_int(key, value));
    else if (key == "mse_threshold") fit.mse_threshold = to_double(key, value);
    else if (key == "plane_eig_ratio") fit.plane_eig_ratio = to_double(key, value);
    else if (key == "cov_floor") {
        fit.cov_floor = to_double(key, value);
        reg.cov_floor = fit.cov_floor;
    }
    else if (key == "min_fit_points") fit.min_fit_points = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "alpha") reg.alpha = to_double(key, value);
    else if (key == "beta") reg.beta = to_double(key, value);
    else if (key == "gamma") reg.gamma = to_double(key, value);
    else if (key == "assoc_gate") reg.assoc_gate = to_double(key, value);
    else if (key == "assoc_mu_radius") reg.assoc_mu_radius = to_double(key, value);
    else if (key == "budget_points") reg.budget_points = static_cast<std::size_t>(to_int(key, value));
    else if (key == "max_iters") reg.max_iters = static_cast<int>(to_int(key, value));
    else if (key == "lm_lambda0") reg.lm_lambda0 = to_double(key, value);
    else if (key == "reciprocal_check") reg.reciprocal_check = to_bool(key, value);
    else if (key == "submap_min_points") map.submap_min_points = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "prune_radius") map.prune_radius = to_double(key, value);
    else if (key == "geohash_resolution") loc.resolution = to_double(key, value);
    else if (key == "search_radius") loc.search_radius = to_double(key, value);
    else if (key == "loc_assoc_gate") loc.assoc_gate = to_double(key, value);
    else if (key == "loc_assoc_mu_radius") loc.assoc_mu_radius = to_double(key, value);
    else if (key == "loc_weighted_association") loc.weighted_association = to_bool(key, value);
    else if (key == "yaw_hypothesis_deg") loc.yaw_hypothesis_deg = to_double(key, value);
    else if (key == "trust_radius") loc.trust_radius = to_double(key, value);
    else if (key == "reassoc_iters") loc.reassoc_iters = static_cast<int>(to_int(key, value));
    else if (key == "min_matched") loc.min_matched = static_cast<std::size_t>(to_int(key, value));
    else if (key == "odom_reassoc_iters") odom_reassoc_iters = static_cast<int>(to_int(key, value));
    else if (key == "noise_xy") noise_xy = to_double(key, value);
    else if (key == "noise_yaw_deg") noise_yaw_deg = to_double(key, value);
    else if (key == "delete_unindexed") delete_unindexed = to_bool(key, value);
    else throw ConfigError("unknown key '" + key + "'");
}

inline void RunConfig::validate() const {
    if (seg.rows < 1 || seg.cols < 1) throw ConfigError("rows/cols must be >= 1");
    if (seg.vfov_max_deg <= seg.vfov_min_deg) throw ConfigError("empty vertical fov");
    if (seg.ground_parts < 1 || seg.ground_parts > 16)
        throw ConfigError("ground_parts must be in [1, 16]");
    if (fit.mse_threshold <= 0) throw ConfigError("mse_threshold must be positive");
    if (format != "kitti" && format != "csv") throw ConfigError("format must be kitti or csv");
    if (reg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

}  // namespace qslam
