#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "qslam/qslam.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitConvergence = 4;

qslam::Trajectory poses_to_trajectory(const std::vector<qslam::Pose>& poses) {
    return qslam::to_trajectory(poses);
}

std::vector<qslam::Pose> trajectory_to_poses(const qslam::Trajectory& traj) {
    std::vector<qslam::Pose> poses;
    poses.reserve(traj.size());
    for (const auto& e : traj) poses.push_back(e.pose);
    return poses;
}

std::size_t frame_limit(std::size_t available, int max_frames) {
    if (max_frames < 0) return available;
    return std::min<std::size_t>(available, static_cast<std::size_t>(max_frames));
}

void evaluate_and_plot(const qslam::Trajectory& traj, const qslam::RunConfig& cfg) {
    if (cfg.gt.empty()) return;
    auto gt = poses_to_trajectory(qslam::read_kitti_poses(cfg.gt));
    if (gt.size() > traj.size()) gt.resize(traj.size());
    const qslam::Metrics metrics = qslam::evaluate(traj, gt);
    qslam::emit_plots(traj, gt, metrics, cfg.output);
    std::cout << "ATE: " << metrics.ate_percent << " %, ARE: " << metrics.are_deg_per_100m
              << " deg/100m\n";
}

int check_convergence(const std::vector<qslam::FrameReport>& frames) {
    if (frames.size() < 2) return kExitOk;
    std::size_t bad = 0;
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].fallback || !frames[i].converged) ++bad;
    }
    const double rate = static_cast<double>(bad) / static_cast<double>(frames.size() - 1);
    if (rate > 0.5) {
        std::cerr << "error: convergence failure rate " << rate * 100.0 << " %\n";
        return kExitConvergence;
    }
    return kExitOk;
}

int cmd_odometry(const qslam::RunConfig& cfg) {
    const auto files = qslam::list_scan_files(cfg.dataset, cfg.format);
    if (files.empty()) throw qslam::IoError("no scans in " + cfg.dataset);
    const std::size_t n = frame_limit(files.size(), cfg.max_frames);
    const auto result = qslam::run_odometry(
        n, [&](std::size_t i) { return qslam::read_scan(files[i], cfg.format); }, cfg);
    qslam::write_kitti_poses(trajectory_to_poses(result.trajectory),
                             cfg.output + "/trajectory.txt");
    qslam::write_timing_csv(result.frames, cfg.output + "/timing.csv");
    std::cout << "frames: " << result.trajectory.size()
              << ", fallbacks: " << result.fallback_count << '\n';
    evaluate_and_plot(result.trajectory, cfg);
    return check_convergence(result.frames);
}

int cmd_mapping(const qslam::RunConfig& cfg, bool report_compression) {
    const auto files = qslam::list_scan_files(cfg.dataset, cfg.format);
    if (files.empty()) throw qslam::IoError("no scans in " + cfg.dataset);
    const std::size_t n = frame_limit(files.size(), cfg.max_frames);
    const auto result = qslam::run_mapping(
        n, [&](std::size_t i) { return qslam::read_scan(files[i], cfg.format); }, cfg);
    qslam::write_kitti_poses(trajectory_to_poses(result.trajectory),
                             cfg.output + "/trajectory.txt");
    qslam::write_timing_csv(result.frames, cfg.output + "/timing.csv");
    const std::string map_path = cfg.output + "/map.qmap";
    qslam::save_map(result.map, map_path);
    std::cout << "frames: " << result.trajectory.size() << ", map patches: "
              << result.map.patches.size() << ", fallbacks: " << result.fallback_count << '\n';
    if (report_compression) {
        std::uintmax_t raw = 0;
        for (std::size_t i = 0; i < n; ++i) raw += std::filesystem::file_size(files[i]);
        const auto packed = std::filesystem::file_size(map_path);
        std::ofstream csv(cfg.output + "/compression.csv");
        csv << "metric,value\nraw_bytes," << raw << "\nmap_bytes," << packed << "\nratio,"
            << (packed ? static_cast<double>(raw) / static_cast<double>(packed) : 0.0) << '\n';
        std::cout << "compression: " << raw << " -> " << packed << " bytes\n";
    }
    evaluate_and_plot(result.trajectory, cfg);
    return check_convergence(result.frames);
}

int cmd_localize(const qslam::RunConfig& cfg) {
    if (cfg.map_file.empty()) throw qslam::ConfigError("localize requires map_file");
    if (cfg.gt.empty()) throw qslam::ConfigError("localize requires gt poses");
    const auto files = qslam::list_scan_files(cfg.dataset, cfg.format);
    if (files.empty()) throw qslam::IoError("no scans in " + cfg.dataset);
    const qslam::QuadricMap map = qslam::load_map(cfg.map_file);
    const qslam::MapIndex index = qslam::build_index(map, cfg.loc.resolution);
    const auto gt = qslam::read_kitti_poses(cfg.gt);
    const std::size_t n = std::min(frame_limit(files.size(), cfg.max_frames), gt.size());
    const auto result = qslam::run_localize(
        n, [&](std::size_t i) { return qslam::read_scan(files[i], cfg.format); }, gt, map,
        index, cfg);
    qslam::write_kitti_poses(trajectory_to_poses(result.trajectory),
                             cfg.output + "/trajectory.txt");
    std::ofstream csv(cfg.output + "/localization.csv");
    csv << "metric,value\nrmse_t_m," << result.rmse_t << "\nrmse_r_deg," << result.rmse_r_deg
        << "\nfailures," << result.failures << "\nframes," << n << '\n';
    std::cout << "RMSE: " << result.rmse_t << " m, " << result.rmse_r_deg << " deg, failures: "
              << result.failures << "/" << n << '\n';
    if (n > 0 && static_cast<double>(result.failures) > 0.5 * static_cast<double>(n)) {
        std::cerr << "error: localization failure rate above 50 %\n";
        return kExitConvergence;
    }
    return kExitOk;
}

int cmd_eval(const qslam::RunConfig& cfg) {
    if (cfg.traj_file.empty() || cfg.gt.empty())
        throw qslam::ConfigError("eval requires traj_file and gt");
    const auto traj = poses_to_trajectory(qslam::read_kitti_poses(cfg.traj_file));
    const auto gt = poses_to_trajectory(qslam::read_kitti_poses(cfg.gt));
    const qslam::Metrics metrics = qslam::evaluate(traj, gt);
    qslam::write_metrics_csv(metrics, cfg.output + "/metrics.csv");
    std::cout << "ATE: " << metrics.ate_percent << " %, ARE: " << metrics.are_deg_per_100m
              << " deg/100m\n";
    return kExitOk;
}

int cmd_plot(const qslam::RunConfig& cfg) {
    if (cfg.traj_file.empty()) throw qslam::ConfigError("plot requires traj_file");
    const auto traj = poses_to_trajectory(qslam::read_kitti_poses(cfg.traj_file));
    qslam::Trajectory gt;
    qslam::Metrics metrics;
    if (!cfg.gt.empty()) {
        gt = poses_to_trajectory(qslam::read_kitti_poses(cfg.gt));
        metrics = qslam::evaluate(traj, gt);
    }
    qslam::emit_plots(traj, gt, metrics, cfg.output);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quadric-patch LiDAR odometry, mapping and localization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::int64_t seed_override = -1;
    std::vector<std::string> overrides;
    const std::vector<std::string> names = {"odometry", "mapping", "localize",
                                            "compress", "eval", "plot"};
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key=value config file")->required();
        sub->add_option("--seed", seed_override, "RNG seed override");
        sub->add_option("--output", output_override, "output directory override");
        sub->add_option("--set", overrides, "extra key=value overrides");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string task = app.get_subcommands().front()->get_name();

    try {
        qslam::RunConfig cfg = qslam::parse_config_file(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw qslam::ConfigError("--set expects key=value");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
        if (!output_override.empty()) cfg.output = output_override;
        cfg.validate();
        std::filesystem::create_directories(cfg.output);

        if (task == "odometry") return cmd_odometry(cfg);
        if (task == "mapping") return cmd_mapping(cfg, false);
        if (task == "compress") return cmd_mapping(cfg, true);
        if (task == "localize") return cmd_localize(cfg);
        if (task == "eval") return cmd_eval(cfg);
        return cmd_plot(cfg);
    } catch (const qslam::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const qslam::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
