#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/se3.hpp"
#include "qslam/segmentation.hpp"

namespace qslam {

/// KITTI velodyne binary: records of four 32-bit LE floats (x, y, z, intensity).
inline Scan read_kitti_bin(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open " + path);
    const auto size = static_cast<std::size_t>(f.tellg());
    if (size % 16 != 0) throw MalformedFile(path + ": size not a multiple of 16");
    f.seekg(0);
    std::vector<float> buf(size / 4);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!f) throw IoError("read failed: " + path);
    Scan scan;
    scan.points.reserve(size / 16);
    for (std::size_t i = 0; i + 3 < buf.size(); i += 4) {
        scan.points.emplace_back(buf[i], buf[i + 1], buf[i + 2]);
    }
    return scan;
}

/// Generic cloud format: one "x,y,z" line per point. '#' comments allowed.
inline Scan read_csv_cloud(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    Scan scan;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double x, y, z;
        if (!(ss >> x >> y >> z)) {
            throw MalformedFile(path + ":" + std::to_string(lineno) + ": expected x,y,z");
        }
        scan.points.emplace_back(x, y, z);
    }
    return scan;
}

inline std::vector<std::string> list_scan_files(const std::string& dir,
                                                const std::string& format) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir)) throw IoError("dataset path does not exist: " + dir);
    const std::string ext = format == "kitti" ? ".bin" : ".csv";
    std::vector<std::string> files;
    if (fs::is_regular_file(dir)) {
        files.push_back(dir);
        return files;
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ext) {
            files.push_back(e.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

inline Scan read_scan(const std::string& path, const std::string& format) {
    return format == "kitti" ? read_kitti_bin(path) : read_csv_cloud(path);
}

/// KITTI pose text: 12 floats per line, row-major 3x4 [R | t].
inline std::vector<Pose> read_kitti_poses(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::vector<Pose> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        double v[12];
        for (int i = 0; i < 12; ++i) {
            if (!(ss >> v[i])) {
                throw MalformedFile(path + ":" + std::to_string(lineno) + ": expected 12 floats");
            }
        }
        Pose p;
        p.R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
        p.t << v[3], v[7], v[11];
        poses.push_back(p);
    }
    return poses;
}

inline void write_kitti_poses(const std::vector<Pose>& poses, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f.precision(12);
    for (const auto& p : poses) {
        f << p.R(0, 0) << ' ' << p.R(0, 1) << ' ' << p.R(0, 2) << ' ' << p.t[0] << ' '
          << p.R(1, 0) << ' ' << p.R(1, 1) << ' ' << p.R(1, 2) << ' ' << p.t[1] << ' '
          << p.R(2, 0) << ' ' << p.R(2, 1) << ' ' << p.R(2, 2) << ' ' << p.t[2] << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace qslam
