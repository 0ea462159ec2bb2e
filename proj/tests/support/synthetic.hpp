#pragma once

// Synthetic scene generation shared by the test binaries: analytic primitives
// with exact ray intersections, a miniature spinning-LiDAR model, and direct
// surface samplers for registration-only tests.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "qslam/patch.hpp"
#include "qslam/se3.hpp"
#include "qslam/segmentation.hpp"

namespace synth {

using qslam::Mat3;
using qslam::Pose;
using qslam::Scan;
using qslam::Vec3;

constexpr double kNoHit = std::numeric_limits<double>::max();

struct Plane {
    Vec3 point;
    Vec3 normal;  // unit
};

struct Sphere {
    Vec3 center;
    double radius;
};

struct Cylinder {
    Vec3 base;    // point on the axis
    Vec3 axis;    // unit
    double radius;
    double half_length = kNoHit;  // clamp along the axis from base
};

struct Box {  // axis-aligned
    Vec3 lo;
    Vec3 hi;
};

inline double ray_plane(const Plane& s, const Vec3& o, const Vec3& d) {
    const double denom = s.normal.dot(d);
    if (std::abs(denom) < 1e-12) return kNoHit;
    const double t = s.normal.dot(s.point - o) / denom;
    return t > 1e-6 ? t : kNoHit;
}

inline double ray_sphere(const Sphere& s, const Vec3& o, const Vec3& d) {
    const Vec3 e = o - s.center;
    const double b = e.dot(d);
    const double c = e.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0) return kNoHit;
    const double root = std::sqrt(disc);
    for (double t : {-b - root, -b + root}) {
        if (t > 1e-6) return t;
    }
    return kNoHit;
}

inline double ray_cylinder(const Cylinder& s, const Vec3& o, const Vec3& d) {
    const Vec3 e = o - s.base;
    const Vec3 dp = d - s.axis.dot(d) * s.axis;
    const Vec3 ep = e - s.axis.dot(e) * s.axis;
    const double a = dp.squaredNorm();
    if (a < 1e-14) return kNoHit;
    const double b = dp.dot(ep);
    const double c = ep.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - a * c;
    if (disc < 0) return kNoHit;
    const double root = std::sqrt(disc);
    for (double t : {(-b - root) / a, (-b + root) / a}) {
        if (t <= 1e-6) continue;
        const double along = s.axis.dot(e + t * d);
        if (std::abs(along) <= s.half_length) return t;
    }
    return kNoHit;
}

inline double ray_box(const Box& s, const Vec3& o, const Vec3& d) {
    double t0 = 1e-6, t1 = kNoHit;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (o[a] < s.lo[a] || o[a] > s.hi[a]) return kNoHit;
            continue;
        }
        double ta = (s.lo[a] - o[a]) / d[a];
        double tb = (s.hi[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 <= t1 ? t0 : kNoHit;
}

struct Scene {
    std::vector<Plane> planes;
    std::vector<Sphere> spheres;
    std::vector<Cylinder> cylinders;
    std::vector<Box> boxes;

    double raycast(const Vec3& o, const Vec3& d) const {
        double best = kNoHit;
        for (const auto& s : planes) best = std::min(best, ray_plane(s, o, d));
        for (const auto& s : spheres) best = std::min(best, ray_sphere(s, o, d));
        for (const auto& s : cylinders) best = std::min(best, ray_cylinder(s, o, d));
        for (const auto& s : boxes) best = std::min(best, ray_box(s, o, d));
        return best;
    }
};

struct SensorModel {
    int rows = 32;
    int cols = 900;
    double vfov_min_deg = -24.8;
    double vfov_max_deg = 2.0;
    double max_range = 80.0;
    double range_sigma = 0.0;
};

/// Spinning-LiDAR frame at world pose T (sensor -> world); points returned in
/// the sensor frame. Ray directions follow the range-image conventions.
inline Scan raycast_scan(const Scene& scene, const Pose& T, const SensorModel& sensor,
                         std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, sensor.range_sigma);
    Scan scan;
    const double vmin = sensor.vfov_min_deg * M_PI / 180.0;
    const double vmax = sensor.vfov_max_deg * M_PI / 180.0;
    for (int r = 0; r < sensor.rows; ++r) {
        const double elev = vmin + (vmax - vmin) * r / std::max(1, sensor.rows - 1);
        for (int c = 0; c < sensor.cols; ++c) {
            const double az = -M_PI + 2.0 * M_PI * (c + 0.5) / sensor.cols;
            const Vec3 dir_s(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                             std::sin(elev));
            const Vec3 dir_w = T.R * dir_s;
            double t = scene.raycast(T.t, dir_w);
            if (t >= sensor.max_range) continue;
            if (sensor.range_sigma > 0) t = std::max(1e-3, t + noise(rng));
            scan.points.push_back(t * dir_s);
        }
    }
    return scan;
}

/// Ground plane plus wall and pillar structure along +x; observable in all six
/// degrees of freedom.
inline Scene corridor_scene(double length = 120.0) {
    Scene s;
    s.planes.push_back({{0, 0, -1.6}, {0, 0, 1}});
    s.boxes.push_back({{-10, 4.0, -1.6}, {length, 4.6, 2.5}});
    s.boxes.push_back({{-10, -4.6, -1.6}, {length, -4.0, 2.5}});
    for (int i = 0; i * 8.0 < length; ++i) {
        const double x = 4.0 + 8.0 * i;
        const double y = (i % 2 == 0) ? 2.5 : -2.5;
        s.cylinders.push_back({{x, y, 0.0}, {0, 0, 1}, 0.4, 2.5});
    }
    for (int i = 0; i * 16.0 < length; ++i) {
        s.spheres.push_back({{8.0 + 16.0 * i, 0.0, 0.4}, 0.8});
    }
    return s;
}

/// City-block grid of buildings on a ground plane, extent meters on a side.
inline Scene block_world(double extent = 200.0) {
    Scene s;
    s.planes.push_back({{0, 0, -1.6}, {0, 0, 1}});
    const double pitch = 25.0;
    int k = 0;
    for (double x = -extent / 2; x < extent / 2; x += pitch) {
        for (double y = -extent / 2; y < extent / 2; y += pitch, ++k) {
            if ((k % 4) == 3) continue;  // leave gaps so streets differ
            const double w = 6.0 + 2.0 * (k % 3);
            const double h = 4.0 + 3.0 * (k % 5);
            s.boxes.push_back({{x + 4.0, y + 4.0, -1.6}, {x + 4.0 + w, y + 4.0 + w, h}});
            if ((k % 5) == 0) {
                s.cylinders.push_back({{x + 2.0, y + 13.0, 0.0}, {0, 0, 1}, 0.5, 3.0});
            }
        }
    }
    return s;
}

// Direct surface samplers for registration tests that bypass segmentation.

inline std::vector<Vec3> sample_plane(const Vec3& origin, const Vec3& u, const Vec3& v,
                                      double ulen, double vlen, int n, std::mt19937_64& rng,
                                      double sigma = 0.0) {
    std::uniform_real_distribution<double> ua(0.0, ulen), va(0.0, vlen);
    std::normal_distribution<double> noise(0.0, sigma);
    const Vec3 normal = u.cross(v).normalized();
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec3 p = origin + ua(rng) * u.normalized() + va(rng) * v.normalized();
        if (sigma > 0) p += noise(rng) * normal;
        pts.push_back(p);
    }
    return pts;
}

inline std::vector<Vec3> sample_sphere(const Sphere& s, int n, std::mt19937_64& rng,
                                       double sigma = 0.0) {
    std::normal_distribution<double> g(0.0, 1.0), noise(0.0, sigma);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec3 d(g(rng), g(rng), g(rng));
        d.normalize();
        pts.push_back(s.center + (s.radius + (sigma > 0 ? noise(rng) : 0.0)) * d);
    }
    return pts;
}

inline std::vector<Vec3> sample_cylinder(const Cylinder& s, int n, std::mt19937_64& rng,
                                         double sigma = 0.0) {
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> along(-s.half_length, s.half_length);
    std::normal_distribution<double> noise(0.0, sigma);
    Vec3 u = s.axis.unitOrthogonal();
    Vec3 v = s.axis.cross(u);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double a = ang(rng);
        const Vec3 radial = std::cos(a) * u + std::sin(a) * v;
        pts.push_back(s.base + along(rng) * s.axis +
                      (s.radius + (sigma > 0 ? noise(rng) : 0.0)) * radial);
    }
    return pts;
}

inline std::vector<Vec3> random_points(int n, double extent, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-extent, extent);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    return pts;
}

inline qslam::ScanPatch make_scan_patch(std::vector<Vec3> points, std::uint64_t id,
                                        bool is_ground = false,
                                        const qslam::FitConfig& cfg = {}) {
    qslam::ScanPatch sp;
    sp.points = std::move(points);
    sp.patch = qslam::make_patch(qslam::accumulate_moments(sp.points), cfg, id, is_ground);
    return sp;
}

inline Pose random_pose(double max_t, double max_angle_rad, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ut(-max_t, max_t), ua(-1.0, 1.0);
    Vec3 axis(ua(rng), ua(rng), ua(rng));
    if (axis.norm() < 1e-9) axis = Vec3(0, 0, 1);
    axis.normalize();
    std::uniform_real_distribution<double> uang(-max_angle_rad, max_angle_rad);
    Pose T;
    T.R = qslam::so3_exp(uang(rng) * axis);
    T.t = Vec3(ut(rng), ut(rng), ut(rng));
    return T;
}

}  // namespace synth
