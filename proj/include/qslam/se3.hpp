#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace qslam {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Lie-algebra coordinates, translation part first: xi = [rho; phi].
using Tangent6 = Vec6;

inline Mat3 hat(const Vec3& w) {
    Mat3 m;
    m << 0, -w.z(), w.y(),
         w.z(), 0, -w.x(),
         -w.y(), w.x(), 0;
    return m;
}

/// Rigid transform in SE(3).
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 operator*(const Vec3& p) const { return R * p + t; }
};

inline Pose se3_compose(const Pose& a, const Pose& b) {
    return {a.R * b.R, a.R * b.t + a.t};
}

inline Pose se3_inverse(const Pose& T) {
    return {T.R.transpose(), -(T.R.transpose() * T.t)};
}

inline Vec3 se3_apply(const Pose& T, const Vec3& p) { return T * p; }

inline Mat3 so3_exp(const Vec3& w) {
    const double theta = w.norm();
    if (theta < 1e-12) return Mat3::Identity() + hat(w);
    const Vec3 a = w / theta;
    const Mat3 A = hat(a);
    return Mat3::Identity() + std::sin(theta) * A + (1.0 - std::cos(theta)) * A * A;
}

inline Vec3 so3_log(const Mat3& R) {
    const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta < 1e-10) {
        return 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    }
    if (theta > M_PI - 1e-6) {
        // Near pi: extract axis from the symmetric part.
        Mat3 S = 0.5 * (R + Mat3::Identity());
        Vec3 a(std::sqrt(std::max(S(0, 0), 0.0)),
               std::sqrt(std::max(S(1, 1), 0.0)),
               std::sqrt(std::max(S(2, 2), 0.0)));
        int k = 0;
        a.cwiseAbs().maxCoeff(&k);
        for (int i = 0; i < 3; ++i) {
            if (i != k && S(k, i) < 0) a[i] = -a[i];
        }
        if (a[k] < 0) a = -a;
        return theta * a.normalized();
    }
    const double s = theta / (2.0 * std::sin(theta));
    return s * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
}

inline Pose se3_exp(const Tangent6& xi) {
    const Vec3 rho = xi.head<3>();
    const Vec3 phi = xi.tail<3>();
    const double theta = phi.norm();
    const Mat3 R = so3_exp(phi);
    Mat3 V;
    if (theta < 1e-9) {
        V = Mat3::Identity() + 0.5 * hat(phi);
    } else {
        const Vec3 a = phi / theta;
        const Mat3 A = hat(a);
        V = Mat3::Identity() + (1.0 - std::cos(theta)) / theta * A +
            (theta - std::sin(theta)) / theta * A * A;
    }
    return {R, V * rho};
}

inline Tangent6 se3_log(const Pose& T) {
    const Vec3 phi = so3_log(T.R);
    const double theta = phi.norm();
    Mat3 Vinv;
    if (theta < 1e-9) {
        Vinv = Mat3::Identity() - 0.5 * hat(phi);
    } else {
        const Vec3 a = phi / theta;
        const Mat3 A = hat(a);
        const double half = 0.5 * theta;
        const double cot = half / std::tan(half);
        Vinv = Mat3::Identity() - 0.5 * theta * A + (1.0 - cot) * A * A;
    }
    Tangent6 xi;
    xi.head<3>() = Vinv * T.t;
    xi.tail<3>() = phi;
    return xi;
}

}  // namespace qslam
