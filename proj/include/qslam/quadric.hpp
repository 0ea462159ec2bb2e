#pragma once

#include <Eigen/Dense>
#include <optional>

#include "qslam/se3.hpp"

namespace qslam {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;

/// Monomial vector q(p) = [eta; p; 1] with eta = [x^2, y^2, z^2, xy, yz, xz].
inline Vec6 quadratic_terms(const Vec3& p) {
    Vec6 eta;
    eta << p.x() * p.x(), p.y() * p.y(), p.z() * p.z(),
           p.x() * p.y(), p.y() * p.z(), p.x() * p.z();
    return eta;
}

inline Vec10 monomials(const Vec3& p) {
    Vec10 q;
    q.head<6>() = quadratic_terms(p);
    q.segment<3>(6) = p;
    q[9] = 1.0;
    return q;
}

/// Coefficients of an implicit quadric f(p) = c_eta . eta + c_p . p + c9.
struct QuadricCoeffs {
    Vec10 c = Vec10::Zero();

    QuadricCoeffs() = default;
    explicit QuadricCoeffs(const Vec10& v) : c(v) {}

    Vec6 c_eta() const { return c.head<6>(); }
    Vec3 c_p() const { return c.segment<3>(6); }
    double c9() const { return c[9]; }

    /// Matrix view: f(p) = p^T A p + b^T p + c9.
    Mat3 A() const {
        Mat3 m;
        m << c[0], c[3] / 2, c[5] / 2,
             c[3] / 2, c[1], c[4] / 2,
             c[5] / 2, c[4] / 2, c[2];
        return m;
    }
    Vec3 b() const { return c_p(); }

    bool is_zero() const { return c.isZero(0.0); }
};

inline double eval_f(const QuadricCoeffs& c, const Vec3& p) {
    return c.c.dot(monomials(p));
}

inline Vec3 grad_f(const QuadricCoeffs& c, const Vec3& p) {
    return 2.0 * (c.A() * p) + c.b();
}

inline constexpr double kGradientFloor = 1e-12;

/// Squared first-order point-to-quadric distance f^2 / |grad f|^2.
/// Empty when the gradient magnitude is below the floor (critical point).
inline std::optional<double> taubin_distance(const QuadricCoeffs& c, const Vec3& p) {
    const double f = eval_f(c, p);
    const double g2 = grad_f(c, p).squaredNorm();
    if (g2 < kGradientFloor) return std::nullopt;
    return f * f / g2;
}

}  // namespace qslam
