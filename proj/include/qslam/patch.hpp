#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "qslam/errors.hpp"
#include "qslam/moments.hpp"
#include "qslam/quadric.hpp"

namespace qslam {

enum class PatchClass : std::uint8_t { Quadric = 0, Plane = 1, Distribution = 2 };

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

struct FitConfig {
    double mse_threshold = 0.04;
    double plane_eig_ratio = 0.01;
    double cov_floor = 1e-4;       // m^2, lower clamp on covariance eigenvalues
    std::uint64_t min_fit_points = 10;
};

struct FitResult {
    QuadricCoeffs coeffs;
    double mse = 0.0;
};

/// Constrained least-squares quadric fit from moment statistics:
/// minimize the mean squared algebraic residual subject to |[c_eta; c_p]| = 1.
inline FitResult fit_quadric(const MomentSet& m, std::uint64_t min_points = 10) {
    if (m.k < min_points) {
        throw InsufficientPoints("quadric fit needs >= " + std::to_string(min_points) +
                                 " points, got " + std::to_string(m.k));
    }
    Mat9 M;
    M.block<6, 6>(0, 0) = m.Q;
    M.block<6, 3>(0, 6) = m.P;
    M.block<3, 6>(6, 0) = m.P.transpose();
    M.block<3, 3>(6, 6) = m.S;
    M = 0.5 * (M + M.transpose().eval());
    if (!M.allFinite()) throw SingularMoments{};
    Eigen::SelfAdjointEigenSolver<Mat9> eig(M);
    if (eig.info() != Eigen::Success) throw SingularMoments{};
    Vec9 v = eig.eigenvectors().col(0);
    // Deterministic sign: largest-magnitude component positive.
    int imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    FitResult r;
    r.coeffs.c.head<9>() = v;
    r.coeffs.c[9] = -v.head<6>().dot(m.eta_bar) - v.tail<3>().dot(m.mu);
    r.mse = std::max(eig.eigenvalues()[0], 0.0) / static_cast<double>(m.k);
    return r;
}

inline Mat3 regularized_covariance(const MomentSet& m, double cov_floor = 1e-4) {
    if (m.k < 3) throw InsufficientPoints("covariance needs >= 3 points");
    const Mat3 cov = m.S / static_cast<double>(m.k);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 lam = eig.eigenvalues().cwiseMax(cov_floor);
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

/// A fitted surface unit: quadric, plane, or normal-distribution fallback.
struct Patch {
    std::uint64_t id = 0;
    PatchClass cls = PatchClass::Distribution;
    QuadricCoeffs coeffs;
    MomentSet moments;
    double mse = 0.0;
    bool is_ground = false;

    Vec3 center() const { return moments.mu; }
    std::uint64_t size() const { return moments.k; }
    Mat3 covariance(double cov_floor = 1e-4) const {
        return regularized_covariance(moments, cov_floor);
    }
};

inline Patch classify_patch(const MomentSet& m, const FitResult& fit, const FitConfig& cfg) {
    Patch patch;
    patch.moments = m;
    patch.mse = fit.mse;
    if (fit.mse > cfg.mse_threshold) {
        patch.cls = PatchClass::Distribution;
        patch.coeffs = QuadricCoeffs{};  // zero vector by convention
        return patch;
    }
    const double kd = static_cast<double>(m.k);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(m.S / kd);
    const Vec3 lam = eig.eigenvalues();
    if (lam[1] > 0 && lam[0] / lam[1] < cfg.plane_eig_ratio) {
        Vec3 n = eig.eigenvectors().col(0);
        int imax = 0;
        n.cwiseAbs().maxCoeff(&imax);
        if (n[imax] < 0) n = -n;
        const double plane_mse = n.dot((m.S / kd) * n);
        if (plane_mse <= cfg.mse_threshold) {
            patch.cls = PatchClass::Plane;
            patch.coeffs = QuadricCoeffs{};
            patch.coeffs.c.segment<3>(6) = n;
            patch.coeffs.c[9] = -n.dot(m.mu);
            patch.mse = plane_mse;
            return patch;
        }
    }
    patch.cls = PatchClass::Quadric;
    patch.coeffs = fit.coeffs;
    return patch;
}

/// Fit + classify in one step, preserving identity and ground tags.
inline Patch make_patch(const MomentSet& m, const FitConfig& cfg, std::uint64_t id = 0,
                        bool is_ground = false) {
    const FitResult fit = fit_quadric(m, cfg.min_fit_points);
    Patch p = classify_patch(m, fit, cfg);
    p.id = id;
    p.is_ground = is_ground;
    return p;
}

}  // namespace qslam
