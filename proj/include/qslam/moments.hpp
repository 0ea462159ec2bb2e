#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/quadric.hpp"
#include "qslam/se3.hpp"

namespace qslam {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using Vec15 = Eigen::Matrix<double, 15, 1>;

namespace detail {

// eta component -> exponent triple of (x, y, z).
inline constexpr std::array<std::array<int, 3>, 6> kEtaExp = {{
    {2, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 0}, {0, 1, 1}, {1, 0, 1}}};

// The 15 distinct degree-4 monomials, ordered by decreasing (a, b, c).
inline constexpr std::array<std::array<int, 3>, 15> kQuartic = {{
    {4, 0, 0}, {3, 1, 0}, {3, 0, 1}, {2, 2, 0}, {2, 1, 1}, {2, 0, 2},
    {1, 3, 0}, {1, 2, 1}, {1, 1, 2}, {1, 0, 3},
    {0, 4, 0}, {0, 3, 1}, {0, 2, 2}, {0, 1, 3}, {0, 0, 4}}};

inline int quartic_index(int a, int b, int c) {
    for (int i = 0; i < 15; ++i) {
        if (kQuartic[i][0] == a && kQuartic[i][1] == b && kQuartic[i][2] == c) return i;
    }
    return -1;
}

// quartic_index(kEtaExp[i] + kEtaExp[j]) for the 6x6 eta scatter block.
inline const std::array<std::array<int, 6>, 6>& eta_pair_index() {
    static const auto table = [] {
        std::array<std::array<int, 6>, 6> t{};
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
                t[i][j] = quartic_index(kEtaExp[i][0] + kEtaExp[j][0],
                                        kEtaExp[i][1] + kEtaExp[j][1],
                                        kEtaExp[i][2] + kEtaExp[j][2]);
            }
        }
        return t;
    }();
    return table;
}

}  // namespace detail

inline Vec15 quartic_terms(const Vec3& p) {
    Vec15 m;
    const double x = p.x(), y = p.y(), z = p.z();
    const std::array<double, 3> v{x, y, z};
    for (int i = 0; i < 15; ++i) {
        double prod = 1.0;
        for (int a = 0; a < 3; ++a) {
            for (int e = 0; e < detail::kQuartic[i][a]; ++e) prod *= v[a];
        }
        m[i] = prod;
    }
    return m;
}

/// Linear map L(T) with q(T p) = L q(p) on the monomial vector q = [eta; p; 1].
inline Mat10 monomial_transform(const Pose& T) {
    Mat10 L = Mat10::Zero();
    L(9, 9) = 1.0;
    L.block<3, 3>(6, 6) = T.R;
    L.block<3, 1>(6, 9) = T.t;
    // eta rows: component r is the product p'_a p'_b with p' = R p + t.
    static constexpr std::array<std::array<int, 2>, 6> pairs = {{
        {0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}}};
    static constexpr std::array<std::array<int, 3>, 3> quad_col = {{
        {0, 3, 5}, {3, 1, 4}, {5, 4, 2}}};
    for (int r = 0; r < 6; ++r) {
        const int a = pairs[r][0], b = pairs[r][1];
        Eigen::Vector4d ua, ub;
        ua << T.R(a, 0), T.R(a, 1), T.R(a, 2), T.t[a];
        ub << T.R(b, 0), T.R(b, 1), T.R(b, 2), T.t[b];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) L(r, quad_col[i][j]) += ua[i] * ub[j];
            L(r, 6 + i) += ua[i] * ub[3] + ua[3] * ub[i];
        }
        L(r, 9) += ua[3] * ub[3];
    }
    return L;
}

/// Streaming moment statistics of a point set: count, means of p and eta,
/// centered scatters S, Q, P, plus the raw degree-4 monomial sums needed to
/// transform the eta moments exactly under SE(3).
struct MomentSet {
    std::uint64_t k = 0;
    Vec3 mu = Vec3::Zero();
    Vec6 eta_bar = Vec6::Zero();
    Mat3 S = Mat3::Zero();    // sum (p - mu)(p - mu)^T
    Mat6 Q = Mat6::Zero();    // sum (eta - eta_bar)(eta - eta_bar)^T
    Mat63 P = Mat63::Zero();  // sum (eta - eta_bar)(p - mu)^T
    Vec15 m4 = Vec15::Zero(); // raw sums of the 15 distinct degree-4 monomials

    void add_point(const Vec3& p) {
        const Vec6 eta = quadratic_terms(p);
        const double kd = static_cast<double>(k);
        const Vec3 mu1 = (kd * mu + p) / (kd + 1.0);
        const Vec6 eb1 = (kd * eta_bar + eta) / (kd + 1.0);
        S += p * p.transpose() - (kd + 1.0) * mu1 * mu1.transpose() + kd * mu * mu.transpose();
        Q += eta * eta.transpose() - (kd + 1.0) * eb1 * eb1.transpose() +
             kd * eta_bar * eta_bar.transpose();
        P += eta * p.transpose() - (kd + 1.0) * eb1 * mu1.transpose() +
             kd * eta_bar * mu.transpose();
        m4 += quartic_terms(p);
        mu = mu1;
        eta_bar = eb1;
        ++k;
    }

    /// Two-set merge, algebraically identical to folding add_point.
    void merge(const MomentSet& o) {
        if (o.k == 0) return;
        if (k == 0) { *this = o; return; }
        const double ka = static_cast<double>(k), kb = static_cast<double>(o.k);
        const double w = ka * kb / (ka + kb);
        const Vec3 d = mu - o.mu;
        const Vec6 e = eta_bar - o.eta_bar;
        S += o.S + w * d * d.transpose();
        Q += o.Q + w * e * e.transpose();
        P += o.P + w * e * d.transpose();
        m4 += o.m4;
        mu = (ka * mu + kb * o.mu) / (ka + kb);
        eta_bar = (ka * eta_bar + kb * o.eta_bar) / (ka + kb);
        k += o.k;
    }

    /// Full raw second-moment matrix sum q(p) q(p)^T of the absorbed points.
    Mat10 raw_moments() const {
        const double kd = static_cast<double>(k);
        Mat10 M = Mat10::Zero();
        M(9, 9) = kd;
        M.block<3, 1>(6, 9) = kd * mu;
        M.block<1, 3>(9, 6) = kd * mu.transpose();
        M.block<3, 3>(6, 6) = S + kd * mu * mu.transpose();
        M.block<6, 1>(0, 9) = kd * eta_bar;
        M.block<1, 6>(9, 0) = kd * eta_bar.transpose();
        M.block<6, 3>(0, 6) = P + kd * eta_bar * mu.transpose();
        M.block<3, 6>(6, 0) = M.block<6, 3>(0, 6).transpose();
        const auto& idx = detail::eta_pair_index();
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) M(i, j) = m4[idx[i][j]];
        }
        return M;
    }

    static MomentSet from_raw(const Mat10& M) {
        MomentSet m;
        const double kd = M(9, 9);
        m.k = static_cast<std::uint64_t>(std::llround(kd));
        if (m.k == 0) return m;
        m.mu = M.block<3, 1>(6, 9) / kd;
        m.eta_bar = M.block<6, 1>(0, 9) / kd;
        m.S = M.block<3, 3>(6, 6) - kd * m.mu * m.mu.transpose();
        m.P = M.block<6, 3>(0, 6) - kd * m.eta_bar * m.mu.transpose();
        Mat6 ee = M.block<6, 6>(0, 0);
        m.Q = ee - kd * m.eta_bar * m.eta_bar.transpose();
        const auto& idx = detail::eta_pair_index();
        // One representative per distinct quartic monomial.
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) m.m4[idx[i][j]] = ee(i, j);
        }
        return m;
    }

    /// Moments of the same point set expressed in another frame (p' = T p).
    MomentSet transformed(const Pose& T) const {
        const Mat10 L = monomial_transform(T);
        return from_raw(L * raw_moments() * L.transpose());
    }
};

inline MomentSet accumulate_moments(std::span<const Vec3> points) {
    if (points.empty()) throw EmptyPatch{};
    MomentSet m;
    for (const auto& p : points) m.add_point(p);
    return m;
}

}  // namespace qslam
