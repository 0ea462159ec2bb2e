#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "qslam/errors.hpp"
#include "qslam/map.hpp"
#include "qslam/patch.hpp"
#include "qslam/quadric.hpp"
#include "qslam/se3.hpp"

namespace qslam {

struct RegConfig {
    double alpha = 1.0;
    double beta = 0.1;
    double gamma = 1.9;
    double assoc_gate = 0.5;      // per-point weighted distance gate
    // Candidate prescreen: targets whose center is farther than this from the
    // transformed source center are never considered. Without it a small yaw
    // error prices the correct slightly-misaligned target out of the gate
    // while a distant coplanar plane looks free, and the solve runs away.
    double assoc_mu_radius = 10.0;
    std::size_t budget_points = 8000;
    int max_iters = 50;
    double lm_lambda0 = 1e-4;
    double cov_floor = 1e-4;
    int assoc_samples = 64;
    bool weighted_association = true;
    bool reciprocal_check = false;
    double step_tol = 1e-8;
    double cost_rel_tol = 1e-9;
    int max_rejections = 10;
};

struct Association {
    // (source patch index, target patch index, weighted distance per point)
    std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
    std::vector<std::size_t> unmatched;
};

namespace detail {

struct PreparedTarget {
    const Patch* patch;
    Mat3 S_inv;
};

inline std::vector<PreparedTarget> prepare_targets(const std::vector<Patch>& targets,
                                                   double cov_floor) {
    std::vector<PreparedTarget> out;
    out.reserve(targets.size());
    for (const auto& t : targets) {
        out.push_back({&t, regularized_covariance(t.moments, cov_floor).inverse()});
    }
    return out;
}

inline std::optional<double> point_patch_distance(const PreparedTarget& t, const Vec3& p) {
    if (t.patch->cls == PatchClass::Distribution) {
        const Vec3 e = p - t.patch->moments.mu;
        return e.dot(t.S_inv * e);
    }
    return taubin_distance(t.patch->coeffs, p);
}

}  // namespace detail

/// Weighted patch-to-patch distance over a deterministic stride subsample of
/// the source points. Returns (total, counted points).
inline std::pair<double, std::size_t> weighted_patch_distance_impl(
    const detail::PreparedTarget& target, const std::vector<Vec3>& source_points,
    const Pose& T, const RegConfig& cfg) {
    const std::size_t k = source_points.size();
    if (target.patch->cls == PatchClass::Distribution) {
        // Per-point Mahalanobis against a distribution floors at the chi^2
        // expectation (3 for an exact copy), so the per-point mean can never
        // pass a near-zero gate. Gate and rank these targets by the squared
        // center gap instead: zero for a perfect overlap and measured in
        // meters^2 like the surface distances, so a wide-scatter blob cannot
        // undercut a correctly matched surface patch the way a scale-free
        // Mahalanobis gap can.
        if (k == 0) return {0.0, 0};
        Vec3 mu = Vec3::Zero();
        for (const auto& p : source_points) mu += p;
        const Vec3 e = T * Vec3(mu / static_cast<double>(k)) - target.patch->moments.mu;
        const double d = e.squaredNorm();
        if (cfg.weighted_association) {
            return {cfg.alpha * d / (cfg.beta + cfg.gamma * std::exp(-d)), 1};
        }
        return {d, 1};
    }
    const std::size_t n = std::min<std::size_t>(k, static_cast<std::size_t>(cfg.assoc_samples));
    if (n == 0) return {0.0, 0};
    const std::size_t stride = k / n;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Vec3 p = T * source_points[j * stride];
        const auto d = detail::point_patch_distance(target, p);
        if (!d) continue;  // degenerate gradient: excluded, still counted
        if (cfg.weighted_association) {
            const Vec3 e = p - target.patch->moments.mu;
            const double maha = e.dot(target.S_inv * e);
            total += cfg.alpha * *d / (cfg.beta + cfg.gamma * std::exp(-maha));
        } else {
            total += *d;
        }
    }
    return {total, n};
}

inline double weighted_patch_distance(const ScanPatch& source, const Patch& target,
                                      const RegConfig& cfg = {}) {
    detail::PreparedTarget t{&target, regularized_covariance(target.moments, cfg.cov_floor).inverse()};
    return weighted_patch_distance_impl(t, source.points, Pose::identity(), cfg).first;
}

/// Double-loop association: each source patch matches the argmin target if
/// the per-point weighted distance passes the gate.
inline Association associate(const std::vector<ScanPatch>& source,
                             const std::vector<Patch>& targets, const Pose& T,
                             const RegConfig& cfg = {}) {
    if (source.empty() || targets.empty()) throw NoTargets{};
    const auto prepared = detail::prepare_targets(targets, cfg.cov_floor);
    Association out;
    std::vector<std::int64_t> best_source_for_target;
    std::vector<double> best_dist_for_target;
    if (cfg.reciprocal_check) {
        best_source_for_target.assign(targets.size(), -1);
        best_dist_for_target.assign(targets.size(), std::numeric_limits<double>::max());
    }
    std::vector<std::pair<std::size_t, std::size_t>> tentative;
    std::vector<double> tentative_dist;
    for (std::size_t i = 0; i < source.size(); ++i) {
        double best = std::numeric_limits<double>::max();
        std::size_t best_j = 0;
        const Vec3 smu = T * source[i].patch.moments.mu;
        // Ground centers track the visibility footprint, not a fixed piece of
        // surface, so the center prescreen does not apply to them.
        const bool prescreen = !source[i].patch.is_ground;
        for (std::size_t j = 0; j < targets.size(); ++j) {
            if (prescreen && (smu - targets[j].moments.mu).norm() > cfg.assoc_mu_radius) continue;
            const auto [total, n] = weighted_patch_distance_impl(prepared[j], source[i].points, T, cfg);
            if (n == 0) continue;
            const double per_point = total / static_cast<double>(n);
            if (per_point < best) {
                best = per_point;
                best_j = j;
            }
        }
        if (best < cfg.assoc_gate) {
            tentative.emplace_back(i, best_j);
            tentative_dist.push_back(best);
            if (cfg.reciprocal_check && best < best_dist_for_target[best_j]) {
                best_dist_for_target[best_j] = best;
                best_source_for_target[best_j] = static_cast<std::int64_t>(i);
            }
        } else {
            out.unmatched.push_back(i);
        }
    }
    for (std::size_t n = 0; n < tentative.size(); ++n) {
        const auto [i, j] = tentative[n];
        if (cfg.reciprocal_check && best_source_for_target[j] != static_cast<std::int64_t>(i)) {
            out.unmatched.push_back(i);
            continue;
        }
        out.pairs.emplace_back(i, j, tentative_dist[n]);
    }
    return out;
}

/// Adaptive patch selection by scale factor s = k / r, ground always kept.
inline std::vector<std::size_t> select_patches(const std::vector<ScanPatch>& patches,
                                               std::size_t budget_points) {
    std::vector<std::size_t> selected;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        (patches[i].patch.is_ground ? selected : rest).push_back(i);
    }
    auto scale = [&](std::size_t i) {
        const double r = patches[i].patch.moments.mu.norm();
        return r > 0 ? static_cast<double>(patches[i].patch.moments.k) / r : 0.0;
    };
    std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
        const double sa = scale(a), sb = scale(b);
        if (sa != sb) return sa > sb;
        if (patches[a].patch.moments.k != patches[b].patch.moments.k)
            return patches[a].patch.moments.k > patches[b].patch.moments.k;
        return patches[a].patch.id < patches[b].patch.id;
    });
    std::size_t cumulative = 0;
    for (std::size_t i : rest) {
        if (cumulative >= budget_points) break;
        selected.push_back(i);
        cumulative += patches[i].patch.moments.k;
    }
    return selected;
}

/// Point-to-patch residual rows for one rigid-pose estimation problem.
struct ResidualProblem {
    struct Row {
        Vec3 p;            // source-frame point
        std::size_t target;
    };
    std::vector<Patch> targets;
    std::vector<Mat3> target_S_inv;
    std::vector<Row> rows;

    void add_pair(const Patch& target, const std::vector<Vec3>& points,
                  double cov_floor = 1e-4) {
        targets.push_back(target);
        target_S_inv.push_back(regularized_covariance(target.moments, cov_floor).inverse());
        for (const auto& p : points) rows.push_back({p, targets.size() - 1});
    }
    bool empty() const { return rows.empty(); }
};

/// Residuals and analytic Jacobian rows at pose T; degenerate-gradient rows
/// are dropped. Rows use the left-perturbation model d(Tp)/dxi = [I, -(Tp)^].
inline void residuals_and_jacobian(const ResidualProblem& prob, const Pose& T,
                                   Eigen::VectorXd& res, Eigen::MatrixXd& J) {
    std::vector<double> r_vals;
    std::vector<Eigen::Matrix<double, 1, 6>> j_rows;
    r_vals.reserve(prob.rows.size());
    j_rows.reserve(prob.rows.size());
    for (const auto& row : prob.rows) {
        const Patch& tgt = prob.targets[row.target];
        const Vec3 y = T * row.p;
        Vec3 v;  // d res / d y
        double r;
        if (tgt.cls == PatchClass::Distribution) {
            const Mat3& S_inv = prob.target_S_inv[row.target];
            const Vec3 e = y - tgt.moments.mu;
            r = e.dot(S_inv * e);
            v = 2.0 * (S_inv * e);
        } else {
            const QuadricCoeffs& c = tgt.coeffs;
            const double f = eval_f(c, y);
            const Vec3 g = grad_f(c, y);
            const double g2 = g.squaredNorm();
            if (g2 < kGradientFloor) continue;
            r = f * f / g2;
            v = (2.0 * f / g2) * g - (4.0 * f * f / (g2 * g2)) * (c.A() * g);
        }
        Eigen::Matrix<double, 1, 6> jrow;
        jrow.head<3>() = v.transpose();
        jrow.tail<3>() = v.transpose() * (-hat(y));
        r_vals.push_back(r);
        j_rows.push_back(jrow);
    }
    res.resize(static_cast<Eigen::Index>(r_vals.size()));
    J.resize(static_cast<Eigen::Index>(r_vals.size()), 6);
    for (std::size_t i = 0; i < r_vals.size(); ++i) {
        res[static_cast<Eigen::Index>(i)] = r_vals[i];
        J.row(static_cast<Eigen::Index>(i)) = j_rows[i];
    }
}

using FreezeMask = std::array<bool, 6>;
inline constexpr FreezeMask kFreezeNone = {false, false, false, false, false, false};
// Step 1 solves [pitch, roll, z]: freeze x, y, yaw.
inline constexpr FreezeMask kFreezeXYYaw = {true, true, false, false, false, true};
// Step 2 solves [yaw, x, y]: freeze z, roll, pitch.
inline constexpr FreezeMask kFreezeZRollPitch = {false, false, true, true, true, false};

struct SolveReport {
    Pose pose;
    std::vector<double> cost_trace;
    int iterations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt on the left-multiplied se(3) perturbation.
inline SolveReport solve_pose_lm(const ResidualProblem& prob, const Pose& T0,
                                 const RegConfig& cfg = {},
                                 const FreezeMask& freeze = kFreezeNone) {
    Eigen::VectorXd res;
    Eigen::MatrixXd J;
    residuals_and_jacobian(prob, T0, res, J);
    if (res.size() < 6) throw Underconstrained{};

    SolveReport report;
    report.pose = T0;
    double cost = res.squaredNorm();
    report.cost_trace.push_back(cost);
    double lambda = cfg.lm_lambda0;
    int rejections = 0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        ++report.iterations;
        Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
        Vec6 g = J.transpose() * res;
        for (int i = 0; i < 6; ++i) {
            if (freeze[i]) {
                H.row(i).setZero();
                H.col(i).setZero();
                H(i, i) = 1.0;
                g[i] = 0.0;
            }
        }
        Eigen::Matrix<double, 6, 6> damped = H;
        for (int i = 0; i < 6; ++i) damped(i, i) += lambda * std::max(H(i, i), 1e-12);
        const Vec6 delta = damped.ldlt().solve(-g);
        if (!delta.allFinite()) throw Diverged{};
        if (delta.norm() < cfg.step_tol) {
            report.converged = true;
            break;
        }
        const Pose trial = se3_compose(se3_exp(delta), report.pose);
        Eigen::VectorXd res_trial;
        Eigen::MatrixXd J_trial;
        residuals_and_jacobian(prob, trial, res_trial, J_trial);
        const double cost_trial = res_trial.size() >= 6
            ? res_trial.squaredNorm() : std::numeric_limits<double>::max();
        if (cost_trial < cost) {
            const double rel = (cost - cost_trial) / std::max(cost, 1e-300);
            report.pose = trial;
            res = std::move(res_trial);
            J = std::move(J_trial);
            cost = cost_trial;
            report.cost_trace.push_back(cost);
            lambda /= 3.0;
            rejections = 0;
            if (rel < cfg.cost_rel_tol) {
                report.converged = true;
                break;
            }
        } else {
            lambda *= 2.0;
            if (++rejections >= cfg.max_rejections) {
                if (report.cost_trace.size() > 1) {
                    report.converged = true;  // progress was made; damping bottomed out
                    break;
                }
                throw Diverged{};
            }
        }
    }
    return report;
}

/// Ground residuals solve [pitch, roll, z]; the rest solve [yaw, x, y].
inline SolveReport two_step_solve(const ResidualProblem& ground,
                                  const ResidualProblem& other, const Pose& T0,
                                  const RegConfig& cfg = {}) {
    if (ground.empty() && other.empty()) throw Underconstrained{};
    if (ground.empty()) return solve_pose_lm(other, T0, cfg);
    if (other.empty()) return solve_pose_lm(ground, T0, cfg);
    const SolveReport step1 = solve_pose_lm(ground, T0, cfg, kFreezeXYYaw);
    SolveReport step2 = solve_pose_lm(other, step1.pose, cfg, kFreezeZRollPitch);
    step2.cost_trace.insert(step2.cost_trace.begin(), step1.cost_trace.begin(),
                            step1.cost_trace.end());
    step2.iterations += step1.iterations;
    return step2;
}

/// two_step_solve, except a step whose every trial update is rejected keeps
/// its input pose: rejecting all damped steps means that pose already sits at
/// a local minimum of that step's residuals (e.g. an exact initial guess).
inline SolveReport two_step_solve_lenient(const ResidualProblem& ground,
                                          const ResidualProblem& other, const Pose& T0,
                                          const RegConfig& cfg = {}) {
    auto step = [&](const ResidualProblem& prob, const Pose& T, const FreezeMask& freeze) {
        try {
            return solve_pose_lm(prob, T, cfg, freeze);
        } catch (const Diverged&) {
            SolveReport r;
            r.pose = T;
            r.converged = true;
            return r;
        }
    };
    if (ground.empty() && other.empty()) throw Underconstrained{};
    if (ground.empty()) return step(other, T0, kFreezeNone);
    if (other.empty()) return step(ground, T0, kFreezeNone);
    const SolveReport step1 = step(ground, T0, kFreezeXYYaw);
    SolveReport step2 = step(other, step1.pose, kFreezeZRollPitch);
    step2.cost_trace.insert(step2.cost_trace.begin(), step1.cost_trace.begin(),
                            step1.cost_trace.end());
    step2.iterations += step1.iterations;
    return step2;
}

}  // namespace qslam
