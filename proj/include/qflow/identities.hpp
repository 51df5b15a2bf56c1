#pragma once

// Numerical checks of the deformation-gradient identities, shared by the
// tensor-check subcommand and the test suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qflow/grid.hpp"
#include "qflow/kinematics.hpp"

namespace qflow {

struct IdentityCheck {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool lower_bound = false;  // value must be >= tolerance rather than <=
    bool passed = false;
    std::string detail;
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;
    std::size_t cofactor_draws = 0;
    std::size_t cofactor_passed = 0;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.passed; });
    }
};

namespace detail {

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

/// Entries uniform in [-1, 1], redrawn until |det| >= 0.05.
inline Mat3 random_gradient(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        Mat3 g;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) g(i, j) = u(rng);
        if (std::abs(g.determinant()) >= 0.05) return g;
    }
}

inline double observed_order(double coarse, double fine, double ratio = 2.0) {
    return std::log(coarse / fine) / std::log(ratio);
}

inline IdentityCheck upper(std::string name, double value, double tol, std::string detail = {}) {
    return {std::move(name), value, tol, false, value <= tol, std::move(detail)};
}

inline IdentityCheck lower(std::string name, double value, double tol, std::string detail = {}) {
    return {std::move(name), value, tol, true, value >= tol, std::move(detail)};
}

/// q_i = a_i + 0.1 sin(a_{i+1}), indices cyclic. Analytic derivatives.
struct SineMap {
    static int nx(int i) { return (i + 1) % 3; }

    static DeformGradient at(const Vec3& a) {
        DeformGradient d;
        Tensor3 q2{};
        Tensor4 q3{};
        for (auto& m : q2) m.setZero();
        for (auto& row : q3)
            for (auto& m : row) m.setZero();
        for (int i = 0; i < 3; ++i) {
            const int j = nx(i);
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            d.g(i, j) += 0.1 * std::cos(a(j));
            q2[ui](j, j) = -0.1 * std::sin(a(j));
            q3[ui][uj](j, j) = -0.1 * std::cos(a(j));
        }
        d.d2 = q2;
        d.d3 = q3;
        return d;
    }
};

/// Standard 3D Gaussian density.
inline double gaussian3(const Vec3& a) {
    return std::exp(-0.5 * a.squaredNorm()) / std::pow(2.0 * std::numbers::pi, 1.5);
}

inline LabelDensity gaussian3_jet(const Vec3& a) {
    LabelDensity r;
    r.rho0 = gaussian3(a);
    r.grad = -a * r.rho0;
    r.hess = (a * a.transpose() - Mat3::Identity()) * r.rho0;
    return r;
}

/// Eulerian stress of rho = rho0 / J at the image of label a, with spatial
/// derivatives from label derivatives by the chain rule. The label Hessian
/// of rho comes from fourth-order central differences.
inline Mat3 chain_rule_stress(const Vec3& a, double hbar, double mass) {
    auto rho = [](const Vec3& b) { return gaussian3(b) / SineMap::at(b).g.determinant(); };
    const double h = 1e-3;
    auto shifted = [&](int i, double si, int j, double sj) {
        Vec3 b = a;
        b(i) += si * h;
        b(j) += sj * h;
        return rho(b);
    };
    const double w1[4] = {1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0};
    const double off[4] = {-2.0, -1.0, 1.0, 2.0};
    Vec3 ga;
    Mat3 ha;
    for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int p = 0; p < 4; ++p) s += w1[p] * shifted(i, off[p], i, 0.0);
        ga(i) = s / h;
        for (int j = 0; j < 3; ++j) {
            double t = 0.0;
            if (i == j) {
                const double w2[5] = {-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0};
                for (int p = 0; p < 5; ++p) t += w2[p] * shifted(i, p - 2.0, i, 0.0);
            } else {
                for (int p = 0; p < 4; ++p)
                    for (int r = 0; r < 4; ++r) t += w1[p] * w1[r] * shifted(i, off[p], j, off[r]);
            }
            ha(i, j) = t / (h * h);
        }
    }

    const DeformGradient d = SineMap::at(a);
    const Mat3 ginv = d.g.inverse();
    DensityJet jet;
    jet.rho = rho(a);
    jet.grad = ginv.transpose() * ga;
    Mat3 corr = Mat3::Zero();
    for (int m = 0; m < 3; ++m) corr += jet.grad(m) * (*d.d2)[static_cast<std::size_t>(m)];
    jet.hess = ginv.transpose() * (ha - corr) * ginv;
    return stress_eulerian(jet, hbar, mass);
}

/// q_i = a_i + 0.2 sin(a_{i+1} + 0.5 a_{i+2}) + 0.1 a_i a_{i+2}.
inline Vec3 warped_map(const Vec3& a) {
    Vec3 q;
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        const int k = (i + 2) % 3;
        q(i) = a(i) + 0.2 * std::sin(a(j) + 0.5 * a(k)) + 0.1 * a(i) * a(k);
    }
    return q;
}

/// Central-difference divergence d J_il / d a_l of the cofactor of the
/// central-difference gradient of warped_map, both at spacing h.
inline double cofactor_divergence(const Vec3& a, double h) {
    auto grad = [h](const Vec3& b) {
        Mat3 g;
        for (int l = 0; l < 3; ++l) {
            Vec3 e = Vec3::Zero();
            e(l) = h;
            g.col(l) = (warped_map(b + e) - warped_map(b - e)) / (2.0 * h);
        }
        return g;
    };
    Vec3 div = Vec3::Zero();
    for (int l = 0; l < 3; ++l) {
        Vec3 e = Vec3::Zero();
        e(l) = h;
        div += (cofactor_matrix(grad(a + e)).col(l) - cofactor_matrix(grad(a - e)).col(l)) / (2.0 * h);
    }
    return div.cwiseAbs().maxCoeff();
}

}  // namespace detail

inline IdentityReport run_identity_suite(std::uint64_t seed = 20240601, std::size_t draws = 100) {
    IdentityReport rep;
    std::mt19937_64 rng(seed);

    // g_kj J_ki = J delta_ij
    double worst_cof = 0.0;
    double worst_hyper = 0.0;
    double worst_det = 0.0;
    for (std::size_t n = 0; n < draws; ++n) {
        const Mat3 g = detail::random_gradient(rng);
        const double J = jacobian(g);
        const Mat3 C = cofactor_matrix(g);
        const double r = detail::max_abs(g.transpose() * C - J * Mat3::Identity()) / std::abs(J);
        worst_cof = std::max(worst_cof, r);
        worst_det = std::max(worst_det, std::abs(J - g.determinant()) / std::abs(J));
        ++rep.cofactor_draws;
        if (r <= 1e-12) ++rep.cofactor_passed;

        const Tensor4 H = hyper_cofactor(g);
        const double step = 1e-5;
        for (int m = 0; m < 3; ++m)
            for (int k = 0; k < 3; ++k) {
                Mat3 gp = g;
                Mat3 gm = g;
                gp(m, k) += step;
                gm(m, k) -= step;
                const Mat3 fd = (cofactor_matrix(gp) - cofactor_matrix(gm)) / (2.0 * step);
                for (int j = 0; j < 3; ++j)
                    for (int l = 0; l < 3; ++l) {
                        const double e = std::abs(H[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)](l, k) -
                                                  fd(j, l));
                        worst_hyper = std::max(worst_hyper, e);
                    }
            }
    }
    rep.checks.push_back(detail::upper("cofactor identity", worst_cof, 1e-12,
                                       std::to_string(rep.cofactor_passed) + "/" +
                                           std::to_string(rep.cofactor_draws) + " draws"));
    rep.checks.push_back(detail::upper("jacobian vs determinant", worst_det, 1e-12));
    rep.checks.push_back(detail::upper("hyper-cofactor vs finite difference", worst_hyper, 1e-8));

    // Divergence-free cofactor under refinement.
    const std::vector<Vec3> probes{{0.3, -0.2, 0.5}, {-0.7, 0.4, 0.1}, {0.9, 0.8, -0.6}, {0.0, 0.0, 0.0}};
    std::vector<double> div_err;
    for (double h : {0.1, 0.05, 0.025}) {
        double worst = 0.0;
        for (const auto& a : probes) worst = std::max(worst, detail::cofactor_divergence(a, h));
        div_err.push_back(worst);
    }
    const double div_order = std::min(detail::observed_order(div_err[0], div_err[1]),
                                      detail::observed_order(div_err[1], div_err[2]));
    rep.checks.push_back(detail::lower("cofactor divergence order", div_order, 2.0 - 0.05,
                                       "errors " + std::to_string(div_err[0]) + ", " + std::to_string(div_err[1]) +
                                           ", " + std::to_string(div_err[2])));

    // Label-space stress against the chain-rule Eulerian stress.
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    double worst_stress = 0.0;
    double worst_sym = 0.0;
    double scale = 0.0;
    for (int n = 0; n < 20; ++n) {
        const Vec3 a(u(rng), u(rng), u(rng));
        const Mat3 sl = stress_lagrangian(detail::SineMap::at(a), detail::gaussian3_jet(a), 1.0, 1.0);
        const Mat3 se = detail::chain_rule_stress(a, 1.0, 1.0);
        worst_stress = std::max(worst_stress, detail::max_abs(sl - se));
        worst_sym = std::max(worst_sym, detail::max_abs(sl - sl.transpose()) / detail::max_abs(sl));
        scale = std::max(scale, detail::max_abs(se));
    }
    rep.checks.push_back(detail::upper("lagrangian vs eulerian stress", worst_stress / scale, 1e-6));
    rep.checks.push_back(detail::upper("stress symmetry", worst_sym, 1e-12));

    // rho^-1 d sigma = d V_Q at second order.
    std::vector<double> force_err;
    for (std::size_t n : {101u, 201u, 401u}) {
        const auto grid = UniformGrid::span(-3.0, 3.0, n);
        std::vector<double> rho(n);
        for (std::size_t i = 0; i < n; ++i) rho[i] = 2.0 + std::sin(grid[i]) + 0.3 * std::cos(2.0 * grid[i]);
        force_err.push_back(force_identity_residual(rho, grid, 1.0, 1.0, 2));
    }
    const double force_order = std::min(detail::observed_order(force_err[0], force_err[1]),
                                        detail::observed_order(force_err[1], force_err[2]));
    rep.checks.push_back(detail::lower("force identity order", force_order, 2.0 - 0.05,
                                       "errors " + std::to_string(force_err[0]) + ", " +
                                           std::to_string(force_err[1]) + ", " + std::to_string(force_err[2])));
    return rep;
}

}  // namespace qflow
