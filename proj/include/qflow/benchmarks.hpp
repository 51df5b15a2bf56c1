#pragma once

// Closed-form free-Gaussian solution and discrete error norms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>

#include "qflow/errors.hpp"
#include "qflow/model.hpp"

namespace qflow::bench {

/// alpha = (hbar / (2 m sigma0^2))^2, the spreading rate of a free Gaussian.
inline double spreading_rate(double sigma0, const PhysicsParams& p) {
    const double r = p.hbar / (2.0 * p.mass * sigma0 * sigma0);
    return r * r;
}

struct PathPoint {
    double q;
    double qdot;
};

/// q = a (1 + alpha t^2)^(1/2) for the free Gaussian released at rest.
inline PathPoint gaussian_trajectory(double a, double t, double sigma0, const PhysicsParams& p) {
    const double alpha = spreading_rate(sigma0, p);
    const double T = std::sqrt(1.0 + alpha * t * t);
    return {a * T, a * alpha * t / T};
}

/// Phase convention for the closed-form S(x, t).
enum class PhaseForm {
    /// S = m alpha t x^2 sigma0^2 / (2 sigma^2) - (hbar/2) atan(hbar t / (2 m sigma0^2)).
    /// Satisfies the quantum Hamilton-Jacobi equation exactly.
    validated,
    /// The same expression without the factor t on the quadratic term. Kept so
    /// the residual test can show that it is not a solution.
    as_printed,
};

struct GaussianField {
    double rho;
    double S;
    // Derivatives used by the analytic residual checks.
    double rho_x;
    double rho_xx;
    double S_x;
    double S_t;
    double v;  // S_x / m
};

/// Free Gaussian density and phase at (x, t), centre drifting with velocity
/// hbar k / m when k != 0 (Galilean boost of the rest solution).
inline GaussianField gaussian_wavefunction(double x, double t, double sigma0, const PhysicsParams& p,
                                           PhaseForm form = PhaseForm::validated, double k = 0.0) {
    const double m = p.mass;
    const double hbar = p.hbar;
    const double alpha = spreading_rate(sigma0, p);
    const double T2 = 1.0 + alpha * t * t;
    const double s2 = sigma0 * sigma0 * T2;
    const double u = hbar * k / m;  // drift velocity
    const double y = x - u * t;

    GaussianField f{};
    f.rho = std::exp(-y * y / (2.0 * s2)) / std::sqrt(2.0 * std::numbers::pi * s2);
    f.rho_x = -y / s2 * f.rho;
    f.rho_xx = (y * y / (s2 * s2) - 1.0 / s2) * f.rho;

    const double tfac = form == PhaseForm::validated ? t : 1.0;
    // c(t) = alpha t / (1 + alpha t^2), the curvature of the rest phase.
    const double c = alpha * tfac / T2;
    const double dc = form == PhaseForm::validated ? alpha * (1.0 - alpha * t * t) / (T2 * T2)
                                                   : -2.0 * alpha * alpha * t / (T2 * T2);
    const double gouy_rate = hbar / (2.0 * m * sigma0 * sigma0);
    const double gouy = -0.5 * hbar * std::atan(gouy_rate * t);
    const double dgouy = -0.5 * hbar * gouy_rate / (1.0 + gouy_rate * gouy_rate * t * t);

    const double S_rest = 0.5 * m * c * y * y + gouy;
    f.S = S_rest + m * u * x - 0.5 * m * u * u * t;
    f.S_x = m * c * y + m * u;
    // d/dt at fixed x: y depends on t through -u t.
    f.S_t = 0.5 * m * dc * y * y + dgouy - m * c * y * u - 0.5 * m * u * u;
    f.v = f.S_x / m;
    return f;
}

inline cplx gaussian_psi(double x, double t, double sigma0, const PhysicsParams& p, double k = 0.0) {
    const auto f = gaussian_wavefunction(x, t, sigma0, p, PhaseForm::validated, k);
    return std::polar(std::sqrt(f.rho), f.S / p.hbar);
}

/// Pointwise quantum Hamilton-Jacobi residual of the closed form, using
/// analytic derivatives throughout (V = 0).
inline double gaussian_qhj_residual(double x, double t, double sigma0, const PhysicsParams& p,
                                    PhaseForm form = PhaseForm::validated, double k = 0.0) {
    const auto f = gaussian_wavefunction(x, t, sigma0, p, form, k);
    const double lx = f.rho_x / f.rho;
    const double lxx = f.rho_xx / f.rho - lx * lx;
    const double vq = -(p.hbar * p.hbar / (4.0 * p.mass)) * (lxx + 0.5 * lx * lx);
    return f.S_t + f.S_x * f.S_x / (2.0 * p.mass) + vq;
}

/// Residual of T'' = alpha / T^3 for T = (1 + alpha t^2)^(1/2), all terms
/// evaluated from their closed forms.
inline double ode_check_T(double t, double alpha) {
    const double T2 = 1.0 + alpha * t * t;
    const double T = std::sqrt(T2);
    // T' = alpha t / T,  T'' = alpha / T - alpha^2 t^2 / T^3 = alpha / T^3
    const double Tdd = alpha / T - alpha * alpha * t * t / (T2 * T);
    return Tdd - alpha / (T * T2);
}

struct ErrorNorms {
    double l2 = 0.0;
    double linf = 0.0;
    double phase_reduced_l2 = 0.0;
    double optimal_phase = 0.0;  // phi minimising |A - e^{i phi} B|
};

/// Discrete norms over masked points with weight dx per point.
inline ErrorNorms error_norms(std::span<const double> a, std::span<const double> b,
                              std::span<const std::uint8_t> mask, double dx) {
    if (a.size() != b.size() || a.size() != mask.size()) throw ValidationError("field lengths differ");
    ErrorNorms e;
    std::size_t count = 0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask[i]) continue;
        ++count;
        const double d = std::abs(a[i] - b[i]);
        s += d * d * dx;
        e.linf = std::max(e.linf, d);
    }
    if (count == 0) throw ValidationError("error norms over an empty mask");
    e.l2 = std::sqrt(s);
    e.phase_reduced_l2 = e.l2;
    return e;
}

inline ErrorNorms error_norms(std::span<const cplx> a, std::span<const cplx> b,
                              std::span<const std::uint8_t> mask, double dx) {
    if (a.size() != b.size() || a.size() != mask.size()) throw ValidationError("field lengths differ");
    ErrorNorms e;
    std::size_t count = 0;
    cplx overlap{0.0, 0.0};
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask[i]) continue;
        ++count;
        const double d = std::abs(a[i] - b[i]);
        s += d * d * dx;
        e.linf = std::max(e.linf, d);
        overlap += a[i] * std::conj(b[i]);
    }
    if (count == 0) throw ValidationError("error norms over an empty mask");
    e.l2 = std::sqrt(s);
    e.optimal_phase = std::abs(overlap) > 0.0 ? std::arg(overlap) : 0.0;
    const cplx rot = std::polar(1.0, e.optimal_phase);
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask[i]) continue;
        r += std::norm(a[i] - rot * b[i]) * dx;
    }
    e.phase_reduced_l2 = std::sqrt(r);
    return e;
}

}  // namespace qflow::bench
