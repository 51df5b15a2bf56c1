#pragma once

// Physical parameters, initial data, Lagrangian and Eulerian state snapshots,
// and the Madelung map between (rho, S) and psi.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"

namespace qflow {

using cplx = std::complex<double>;

struct FreePotential {};

/// V(x) = m omega^2 x^2 / 2.
struct HarmonicPotential {
    double omega = 1.0;
};

/// Samples of V on a uniform grid; evaluated off-grid by cubic Hermite
/// interpolation with 4th-order nodal slopes.
struct TabulatedPotential {
    UniformGrid grid;
    std::vector<double> values;
    std::vector<double> slopes;  // dV/dx at the nodes

    static TabulatedPotential make(const UniformGrid& grid, std::vector<double> values) {
        if (values.size() != grid.size || grid.size < 5) {
            throw ValidationError("tabulated potential needs >= 5 samples matching its grid");
        }
        TabulatedPotential tab{grid, std::move(values), {}};
        tab.slopes = Stencil(1, 4, grid.size, grid.step)(tab.values);
        return tab;
    }
};

using Potential = std::variant<FreePotential, HarmonicPotential, TabulatedPotential>;

struct PhysicsParams {
    double hbar = 1.0;
    double mass = 1.0;
    Potential potential = FreePotential{};

    void validate() const {
        if (!(hbar > 0.0)) throw ValidationError("physics.hbar must be > 0");
        if (!(mass > 0.0)) throw ValidationError("physics.mass must be > 0");
        if (const auto* tab = std::get_if<TabulatedPotential>(&potential)) {
            if (tab->values.size() != tab->grid.size || tab->slopes.size() != tab->grid.size ||
                tab->grid.size < 5) {
                throw ValidationError("tabulated potential needs >= 5 samples matching its grid");
            }
        }
    }

    bool is_free() const { return std::holds_alternative<FreePotential>(potential); }

    double V(double x) const { return eval(x).first; }
    double dV(double x) const { return eval(x).second; }

    /// (V, dV/dx) at x.
    std::pair<double, double> eval(double x) const {
        return std::visit(
            [&](const auto& p) -> std::pair<double, double> {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, FreePotential>) {
                    return {0.0, 0.0};
                } else if constexpr (std::is_same_v<T, HarmonicPotential>) {
                    const double k = mass * p.omega * p.omega;
                    return {0.5 * k * x * x, k * x};
                } else {
                    return eval_table(p, x);
                }
            },
            potential);
    }

    /// V sampled on `grid`; a tabulated potential must be tabulated on that grid.
    std::vector<double> sample(const UniformGrid& grid) const {
        if (const auto* tab = std::get_if<TabulatedPotential>(&potential)) {
            if (!tab->grid.same_as(grid)) {
                throw ValidationError("tabulated potential grid does not match the evaluation grid");
            }
            return tab->values;
        }
        std::vector<double> v(grid.size);
        for (std::size_t i = 0; i < grid.size; ++i) v[i] = V(grid[i]);
        return v;
    }

  private:
    static std::pair<double, double> eval_table(const TabulatedPotential& tab, double x) {
        const auto& g = tab.grid;
        const double lo = g.front();
        const double hi = g.back();
        if (x < lo || x > hi) {
            throw ValidationError("position " + std::to_string(x) + " outside tabulated potential");
        }
        const auto& slope = tab.slopes;
        const std::size_t i = std::min(g.size - 2, static_cast<std::size_t>((x - lo) / g.step));
        const double h = g.step;
        const double s = (x - g[i]) / h;
        const double y0 = tab.values[i], y1 = tab.values[i + 1];
        const double m0 = slope[i] * h, m1 = slope[i + 1] * h;
        const double s2 = s * s, s3 = s2 * s;
        const double v = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 +
                         (s3 - s2) * m1;
        const double dv = ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 +
                           (3 * s2 - 2 * s) * m1) /
                          h;
        return {v, dv};
    }
};

/// Closed-form description of the initial data. Log-density derivatives are
/// used instead of rho0' and rho0'' so that tails never divide by rho0.
struct ClosedForm {
    std::function<double(double)> rho0;
    std::function<double(double)> log_rho0_d1;  // rho0'/rho0
    std::function<double(double)> log_rho0_d2;  // (ln rho0)''
    std::function<double(double)> S0;
    std::function<double(double)> S0_d1;
    std::function<double(double)> S0_d2;
};

struct InitialState {
    UniformGrid labels;
    std::vector<double> rho0;
    std::vector<double> S0;
    std::optional<ClosedForm> analytic;

    static constexpr double norm_tolerance = 1e-8;

    void validate() const {
        if (labels.size < 7) throw ValidationError("initial state needs at least 7 labels");
        if (!(labels.step > 0.0)) throw ValidationError("labels must be strictly increasing");
        if (rho0.size() != labels.size || S0.size() != labels.size) {
            throw ValidationError("rho0/S0 length does not match the label grid");
        }
        for (std::size_t i = 0; i < rho0.size(); ++i) {
            if (!(rho0[i] >= 0.0)) {
                throw ValidationError("rho0 negative at label index " + std::to_string(i));
            }
        }
        const double norm = trapezoid(rho0, labels);
        if (std::abs(norm - 1.0) > norm_tolerance) {
            throw ValidationError("rho0 trapezoid norm " + std::to_string(norm) + " differs from 1");
        }
    }

    /// L = (ln rho0)' and L' on the labels; analytic when available,
    /// otherwise 4th-order differences of ln rho0.
    std::pair<std::vector<double>, std::vector<double>> log_density_derivatives(int order = 4) const {
        const std::size_t n = labels.size;
        std::vector<double> L(n), dL(n);
        if (analytic && analytic->log_rho0_d1 && analytic->log_rho0_d2) {
            for (std::size_t i = 0; i < n; ++i) {
                L[i] = analytic->log_rho0_d1(labels[i]);
                dL[i] = analytic->log_rho0_d2(labels[i]);
            }
            return {L, dL};
        }
        std::vector<double> lr(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(rho0[i] > 0.0)) {
                throw ValidationError("rho0 must be positive on the evolved labels (index " +
                                      std::to_string(i) + ")");
            }
            lr[i] = std::log(rho0[i]);
        }
        const Stencil d1(1, order, n, labels.step);
        const Stencil d2(2, order, n, labels.step);
        return {d1(lr), d2(lr)};
    }

    /// dS0/da on the labels.
    std::vector<double> phase_gradient(int order = 4) const {
        const std::size_t n = labels.size;
        std::vector<double> out(n);
        if (analytic && analytic->S0_d1) {
            for (std::size_t i = 0; i < n; ++i) out[i] = analytic->S0_d1(labels[i]);
            return out;
        }
        return Stencil(1, order, n, labels.step)(S0);
    }

};

/// Builds an initial state from closed forms, normalising rho0 numerically
/// by the trapezoid rule when `normalise` is set.
inline InitialState make_state(const UniformGrid& labels, ClosedForm form, bool normalise) {
    InitialState st;
    st.labels = labels;
    st.rho0.resize(labels.size);
    st.S0.resize(labels.size);
    for (std::size_t i = 0; i < labels.size; ++i) {
        st.rho0[i] = form.rho0(labels[i]);
        st.S0[i] = form.S0 ? form.S0(labels[i]) : 0.0;
    }
    if (normalise) {
        const double norm = trapezoid(st.rho0, labels);
        for (double& r : st.rho0) r /= norm;
        auto raw = form.rho0;
        form.rho0 = [raw, norm](double a) { return raw(a) / norm; };
    }
    st.analytic = std::move(form);
    st.validate();
    return st;
}

/// Gaussian of width sigma0 centred at the origin, optionally boosted with
/// S0 = hbar * k * a.
inline InitialState make_gaussian_state(double sigma0, const PhysicsParams& params,
                                        const UniformGrid& labels, double k = 0.0) {
    params.validate();
    if (!(sigma0 > 0.0)) throw ValidationError("sigma0 must be > 0");
    if (labels.front() > -4.0 * sigma0 || labels.back() < 4.0 * sigma0) {
        throw ValidationError("label domain narrower than +-4 sigma0; normalisation unattainable");
    }
    const double s2 = sigma0 * sigma0;
    const double pref = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
    const double hk = params.hbar * k;
    ClosedForm form;
    form.rho0 = [=](double a) { return pref * std::exp(-a * a / (2.0 * s2)); };
    form.log_rho0_d1 = [=](double a) { return -a / s2; };
    form.log_rho0_d2 = [=](double) { return -1.0 / s2; };
    form.S0 = [=](double a) { return hk * a; };
    form.S0_d1 = [=](double) { return hk; };
    form.S0_d2 = [](double) { return 0.0; };
    return make_state(labels, std::move(form), false);
}

/// Nodeless non-Gaussian state ln rho0 = -a^2/(2 sigma0^2) + beta cos(kappa a) + c,
/// normalised numerically; S0 = 0. Used where stencils must not be exact.
inline InitialState make_perturbed_gaussian_state(double sigma0, double beta, double kappa,
                                                  const PhysicsParams& params,
                                                  const UniformGrid& labels) {
    params.validate();
    if (!(sigma0 > 0.0)) throw ValidationError("sigma0 must be > 0");
    const double s2 = sigma0 * sigma0;
    ClosedForm form;
    form.rho0 = [=](double a) { return std::exp(-a * a / (2.0 * s2) + beta * std::cos(kappa * a)); };
    form.log_rho0_d1 = [=](double a) { return -a / s2 - beta * kappa * std::sin(kappa * a); };
    form.log_rho0_d2 = [=](double a) { return -1.0 / s2 - beta * kappa * kappa * std::cos(kappa * a); };
    form.S0 = [](double) { return 0.0; };
    form.S0_d1 = [](double) { return 0.0; };
    form.S0_d2 = [](double) { return 0.0; };
    return make_state(labels, std::move(form), true);
}

/// Lagrangian snapshot: positions, velocities and accumulated action per label.
struct TrajectoryState {
    UniformGrid labels;
    std::vector<double> q;
    std::vector<double> qdot;
    std::vector<double> chi;
    double t = 0.0;

    /// q = a, qdot = v0, chi = 0.
    static TrajectoryState identity(const UniformGrid& labels, std::vector<double> v0) {
        TrajectoryState s;
        s.labels = labels;
        s.q = labels.nodes();
        s.qdot = std::move(v0);
        s.chi.assign(labels.size, 0.0);
        return s;
    }

    /// Smallest gap q_{i+1} - q_i and its index.
    std::pair<double, std::size_t> min_gap() const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t at = 0;
        for (std::size_t i = 0; i + 1 < q.size(); ++i) {
            const double g = q[i + 1] - q[i];
            if (g < best) {
                best = g;
                at = i;
            }
        }
        return {best, at};
    }
};

/// Wave-picture snapshot on a uniform spatial grid.
struct EulerianField {
    UniformGrid x;
    double t = 0.0;
    std::vector<double> rho;
    std::vector<double> S;
    std::vector<double> v;
    std::vector<cplx> psi;
    std::vector<std::uint8_t> mask;  // 1 where the point is covered by the data
    bool has_rho_S = false;
    bool has_v = false;
    bool has_psi = false;

    std::size_t size() const { return x.size; }
};

/// psi = sqrt(rho) exp(i S / hbar).
inline std::vector<cplx> assemble_wavefunction(std::span<const double> rho, std::span<const double> S,
                                               double hbar) {
    if (rho.size() != S.size()) throw ValidationError("rho and S lengths differ");
    if (!(hbar > 0.0)) throw ValidationError("hbar must be > 0");
    std::vector<cplx> psi(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (!(rho[i] >= 0.0)) {
            throw ValidationError("negative density at index " + std::to_string(i));
        }
        psi[i] = std::polar(std::sqrt(rho[i]), S[i] / hbar);
    }
    return psi;
}

struct MadelungFields {
    std::vector<double> rho;
    std::vector<double> S;
    std::vector<std::uint8_t> mask;  // points that were decomposed
};

/// Inverse of assemble_wavefunction. The phase is pinned to the principal
/// branch (-pi hbar, pi hbar] at x_ref and continued outward choosing the
/// nearest branch at each step. Only the contiguous run of `window` that
/// contains x_ref is decomposed; inside it |psi| must exceed
/// 1e-12 * max|psi|.
inline MadelungFields madelung_decompose(std::span<const cplx> psi, std::size_t x_ref, double hbar,
                                         const UniformGrid& grid,
                                         std::span<const std::uint8_t> window = {}) {
    const std::size_t n = psi.size();
    if (x_ref >= n) throw ValidationError("x_ref outside the field");
    if (!window.empty() && window.size() != n) throw ValidationError("window length mismatch");
    auto in_window = [&](std::size_t i) { return window.empty() || window[i] != 0; };
    if (!in_window(x_ref)) throw ValidationError("x_ref outside the decomposition window");

    double peak = 0.0;
    for (const auto& z : psi) peak = std::max(peak, std::abs(z));
    const double floor = 1e-12 * peak;

    MadelungFields out;
    out.rho.assign(n, 0.0);
    out.S.assign(n, 0.0);
    out.mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) out.rho[i] = std::norm(psi[i]);

    auto check = [&](std::size_t i) {
        if (!(std::abs(psi[i]) > floor)) throw NodeEncountered(i, grid[i]);
    };
    check(x_ref);
    double phase = std::arg(psi[x_ref]);
    if (phase <= -std::numbers::pi) phase = std::numbers::pi;
    out.S[x_ref] = hbar * phase;
    out.mask[x_ref] = 1;
    for (std::size_t i = x_ref + 1; i < n && in_window(i); ++i) {
        check(i);
        out.S[i] = out.S[i - 1] + hbar * std::arg(psi[i] / psi[i - 1]);
        out.mask[i] = 1;
    }
    for (std::size_t i = x_ref; i-- > 0 && in_window(i);) {
        check(i);
        out.S[i] = out.S[i + 1] + hbar * std::arg(psi[i] / psi[i + 1]);
        out.mask[i] = 1;
    }
    return out;
}

}  // namespace qflow
