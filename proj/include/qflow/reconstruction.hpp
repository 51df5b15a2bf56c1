#pragma once

// Eulerian fields and the wavefunction rebuilt from trajectory snapshots,
// plus the residual diagnostics that check them against the field equations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"
#include "qflow/interp.hpp"
#include "qflow/model.hpp"

namespace qflow {

/// Label coordinate a(x) solving x = q(a, t), with the points it covers.
struct InverseMap {
    UniformGrid x;
    std::vector<double> a;
    std::vector<std::uint8_t> mask;
};

namespace detail {

inline void require_monotone(const TrajectoryState& traj) {
    if (traj.q.size() != traj.labels.size) throw ValidationError("trajectory length does not match its labels");
    const auto [gap, at] = traj.min_gap();
    if (!(gap > 0.0)) throw TrajectoryCrossing(at, traj.t, "q not strictly increasing");
}

inline CubicHermite label_interpolant(const UniformGrid& labels, const std::vector<double>& values,
                                      std::vector<double> slopes) {
    return CubicHermite(labels.nodes(), values, std::move(slopes));
}

inline CubicHermite label_interpolant(const UniformGrid& labels, const std::vector<double>& values) {
    return label_interpolant(labels, values, Stencil(1, 4, labels.size, labels.step)(values));
}

}  // namespace detail

/// Inverse of the label map by monotone cubic Hermite interpolation of
/// a(q) with nodal slopes 1/J. Points outside [q_0, q_{N-1}] are masked.
inline InverseMap invert_map(const TrajectoryState& traj, const UniformGrid& x_grid) {
    detail::require_monotone(traj);
    const auto& lab = traj.labels;
    const auto J = Stencil(1, 4, lab.size, lab.step)(traj.q);
    std::vector<double> slope(J.size());
    for (std::size_t i = 0; i < J.size(); ++i) slope[i] = J[i] > 0.0 ? 1.0 / J[i] : 0.0;
    const CubicHermite inverse(traj.q, lab.nodes(), std::move(slope), true);

    InverseMap out;
    out.x = x_grid;
    out.a.assign(x_grid.size, std::numeric_limits<double>::quiet_NaN());
    out.mask.assign(x_grid.size, 0);
    for (std::size_t i = 0; i < x_grid.size; ++i) {
        const double x = x_grid[i];
        if (!inverse.contains(x)) continue;
        out.a[i] = std::clamp(inverse(x), lab.front(), lab.back());
        out.mask[i] = 1;
    }
    return out;
}

/// Label-space data of one snapshot as cubic Hermite interpolants in a.
class LabelSampler {
  public:
    LabelSampler(const TrajectoryState& traj, const InitialState& init) : init_(&init) {
        detail::require_monotone(traj);
        if (!traj.labels.same_as(init.labels)) {
            throw ValidationError("trajectory labels differ from the initial-state labels");
        }
        const auto& lab = traj.labels;
        const Stencil d1(1, 4, lab.size, lab.step);
        const Stencil d2(2, 4, lab.size, lab.step);
        J_ = detail::label_interpolant(lab, d1(traj.q), d2(traj.q));
        qdot_ = detail::label_interpolant(lab, traj.qdot);
        std::vector<double> phase(lab.size);
        for (std::size_t i = 0; i < lab.size; ++i) phase[i] = init.S0[i] + traj.chi[i];
        auto dphase = d1(traj.chi);
        const auto dS0 = init.phase_gradient();
        for (std::size_t i = 0; i < lab.size; ++i) dphase[i] += dS0[i];
        phase_ = detail::label_interpolant(lab, phase, std::move(dphase));
        if (!(init.analytic && init.analytic->rho0)) {
            std::vector<double> lr(lab.size);
            for (std::size_t i = 0; i < lab.size; ++i) {
                if (!(init.rho0[i] > 0.0)) throw ValidationError("rho0 must be positive on the evolved labels");
                lr[i] = std::log(init.rho0[i]);
            }
            log_rho0_ = detail::label_interpolant(lab, lr, init.log_density_derivatives().first);
        }
    }

    double jacobian(double a) const { return J_(a); }
    double velocity(double a) const { return qdot_(a); }
    /// d qdot / da
    double velocity_gradient(double a) const { return qdot_.derivative(a); }
    /// S0(a) + chi(a)
    double phase(double a) const { return phase_(a); }

    double rho0(double a) const {
        if (log_rho0_) return std::exp((*log_rho0_)(a));
        return init_->analytic->rho0(a);
    }

  private:
    const InitialState* init_;
    CubicHermite J_, qdot_, phase_;
    std::optional<CubicHermite> log_rho0_;
};

/// rho(x) = rho0(a) / J(a) at a = a(x).
inline EulerianField eulerian_density(const TrajectoryState& traj, const InitialState& init,
                                      const UniformGrid& x_grid) {
    const auto inv = invert_map(traj, x_grid);
    const LabelSampler at(traj, init);
    EulerianField f;
    f.x = x_grid;
    f.t = traj.t;
    f.mask = inv.mask;
    f.rho.assign(x_grid.size, 0.0);
    for (std::size_t i = 0; i < x_grid.size; ++i) {
        if (!inv.mask[i]) continue;
        f.rho[i] = at.rho0(inv.a[i]) / at.jacobian(inv.a[i]);
    }
    return f;
}

/// v(x) = qdot(a(x)).
inline EulerianField eulerian_velocity(const TrajectoryState& traj, const UniformGrid& x_grid) {
    const auto inv = invert_map(traj, x_grid);
    const auto qdot = detail::label_interpolant(traj.labels, traj.qdot);
    EulerianField f;
    f.x = x_grid;
    f.t = traj.t;
    f.mask = inv.mask;
    f.v.assign(x_grid.size, 0.0);
    for (std::size_t i = 0; i < x_grid.size; ++i) {
        if (inv.mask[i]) f.v[i] = qdot(inv.a[i]);
    }
    f.has_v = true;
    return f;
}

/// Agreement between the phase carried along paths and the phase rebuilt
/// from a spatial quadrature of m v plus a time function at the centre.
struct PhaseCheck {
    double max_deviation = 0.0;  // max |S_path - S_quad - c| with the best constant c
    double constant = 0.0;
    double tolerance = 1e-3;
    bool consistent() const { return max_deviation <= tolerance; }
};

struct Reconstruction {
    EulerianField field;
    PhaseCheck phase_check;
    double min_jacobian = 0.0;
};

/// V_Q = -(hbar^2/4m) (l'' + l'^2/2) with l = ln rho, from five samples of
/// rho centred on a point with spacing h.
inline double quantum_potential_5pt(const double (&rho)[5], double h, const PhysicsParams& p) {
    double l[5];
    for (int k = 0; k < 5; ++k) l[k] = std::log(rho[k]);
    const double l1 = (l[0] - 8.0 * l[1] + 8.0 * l[3] - l[4]) / (12.0 * h);
    const double l2 = (-l[0] + 16.0 * l[1] - 30.0 * l[2] + 16.0 * l[3] - l[4]) / (12.0 * h * h);
    return -(p.hbar * p.hbar / (4.0 * p.mass)) * (l2 + 0.5 * l1 * l1);
}

/// Full field at the last snapshot of `history`: rho by push-forward, S as
/// S0 + chi carried along paths, v, and psi. The spatial route
///   S(x) = S(x_c, t) + int_{x_c}^x m v dx,
///   S(x_c, t) = S(x_c, t_0) - int (m v^2/2 + V + V_Q)(x_c, tau) d tau
/// is evaluated over the snapshots for the consistency report.
inline Reconstruction reconstruct_wavefunction(std::span<const TrajectoryState> history, const InitialState& init,
                                               const PhysicsParams& params, const UniformGrid& x_grid) {
    if (history.empty()) throw ValidationError("reconstruction needs at least one snapshot");
    params.validate();
    const auto& last = history.back();
    const std::size_t n = x_grid.size;
    const double m = params.mass;

    Reconstruction out;
    auto& f = out.field;
    const auto inv = invert_map(last, x_grid);
    const LabelSampler at(last, init);
    f.x = x_grid;
    f.t = last.t;
    f.mask = inv.mask;
    f.rho.assign(n, 0.0);
    f.S.assign(n, 0.0);
    f.v.assign(n, 0.0);
    std::vector<double> dv(n, 0.0);
    double min_j = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (!inv.mask[i]) continue;
        const double a = inv.a[i];
        const double J = at.jacobian(a);
        min_j = std::min(min_j, J);
        f.rho[i] = at.rho0(a) / J;
        f.S[i] = at.phase(a);
        f.v[i] = at.velocity(a);
        dv[i] = at.velocity_gradient(a) / J;
    }
    f.psi = assemble_wavefunction(f.rho, f.S, params.hbar);
    f.has_rho_S = f.has_v = f.has_psi = true;
    out.min_jacobian = min_j;

    // Time function at the centre of the grid.
    const std::size_t c = n / 2;
    if (!inv.mask[c]) throw ValidationError("grid centre lies outside the trajectory support");
    const double xc = x_grid[c];
    const double h = x_grid.step;
    auto centre_rate = [&](const TrajectoryState& s) {
        const auto invc = invert_map(s, UniformGrid{xc - 2.0 * h, h, 5});
        for (auto k : invc.mask) {
            if (!k) throw ValidationError("grid centre too close to the trajectory support edge");
        }
        const LabelSampler ls(s, init);
        double rho[5];
        for (int k = 0; k < 5; ++k) rho[k] = ls.rho0(invc.a[k]) / ls.jacobian(invc.a[k]);
        const double v = ls.velocity(invc.a[2]);
        return -(0.5 * m * v * v + params.V(xc) + quantum_potential_5pt(rho, h, params));
    };
    double Sc = [&] {
        const auto invc = invert_map(history.front(), UniformGrid{xc, h, 1});
        if (!invc.mask[0]) throw ValidationError("grid centre outside the first snapshot's support");
        return LabelSampler(history.front(), init).phase(invc.a[0]);
    }();
    double prev_rate = centre_rate(history.front());
    for (std::size_t k = 1; k < history.size(); ++k) {
        const double rate = centre_rate(history[k]);
        Sc += 0.5 * (history[k].t - history[k - 1].t) * (prev_rate + rate);
        prev_rate = rate;
    }

    // Cumulative trapezoid of m v outward from the centre with the
    // endpoint-derivative correction, over the covered run containing c.
    std::vector<double> Sq(n, 0.0);
    std::vector<std::uint8_t> done(n, 0);
    Sq[c] = Sc;
    done[c] = 1;
    for (std::size_t i = c + 1; i < n && inv.mask[i]; ++i) {
        Sq[i] = Sq[i - 1] + m * (0.5 * h * (f.v[i - 1] + f.v[i]) - h * h / 12.0 * (dv[i] - dv[i - 1]));
        done[i] = 1;
    }
    for (std::size_t i = c; i-- > 0 && inv.mask[i];) {
        Sq[i] = Sq[i + 1] - m * (0.5 * h * (f.v[i] + f.v[i + 1]) - h * h / 12.0 * (dv[i + 1] - dv[i]));
        done[i] = 1;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        if (!done[i]) continue;
        const double d = f.S[i] - Sq[i];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    out.phase_check.constant = 0.5 * (hi + lo);
    out.phase_check.max_deviation = 0.5 * (hi - lo);
    return out;
}

/// Pointwise residual on a spatial grid; mask marks where it was evaluated.
struct ResidualField {
    UniformGrid x;
    double t = 0.0;  // time level the residual refers to
    std::vector<double> value;
    std::vector<std::uint8_t> mask;

    /// max |r| over masked points with lo <= x <= hi (0 when none).
    double max_abs(double lo = -std::numeric_limits<double>::infinity(),
                   double hi = std::numeric_limits<double>::infinity()) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (mask[i] && x[i] >= lo && x[i] <= hi) worst = std::max(worst, std::abs(value[i]));
        }
        return worst;
    }
};

namespace detail {

inline void require_pair(const EulerianField& a, const EulerianField& b) {
    if (!a.x.same_as(b.x)) throw ValidationError("residual fields live on different grids");
    if (!(b.t > a.t)) throw ValidationError("residuals need two snapshots with increasing time");
}

/// Points whose +-3 neighbourhood lies inside the grid and both masks.
inline std::vector<std::uint8_t> interior_mask(const EulerianField& a, const EulerianField& b) {
    const std::size_t n = a.x.size;
    std::vector<std::uint8_t> ok(n, 0);
    const std::size_t w = 3;
    for (std::size_t i = w; i + w < n; ++i) {
        bool good = true;
        for (std::size_t j = i - w; j <= i + w && good; ++j) good = a.mask[j] && b.mask[j];
        ok[i] = good;
    }
    return ok;
}

inline std::vector<double> safe_log(const std::vector<double>& rho, const std::vector<std::uint8_t>& mask) {
    std::vector<double> l(rho.size(), 0.0);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (mask[i] && rho[i] > 0.0) l[i] = std::log(rho[i]);
    }
    return l;
}

inline std::vector<double> quantum_potential_on_grid(const EulerianField& f, const PhysicsParams& p) {
    const auto l = safe_log(f.rho, f.mask);
    const Stencil d1(1, 4, f.x.size, f.x.step);
    const Stencil d2(2, 4, f.x.size, f.x.step);
    const auto l1 = d1(l);
    const auto l2 = d2(l);
    std::vector<double> vq(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
        vq[i] = -(p.hbar * p.hbar / (4.0 * p.mass)) * (l2[i] + 0.5 * l1[i] * l1[i]);
    }
    return vq;
}

}  // namespace detail

/// r = dS/dt + (dS/dx)^2 / 2m + V + V_Q, centred between two snapshots:
/// the time derivative is the difference quotient, the other terms the mean
/// of their values at both ends.
inline ResidualField qhj_residual(const EulerianField& earlier, const EulerianField& later,
                                  const PhysicsParams& p) {
    detail::require_pair(earlier, later);
    if (!earlier.has_rho_S || !later.has_rho_S) throw ValidationError("qhj residual needs rho and S");
    const std::size_t n = earlier.x.size;
    const double dt = later.t - earlier.t;
    const Stencil d1(1, 4, n, earlier.x.step);
    ResidualField r;
    r.x = earlier.x;
    r.t = 0.5 * (earlier.t + later.t);
    r.mask = detail::interior_mask(earlier, later);
    r.value.assign(n, 0.0);
    const auto Sx0 = d1(earlier.S);
    const auto Sx1 = d1(later.S);
    const auto vq0 = detail::quantum_potential_on_grid(earlier, p);
    const auto vq1 = detail::quantum_potential_on_grid(later, p);
    for (std::size_t i = 0; i < n; ++i) {
        if (!r.mask[i]) continue;
        const double V = p.V(r.x[i]);
        const double h0 = Sx0[i] * Sx0[i] / (2.0 * p.mass) + V + vq0[i];
        const double h1 = Sx1[i] * Sx1[i] / (2.0 * p.mass) + V + vq1[i];
        r.value[i] = (later.S[i] - earlier.S[i]) / dt + 0.5 * (h0 + h1);
    }
    return r;
}

struct FlowResiduals {
    ResidualField continuity;  // drho/dt + d(rho v)/dx
    ResidualField euler;       // dv/dt + v dv/dx + (1/m) d(V + V_Q)/dx
};

inline FlowResiduals continuity_euler_residuals(const EulerianField& earlier, const EulerianField& later,
                                                const PhysicsParams& p) {
    detail::require_pair(earlier, later);
    if (!earlier.has_rho_S || !later.has_rho_S || !earlier.has_v || !later.has_v) {
        throw ValidationError("flow residuals need rho and v");
    }
    const std::size_t n = earlier.x.size;
    const double dt = later.t - earlier.t;
    const Stencil d1(1, 4, n, earlier.x.step);
    FlowResiduals out;
    out.continuity.x = out.euler.x = earlier.x;
    out.continuity.t = out.euler.t = 0.5 * (earlier.t + later.t);
    out.continuity.mask = out.euler.mask = detail::interior_mask(earlier, later);
    out.continuity.value.assign(n, 0.0);
    out.euler.value.assign(n, 0.0);

    auto spatial = [&](const EulerianField& f, std::vector<double>& flux_x, std::vector<double>& euler_x) {
        std::vector<double> flux(n), pot(n);
        const auto vq = detail::quantum_potential_on_grid(f, p);
        for (std::size_t i = 0; i < n; ++i) {
            flux[i] = f.rho[i] * f.v[i];
            pot[i] = p.V(f.x[i]) + vq[i];
        }
        flux_x = d1(flux);
        const auto vx = d1(f.v);
        const auto px = d1(pot);
        euler_x.resize(n);
        for (std::size_t i = 0; i < n; ++i) euler_x[i] = f.v[i] * vx[i] + px[i] / p.mass;
    };
    std::vector<double> fx0, ex0, fx1, ex1;
    spatial(earlier, fx0, ex0);
    spatial(later, fx1, ex1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.continuity.mask[i]) continue;
        out.continuity.value[i] = (later.rho[i] - earlier.rho[i]) / dt + 0.5 * (fx0[i] + fx1[i]);
        out.euler.value[i] = (later.v[i] - earlier.v[i]) / dt + 0.5 * (ex0[i] + ex1[i]);
    }
    return out;
}

/// Integrates dx/dt = v(x, t) from x0 = a through a sequence of velocity
/// fields (linear in time between them, cubic Hermite in space) and returns
/// the largest distance to q(a, t) over the matching trajectory snapshots.
/// Snapshot times must coincide with field times.
inline double advect_labels_check(std::span<const EulerianField> fields, std::span<const TrajectoryState> history,
                                  std::span<const double> starts, int substeps = 4) {
    if (fields.size() < 2) throw ValidationError("label advection needs at least two velocity fields");
    for (const auto& f : fields) {
        if (!f.has_v) throw ValidationError("label advection needs velocity fields");
    }
    std::vector<CubicHermite> vel;
    vel.reserve(fields.size());
    for (const auto& f : fields) {
        // Covered run around the centre.
        const std::size_t c = f.x.size / 2;
        if (!f.mask[c]) throw ValidationError("velocity field does not cover the grid centre");
        std::size_t lo = c;
        while (lo > 0 && f.mask[lo - 1]) --lo;
        std::size_t hi = c + 1;
        while (hi < f.x.size && f.mask[hi]) ++hi;
        std::vector<double> xs, vs;
        for (std::size_t i = lo; i < hi; ++i) {
            xs.push_back(f.x[i]);
            vs.push_back(f.v[i]);
        }
        if (xs.size() < 7) throw ValidationError("velocity field covers too few points");
        auto slope = Stencil(1, 4, xs.size(), f.x.step)(vs);
        vel.emplace_back(std::move(xs), std::move(vs), std::move(slope));
    }
    auto v_at = [&](std::size_t k, double x, double s) {
        return (1.0 - s) * vel[k](x) + s * vel[k + 1](x);
    };

    double worst = 0.0;
    for (double x0 : starts) {
        double x = x0;
        std::size_t next = 0;
        for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
            const double t0 = fields[k].t;
            const double t1 = fields[k + 1].t;
            const double h = (t1 - t0) / substeps;
            for (int j = 0; j < substeps; ++j) {
                const double s0 = static_cast<double>(j) / substeps;
                const double sm = (j + 0.5) / substeps;
                const double s1 = (j + 1.0) / substeps;
                const double k1 = v_at(k, x, s0);
                const double k2 = v_at(k, x + 0.5 * h * k1, sm);
                const double k3 = v_at(k, x + 0.5 * h * k2, sm);
                const double k4 = v_at(k, x + h * k3, s1);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            while (next < history.size() && history[next].t < t1 - 1e-12) ++next;
            if (next < history.size() && std::abs(history[next].t - t1) <= 1e-9) {
                const auto& s = history[next];
                const auto q = detail::label_interpolant(s.labels, s.q);
                if (x0 < s.labels.front() || x0 > s.labels.back()) throw ValidationError("start point outside the label range");
                worst = std::max(worst, std::abs(q(x0) - x));
            }
        }
    }
    return worst;
}

struct Moments {
    double position = 0.0;
    double momentum = 0.0;
};

/// <x> = sum w rho0 q, <p> = sum w rho0 m qdot over the labels.
inline Moments moments_lagrangian(const TrajectoryState& traj, const InitialState& init, const PhysicsParams& p) {
    if (!traj.labels.same_as(init.labels)) throw ValidationError("trajectory labels differ from the initial state");
    const auto w = trapezoid_weights(init.labels);
    Moments m;
    for (std::size_t i = 0; i < w.size(); ++i) {
        m.position += w[i] * init.rho0[i] * traj.q[i];
        m.momentum += w[i] * init.rho0[i] * p.mass * traj.qdot[i];
    }
    return m;
}

/// <x> = int x rho, <p> = int rho dS/dx over the covered points; from psi
/// as hbar Im int conj(psi) psi' when the field carries no (rho, S).
inline Moments moments_eulerian(const EulerianField& f, const PhysicsParams& p) {
    const std::size_t n = f.x.size;
    Moments m;
    std::vector<double> xr(n), pr(n);
    const Stencil d1(1, 4, n, f.x.step);
    if (f.has_rho_S) {
        std::vector<double> Sx;
        if (f.has_v) {
            Sx.resize(n);
            for (std::size_t i = 0; i < n; ++i) Sx[i] = p.mass * f.v[i];
        } else {
            Sx = d1(f.S);
        }
        for (std::size_t i = 0; i < n; ++i) {
            xr[i] = f.x[i] * f.rho[i];
            pr[i] = f.rho[i] * Sx[i];
        }
    } else if (f.has_psi) {
        std::vector<double> re(n), im(n);
        for (std::size_t i = 0; i < n; ++i) {
            re[i] = f.psi[i].real();
            im[i] = f.psi[i].imag();
        }
        const auto dre = d1(re);
        const auto dim = d1(im);
        for (std::size_t i = 0; i < n; ++i) {
            xr[i] = f.x[i] * std::norm(f.psi[i]);
            pr[i] = p.hbar * (re[i] * dim[i] - im[i] * dre[i]);
        }
    } else {
        throw ValidationError("moments need rho and S or psi");
    }
    std::vector<std::uint8_t> mask = f.mask;
    if (mask.empty()) mask.assign(n, 1);
    m.position = trapezoid_masked(xr, f.x, mask);
    m.momentum = trapezoid_masked(pr, f.x, mask);
    return m;
}

struct MomentPair {
    Moments lagrangian;
    Moments eulerian;
    double position_gap() const { return std::abs(lagrangian.position - eulerian.position); }
    double momentum_gap() const { return std::abs(lagrangian.momentum - eulerian.momentum); }
};

inline MomentPair ensemble_moments(const TrajectoryState& traj, const InitialState& init, const EulerianField& f,
                                   const PhysicsParams& p) {
    return {moments_lagrangian(traj, init, p), moments_eulerian(f, p)};
}

}  // namespace qflow
