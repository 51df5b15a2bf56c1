#pragma once

// 1D fluid-particle dynamics in label space: the fourth-order equation of
// motion for q(a, t), its Newton-form counterpart, and time integration with
// phase accumulation along each path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"
#include "qflow/model.hpp"

namespace qflow {

enum class Integrator { rk4, velocity_verlet };
enum class AccelerationPath { direct, newton, both_with_check };

struct SolverConfig {
    double dt = 0.0;  // <= 0 selects cfl_coefficient * da^2 * m / hbar
    double cfl_coefficient = 0.1;
    Integrator integrator = Integrator::rk4;
    int stencil_order = 4;
    double t_final = 1.0;
    std::size_t snapshot_stride = 100;
    AccelerationPath acceleration_path = AccelerationPath::direct;
    double energy_abort = 0.10;

    void validate() const {
        if (!(t_final > 0.0)) throw ValidationError("solver.t_final must be > 0");
        if (!(dt >= 0.0) && !(dt < 0.0)) throw ValidationError("solver.dt is not a number");
        if (dt < 0.0) throw ValidationError("solver.dt must be > 0 (or 0/auto)");
        if (!(cfl_coefficient > 0.0)) throw ValidationError("solver.cfl must be > 0");
        if (stencil_order != 2 && stencil_order != 4) throw ValidationError("solver.stencil_order must be 2 or 4");
        if (snapshot_stride < 1) throw ValidationError("solver.snapshot_stride must be >= 1");
    }

    /// Step size actually used: auto or requested, shrunk so that an integer
    /// number of steps lands on t_final.
    std::pair<double, std::size_t> step_plan(double label_spacing, const PhysicsParams& p) const {
        const double target = dt > 0.0 ? dt : cfl_coefficient * label_spacing * label_spacing * p.mass / p.hbar;
        const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t_final / target - 1e-9)));
        return {t_final / static_cast<double>(steps), steps};
    }
};

/// Minimum admissible dq/da before the map is declared degenerate.
inline constexpr double jacobian_floor = 1e-10;

/// v0 = (1/m) dS0/da.
inline std::vector<double> initial_velocity(const InitialState& init, double mass) {
    auto v = init.phase_gradient();
    for (double& x : v) x /= mass;
    return v;
}

struct Acceleration {
    std::vector<double> accel;
    std::vector<double> quantum_potential;  // V_Q at each label
};

/// Label-space differential operators bound to one initial state.
class LabelDynamics {
  public:
    LabelDynamics(const InitialState& init, const PhysicsParams& params, int order = 4)
        : params_(params),
          sbp_(order, init.labels.size, init.labels.step),
          rho0_(init.rho0) {
        params_.validate();
        auto [L, dL] = init.log_density_derivatives(order);
        logd1_ = std::move(L);
        logd2_ = std::move(dL);
        weights_ = trapezoid_weights(init.labels);
    }

    std::size_t size() const { return rho0_.size(); }

    /// J = dq/da, validated against the floor. A swapped pair can leave the
    /// stencil derivative positive, so the ordering is checked as well.
    std::vector<double> jacobian(const std::vector<double>& q, double t) const {
        for (std::size_t i = 0; i + 1 < q.size(); ++i) {
            if (!(q[i + 1] > q[i])) throw TrajectoryCrossing(i, t, "q not strictly increasing");
        }
        auto J = sbp_(q);
        for (std::size_t i = 0; i < J.size(); ++i) {
            if (!(J[i] > jacobian_floor)) throw TrajectoryCrossing(i, t, "dq/da = " + std::to_string(J[i]));
        }
        return J;
    }

    /// Right side of the 1D label-space equation of motion divided by m rho0:
    ///   -(1/m) dV/dq + (hbar^2 / 4 m^2 rho0) d/da[ 2 rho0 J^-5 J'^2 - J^-4 J' rho0'
    ///        - rho0 J^-4 J'' + J^-3 rho0'' - J^-3 rho0'^2 / rho0 ].
    /// The bracket is regrouped as
    ///   -(rho0 J' J^-4)' + rho0 (-2 J'^2 J^-5 + (ln rho0)'' J^-3),
    /// the first part differentiated twice with the summation-by-parts
    /// operator (zero flux at the end labels) so that the fourth-order term
    /// is symmetric in the rho0-weighted norm, the second expanded as
    /// Y' + (ln rho0)' Y. Assembling the whole bracket by the product rule is
    /// unstable for labels where |(ln rho0)'| is large.
    Acceleration direct(const std::vector<double>& q, double t) const {
        const std::size_t n = q.size();
        const auto J = jacobian(q, t);
        const auto J1 = sbp_(J);
        // rho0 G = -(rho0 J' / J^4)' - 2 rho0 J'^2 / J^5 + rho0 L' / J^3
        std::vector<double> flux(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double Ji = 1.0 / J[i];
            flux[i] = rho0_[i] * J1[i] * Ji * Ji * Ji * Ji;
        }
        flux.front() = flux.back() = 0.0;
        auto dflux = sbp_(flux);
        dflux.front() = dflux.back() = 0.0;
        const auto ddflux = sbp_(dflux);
        std::vector<double> Y(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double Ji = 1.0 / J[i];
            const double Ji3 = Ji * Ji * Ji;
            Y[i] = -2.0 * J1[i] * J1[i] * Ji3 * Ji * Ji + logd2_[i] * Ji3;
        }
        const auto dY = sbp_(Y);
        const double c = params_.hbar * params_.hbar / (4.0 * params_.mass * params_.mass);
        Acceleration out;
        out.accel.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double stress = -ddflux[i] / rho0_[i] + dY[i] + logd1_[i] * Y[i];
            out.accel[i] = -params_.dV(q[i]) / params_.mass + c * stress;
        }
        out.quantum_potential = quantum_potential(q, J);
        return out;
    }

    /// Newton form: rho = rho0 / J on the labels, d/dq = J^-1 d/da,
    /// accel = -(1/m) d(V + V_Q)/dq.
    Acceleration newton(const std::vector<double>& q, double t) const {
        const std::size_t n = q.size();
        const auto J = jacobian(q, t);
        Acceleration out;
        out.quantum_potential = quantum_potential(q, J);
        const auto dvq = sbp_(out.quantum_potential);
        out.accel.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.accel[i] = -(params_.dV(q[i]) + dvq[i] / J[i]) / params_.mass;
        }
        return out;
    }

    /// Spatial log-density gradient d(ln rho)/dq at each label.
    std::vector<double> log_density_gradient(const std::vector<double>& J) const {
        const std::size_t n = J.size();
        std::vector<double> lnJ(n);
        for (std::size_t i = 0; i < n; ++i) lnJ[i] = std::log(J[i]);
        const auto dlnJ = sbp_(lnJ);
        std::vector<double> lx(n);
        for (std::size_t i = 0; i < n; ++i) lx[i] = (logd1_[i] - dlnJ[i]) / J[i];
        return lx;
    }

    /// V_Q = -(hbar^2 / 4m) (l_qq + l_q^2 / 2) with l = ln(rho0 / J).
    std::vector<double> quantum_potential(const std::vector<double>&, const std::vector<double>& J) const {
        const std::size_t n = J.size();
        const auto lx = log_density_gradient(J);
        const auto dlx = sbp_(lx);
        std::vector<double> vq(n);
        const double c = params_.hbar * params_.hbar / (4.0 * params_.mass);
        for (std::size_t i = 0; i < n; ++i) {
            const double lxx = dlx[i] / J[i];
            vq[i] = -c * (lxx + 0.5 * lx[i] * lx[i]);
        }
        return vq;
    }

    /// Discrete Hamiltonian sum_i w_i rho0_i [m qdot^2 / 2 + U + V(q)].
    double energy(const TrajectoryState& s) const {
        const auto J = jacobian(s.q, s.t);
        const auto lx = log_density_gradient(J);
        const double cu = params_.hbar * params_.hbar / (8.0 * params_.mass);
        double e = 0.0;
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            const double kin = 0.5 * params_.mass * s.qdot[i] * s.qdot[i];
            const double u = cu * lx[i] * lx[i];
            e += weights_[i] * rho0_[i] * (kin + u + params_.V(s.q[i]));
        }
        return e;
    }

    const PhysicsParams& params() const { return params_; }

  private:
    PhysicsParams params_;
    SbpDerivative sbp_;
    std::vector<double> rho0_;
    std::vector<double> logd1_, logd2_;
    std::vector<double> weights_;
};

inline std::vector<double> acceleration_direct(const TrajectoryState& traj, const InitialState& init,
                                               const PhysicsParams& params, int order = 4) {
    return LabelDynamics(init, params, order).direct(traj.q, traj.t).accel;
}

inline std::vector<double> acceleration_newton(const TrajectoryState& traj, const InitialState& init,
                                               const PhysicsParams& params, int order = 4) {
    return LabelDynamics(init, params, order).newton(traj.q, traj.t).accel;
}

/// max_i |a_i - b_i| / max_i |a_i|, falling back to the absolute difference
/// when a vanishes identically.
inline double relative_disagreement(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(a[i]));
    }
    return scale > 0.0 ? diff / scale : diff;
}

/// Contiguous sub-grid of labels where rho0 >= rel * max rho0.
inline InitialState restrict_to_support(const InitialState& init, double rel = 1e-12) {
    const double peak = *std::max_element(init.rho0.begin(), init.rho0.end());
    std::size_t lo = 0;
    std::size_t hi = init.rho0.size();
    while (lo < hi && init.rho0[lo] < rel * peak) ++lo;
    while (hi > lo && init.rho0[hi - 1] < rel * peak) --hi;
    if (lo == 0 && hi == init.rho0.size()) return init;
    InitialState out;
    out.labels = UniformGrid{init.labels[lo], init.labels.step, hi - lo};
    out.rho0.assign(init.rho0.begin() + static_cast<std::ptrdiff_t>(lo),
                    init.rho0.begin() + static_cast<std::ptrdiff_t>(hi));
    out.S0.assign(init.S0.begin() + static_cast<std::ptrdiff_t>(lo), init.S0.begin() + static_cast<std::ptrdiff_t>(hi));
    out.analytic = init.analytic;
    return out;
}

enum class RunStatus { completed, crossing, unstable };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::crossing: return "crossing";
        case RunStatus::unstable: return "unstable";
    }
    return "unknown";
}

struct LagrangianRun {
    InitialState init;  // the evolved labels (after any tail restriction)
    std::vector<TrajectoryState> snapshots;
    std::vector<double> energy_times;
    std::vector<double> energy;
    double dt = 0.0;
    std::size_t steps = 0;
    double min_jacobian = std::numeric_limits<double>::infinity();
    double max_path_disagreement = 0.0;  // only with both_with_check
    RunStatus status = RunStatus::completed;
    std::string diagnostic;

    bool ok() const { return status == RunStatus::completed; }

    double max_energy_drift() const {
        if (energy.empty()) return 0.0;
        const double e0 = energy.front();
        double worst = 0.0;
        for (double e : energy) worst = std::max(worst, std::abs(e - e0));
        return std::abs(e0) > 0.0 ? worst / std::abs(e0) : worst;
    }
};

using TrajectoryObserver = std::function<void(const TrajectoryState&)>;

/// Integrates the label-space equation of motion from q = a, qdot = v0,
/// chi = 0 to config.t_final. chi follows d chi/dt = m qdot^2 / 2 - V - V_Q
/// as an extra state component. Numerical aborts are reported in the result
/// together with the snapshots gathered so far; `observer` sees every step.
inline LagrangianRun evolve(const InitialState& init_in, const PhysicsParams& params, const SolverConfig& config,
                            const TrajectoryObserver& observer = {}) {
    config.validate();
    params.validate();
    init_in.validate();

    LagrangianRun run;
    run.init = restrict_to_support(init_in);
    const InitialState& init = run.init;
    const LabelDynamics dyn(init, params, config.stencil_order);
    const std::size_t n = init.labels.size;
    const double m = params.mass;

    const auto [dt, steps] = config.step_plan(init.labels.step, params);
    run.dt = dt;

    TrajectoryState s = TrajectoryState::identity(init.labels, initial_velocity(init, m));

    auto accel_of = [&](const std::vector<double>& q, double t) {
        switch (config.acceleration_path) {
            case AccelerationPath::direct: return dyn.direct(q, t);
            case AccelerationPath::newton: return dyn.newton(q, t);
            case AccelerationPath::both_with_check: {
                auto a = dyn.direct(q, t);
                const auto b = dyn.newton(q, t);
                run.max_path_disagreement =
                    std::max(run.max_path_disagreement, relative_disagreement(a.accel, b.accel));
                return a;
            }
        }
        return dyn.direct(q, t);
    };
    auto lagrangian_rate = [&](const std::vector<double>& q, const std::vector<double>& qd,
                               const std::vector<double>& vq, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * m * qd[i] * qd[i] - params.V(q[i]) - vq[i];
    };
    auto track_min_gap = [&](const TrajectoryState& st) {
        const auto [gap, at] = st.min_gap();
        if (!(gap > 0.0)) throw TrajectoryCrossing(at, st.t, "q not strictly increasing");
        run.min_jacobian = std::min(run.min_jacobian, gap / init.labels.step);
    };
    auto record_energy = [&](const TrajectoryState& st) {
        run.energy_times.push_back(st.t);
        run.energy.push_back(dyn.energy(st));
    };

    try {
        track_min_gap(s);
        record_energy(s);
        run.snapshots.push_back(s);
        if (observer) observer(s);

        std::vector<double> kq[4], kv[4], kc[4];
        for (int r = 0; r < 4; ++r) {
            kq[r].resize(n);
            kv[r].resize(n);
            kc[r].resize(n);
        }
        std::vector<double> qs(n), vs(n);
        Acceleration acc = config.integrator == Integrator::velocity_verlet ? accel_of(s.q, s.t) : Acceleration{};

        for (std::size_t step = 1; step <= steps; ++step) {
            const double t0 = s.t;
            if (config.integrator == Integrator::rk4) {
                static constexpr double stage_c[4] = {0.0, 0.5, 0.5, 1.0};
                for (int r = 0; r < 4; ++r) {
                    if (r == 0) {
                        qs = s.q;
                        vs = s.qdot;
                    } else {
                        const double h = stage_c[r] * dt;
                        for (std::size_t i = 0; i < n; ++i) {
                            qs[i] = s.q[i] + h * kq[r - 1][i];
                            vs[i] = s.qdot[i] + h * kv[r - 1][i];
                        }
                    }
                    const auto a = accel_of(qs, t0 + stage_c[r] * dt);
                    kq[r] = vs;
                    kv[r] = a.accel;
                    lagrangian_rate(qs, vs, a.quantum_potential, kc[r]);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    s.q[i] += dt / 6.0 * (kq[0][i] + 2.0 * kq[1][i] + 2.0 * kq[2][i] + kq[3][i]);
                    s.qdot[i] += dt / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
                    s.chi[i] += dt / 6.0 * (kc[0][i] + 2.0 * kc[1][i] + 2.0 * kc[2][i] + kc[3][i]);
                }
            } else {
                lagrangian_rate(s.q, s.qdot, acc.quantum_potential, kc[0]);
                for (std::size_t i = 0; i < n; ++i) s.q[i] += dt * s.qdot[i] + 0.5 * dt * dt * acc.accel[i];
                auto next = accel_of(s.q, t0 + dt);
                for (std::size_t i = 0; i < n; ++i) s.qdot[i] += 0.5 * dt * (acc.accel[i] + next.accel[i]);
                lagrangian_rate(s.q, s.qdot, next.quantum_potential, kc[1]);
                for (std::size_t i = 0; i < n; ++i) s.chi[i] += 0.5 * dt * (kc[0][i] + kc[1][i]);
                acc = std::move(next);
            }
            s.t = step == steps ? config.t_final : t0 + dt;
            run.steps = step;
            track_min_gap(s);
            if (observer) observer(s);

            if (step % config.snapshot_stride == 0 || step == steps) {
                record_energy(s);
                run.snapshots.push_back(s);
                const double drift = run.max_energy_drift();
                if (!(drift <= config.energy_abort)) throw InstabilityError(s.t, drift);
            }
        }
    } catch (const TrajectoryCrossing& e) {
        run.status = RunStatus::crossing;
        run.diagnostic = e.what();
    } catch (const InstabilityError& e) {
        run.status = RunStatus::unstable;
        run.diagnostic = e.what();
    }
    return run;
}

}  // namespace qflow
