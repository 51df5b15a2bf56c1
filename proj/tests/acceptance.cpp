// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "qflow/qflow.hpp"

using namespace qflow;

namespace {

const PhysicsParams unit{};
int failures = 0;

struct Measure {
    std::string what;
    double value;
    double bound;
    bool lower = false;  // value must be >= bound
    bool ok() const { return lower ? value >= bound : value <= bound; }
};

void report(int id, const std::string& title, const std::vector<Measure>& ms) {
    bool all = true;
    for (const auto& m : ms) all = all && m.ok();
    if (!all) ++failures;
    std::printf("%s criterion %d: %s\n", all ? "PASS" : "FAIL", id, title.c_str());
    for (const auto& m : ms) {
        std::printf("    %-44s %.3e %s %.3g%s\n", m.what.c_str(), m.value, m.lower ? ">=" : "<=", m.bound,
                    m.ok() ? "" : "  <-- fails");
    }
    std::fflush(stdout);
}

// |q - exact| / (1 + |a|), with the boosted drift hbar k t / m.
double trajectory_error(const TrajectoryState& s, double k = 0.0) {
    double w = 0.0;
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        const double a = s.labels[i];
        const double exact = bench::gaussian_trajectory(a, s.t, 1.0, unit).q + unit.hbar * k / unit.mass * s.t;
        w = std::max(w, std::abs(s.q[i] - exact) / (1.0 + std::abs(a)));
    }
    return w;
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

const UniformGrid xg = UniformGrid::span(-12.0, 12.0, 601);

struct GaussianRun {
    LagrangianRun run;
    Reconstruction rec;
    double worst_trajectory = 0.0;
    double seconds = 0.0;
};

GaussianRun gaussian_run(double k, double t_final) {
    GaussianRun g;
    const auto init = make_gaussian_state(1.0, unit, UniformGrid::span(-8.0, 8.0, 401), k);
    SolverConfig c;
    c.t_final = t_final;
    const auto t0 = std::chrono::steady_clock::now();
    g.run = evolve(init, unit, c, [&](const TrajectoryState& s) {
        g.worst_trajectory = std::max(g.worst_trajectory, trajectory_error(s, k));
    });
    g.rec = reconstruct_wavefunction(g.run.snapshots, g.run.init, unit, xg);
    g.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return g;
}

std::vector<cplx> closed_form_psi(const UniformGrid& x, double t, double k = 0.0) {
    std::vector<cplx> psi(x.size);
    for (std::size_t i = 0; i < x.size; ++i) psi[i] = bench::gaussian_psi(x[i], t, 1.0, unit, k);
    return psi;
}

std::vector<std::uint8_t> window(const EulerianField& f, double half) {
    std::vector<std::uint8_t> w(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) w[i] = f.mask[i] && std::abs(f.x[i]) <= half;
    return w;
}

// Perturbed-Gaussian final positions at a fixed step, for self-convergence.
TrajectoryState perturbed_final(std::size_t n, double dt) {
    const auto init = make_perturbed_gaussian_state(1.0, 0.2, 2.0, unit, UniformGrid::span(-8.0, 8.0, n));
    SolverConfig c;
    c.t_final = 0.5;
    c.dt = dt;
    c.snapshot_stride = 1000000;
    const auto run = evolve(init, unit, c);
    if (!run.ok()) throw InstabilityError(run.snapshots.back().t, 0.0);
    return run.snapshots.back();
}

// rho0-weighted L2 distance between a coarse run and a finer one at the
// coarse labels (every `stride`-th fine label), over |a| <= 7.
double weighted_gap(const TrajectoryState& coarse, const TrajectoryState& fine, std::size_t stride) {
    const std::size_t offset = (fine.labels.size - (coarse.labels.size - 1) * stride) / 2;
    double s = 0.0;
    for (std::size_t i = 0; i < coarse.q.size(); ++i) {
        const double a = coarse.labels[i];
        if (std::abs(a) > 7.0) continue;
        const std::size_t j = offset + i * stride;
        const double w = std::exp(-0.5 * a * a);
        const double d = coarse.q[i] - fine.q[j];
        s += w * d * d * coarse.labels.step;
    }
    return std::sqrt(s);
}

}  // namespace

int main() {
    const auto rest = gaussian_run(0.0, 2.0);
    const auto boosted = gaussian_run(1.0, 1.0);

    report(1, "free Gaussian trajectories, N = 401, t in [0, 2]",
           {{"max |q - a sqrt(1 + t^2/4)| / (1 + |a|)", rest.worst_trajectory, 1e-3},
            {"evolve + reconstruct wall time [s]", rest.seconds, 60.0}});

    {
        const auto& f = rest.rec.field;
        const auto exact = closed_form_psi(xg, 2.0);
        const auto e = bench::error_norms(f.psi, exact, window(f, 6.0), xg.step);
        const double norm = trapezoid_masked(f.rho, xg, f.mask);
        report(2, "wavefunction reconstruction at t = 2",
               {{"phase-reduced L2 on |x| <= 6", e.phase_reduced_l2, 1e-3},
                {"|norm - 1|", std::abs(norm - 1.0), 1e-4}});
    }

    {
        const UniformGrid xr{-12.0, 24.04 / 601.0, 601};  // nodes coincide with xg
        ReferenceConfig rc;
        rc.t_final = 1.0;
        const auto ref = split_step_evolve(closed_form_psi(xr, 0.0, 1.0), xr, unit, rc);
        const auto& f = boosted.rec.field;
        std::vector<cplx> rpsi(xg.size);
        for (std::size_t i = 0; i < xg.size; ++i) rpsi[i] = ref.snapshots.back().psi[i];
        const auto e = bench::error_norms(f.psi, rpsi, f.mask, xg.step);
        report(3, "boosted Gaussian (k = 1), Lagrangian vs split-step at t = 1",
               {{"phase-reduced L2", e.phase_reduced_l2, 1e-2}});
    }

    {
        const auto rep = run_identity_suite();
        std::vector<Measure> ms;
        for (const auto& c : rep.checks) ms.push_back({c.name, c.value, c.tolerance, c.lower_bound});
        ms.push_back({"cofactor draws passed", static_cast<double>(rep.cofactor_passed), 100.0, true});
        report(4, "deformation-gradient identities", ms);
    }

    {
        const auto& h = rest.run.snapshots;
        const auto later = rest.rec.field;
        const auto earlier =
            reconstruct_wavefunction(std::span(h.data(), h.size() - 1), rest.run.init, unit, xg).field;
        const auto q = qhj_residual(earlier, later, unit);
        const auto fl = continuity_euler_residuals(earlier, later, unit);
        report(5, "dynamics residuals on the reconstructed run, |x| <= 6",
               {{"quantum Hamilton-Jacobi max", q.max_abs(-6.0, 6.0), 1e-3},
                {"continuity max", fl.continuity.max_abs(-6.0, 6.0), 1e-2},
                {"Euler max", fl.euler.max_abs(-6.0, 6.0), 1e-2}});
    }

    {
        const UniformGrid xr{-16.0, 32.0 / 1024.0, 1024};
        ReferenceConfig rc;
        rc.t_final = 2.0;
        const auto ref = split_step_evolve(closed_form_psi(xr, 0.0), xr, unit, rc);
        report(6, "conservation",
               {{"Lagrangian energy relative drift", rest.run.max_energy_drift(), 1e-4},
                {"split-step norm drift", ref.max_norm_drift(), 1e-10}});
    }

    {
        const auto init = restrict_to_support(make_gaussian_state(1.0, unit, UniformGrid::span(-8.0, 8.0, 401)));
        double worst = 0.0;
        for (double t : {0.0, 0.5, 1.0, 1.5, 2.0}) {
            auto s = TrajectoryState::identity(init.labels, std::vector<double>(init.labels.size, 0.0));
            s.t = t;
            for (std::size_t i = 0; i < s.q.size(); ++i) s.q[i] = bench::gaussian_trajectory(s.labels[i], t, 1.0, unit).q;
            worst = std::max(worst, relative_disagreement(acceleration_direct(s, init, unit),
                                                           acceleration_newton(s, init, unit)));
        }
        report(7, "direct vs Newton acceleration, N = 401",
               {{"max relative disagreement", worst, 1e-4}});
    }

    {
        const auto init = make_gaussian_state(1.0, unit, UniformGrid::span(-8.0, 8.0, 161));
        QtmConfig c;
        c.t_final = 2.0;
        const auto run = qtm_evolve(init, unit, c);
        double reach = INFINITY;
        double amp = INFINITY;
        if (run.ok()) {
            const auto& s = run.snapshots.back();
            reach = std::abs(s.x[run.init.labels.nearest(1.0)] - std::sqrt(2.0));
            const auto psi = qtm_wavefunction(s, run.init, unit.hbar);
            amp = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (std::abs(s.x[i]) > 6.0) continue;
                const auto rho = eulerian_density(rest.run.snapshots.back(), rest.run.init, UniformGrid{s.x[i], 1.0, 1});
                amp = std::max(amp, std::abs(std::abs(psi[i]) - std::sqrt(rho.rho[0])));
            }
        }
        report(8, "quantum trajectory method, 161 particles",
               {{"|x(2) - sqrt 2| for the particle from x = 1", reach, 5e-3},
                {"max ||psi_qtm| - |psi_lagrangian|| on |x| <= 6", amp, 5e-2}});
    }

    {
        const auto m = ensemble_moments(rest.run.snapshots.back(), rest.run.init, rest.rec.field, unit);
        const auto b = ensemble_moments(boosted.run.snapshots.back(), boosted.run.init, boosted.rec.field, unit);
        report(9, "ensemble moments",
               {{"<x> gap, rest", m.position_gap(), 1e-6},
                {"<p> gap, rest", m.momentum_gap(), 1e-6},
                {"<x> gap, boosted", b.position_gap(), 1e-6},
                {"<p> gap, boosted", b.momentum_gap(), 1e-6},
                {"|<p>_lagrangian - hbar k|, boosted", std::abs(b.lagrangian.momentum - 1.0), 1e-6},
                {"|<p>_eulerian - hbar k|, boosted", std::abs(b.eulerian.momentum - 1.0), 1e-6}});
    }

    {
        // Spatial: perturbed Gaussian at a step small enough that the time
        // error is negligible, labels 101 / 201 / 401.
        const double dt = 1e-4;
        const auto q1 = perturbed_final(101, dt);
        const auto q2 = perturbed_final(201, dt);
        const auto q3 = perturbed_final(401, dt);
        const double g12 = weighted_gap(q1, q2, 2);
        const double g23 = weighted_gap(q2, q3, 2);

        // Temporal: Gaussian against the closed form at dt, dt/2, dt/4.
        std::vector<double> et;
        for (double h : {0.1, 0.05, 0.025}) {
            const auto init = make_gaussian_state(1.0, unit, UniformGrid::span(-8.0, 8.0, 81));
            SolverConfig c;
            c.t_final = 2.0;
            c.dt = h;
            const auto run = evolve(init, unit, c);
            et.push_back(run.ok() ? trajectory_error(run.snapshots.back()) : INFINITY);
        }
        report(10, "convergence orders",
               {{"spatial order (label spacing 0.16/0.08/0.04)", order(g12, g23), 3.5, true},
                {"temporal order (dt 0.1/0.05/0.025)", order(et[1], et[2]), 3.5, true}});
    }

    return failures == 0 ? 0 : 1;
}
