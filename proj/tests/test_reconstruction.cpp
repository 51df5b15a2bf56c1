#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "qflow/benchmarks.hpp"
#include "qflow/lagrangian.hpp"
#include "qflow/reconstruction.hpp"

using namespace qflow;

namespace {

const PhysicsParams unit{};

const LagrangianRun& gaussian_run(double k = 0.0) {
    static std::map<double, LagrangianRun> cache;
    auto it = cache.find(k);
    if (it == cache.end()) {
        const auto init = make_gaussian_state(1.0, unit, UniformGrid::span(-8.0, 8.0, 401), k);
        SolverConfig c;
        c.t_final = k == 0.0 ? 2.0 : 1.0;
        it = cache.emplace(k, evolve(init, unit, c)).first;
    }
    return it->second;
}

const UniformGrid xg = UniformGrid::span(-12.0, 12.0, 601);

EulerianField closed_form_field(const UniformGrid& x, double t) {
    EulerianField f;
    f.x = x;
    f.t = t;
    f.mask.assign(x.size, 1);
    for (std::size_t i = 0; i < x.size; ++i) {
        const auto g = bench::gaussian_wavefunction(x[i], t, 1.0, unit);
        f.rho.push_back(g.rho);
        f.S.push_back(g.S);
        f.v.push_back(g.v);
    }
    f.has_rho_S = f.has_v = true;
    return f;
}

}  // namespace

TEST_CASE("inverse map") {
    const auto& run = gaussian_run();
    REQUIRE(run.ok());
    const auto& s0 = run.snapshots.front();
    const auto id = invert_map(s0, xg);
    for (std::size_t i = 0; i < xg.size; ++i) {
        if (id.mask[i]) CHECK(id.a[i] == doctest::Approx(xg[i]).epsilon(1e-12));
    }
    const auto& s2 = run.snapshots.back();
    const auto inv = invert_map(s2, UniformGrid{1.0, 1.0, 1});
    CHECK(inv.a[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));

    const auto beyond = invert_map(s2, UniformGrid{s2.q.back() + 0.5, 1.0, 1});
    CHECK(beyond.mask[0] == 0);

    // a(q(a_i)) = a_i.
    std::vector<double> q(s2.q.begin() + 5, s2.q.end() - 5);
    double worst = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto r = invert_map(s2, UniformGrid{q[i], 1.0, 1});
        worst = std::max(worst, std::abs(r.a[0] - s2.labels[i + 5]));
    }
    CHECK(worst <= 1e-8);

    auto crossed = s2;
    std::swap(crossed.q[10], crossed.q[11]);
    CHECK_THROWS_AS(invert_map(crossed, xg), TrajectoryCrossing);
}

TEST_CASE("push-forward density and velocity") {
    const auto& run = gaussian_run();
    const auto& s0 = run.snapshots.front();
    const auto& s2 = run.snapshots.back();

    const auto r0 = eulerian_density(s0, run.init, xg);
    double worst = 0.0;
    for (std::size_t i = 0; i < xg.size; ++i) {
        if (r0.mask[i]) worst = std::max(worst, std::abs(r0.rho[i] - run.init.analytic->rho0(xg[i])));
    }
    CHECK(worst <= 1e-8);

    const auto r2 = eulerian_density(s2, run.init, xg);
    CHECK(r2.rho[xg.nearest(0.0)] == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-7));
    CHECK(std::abs(trapezoid_masked(r2.rho, xg, r2.mask) - 1.0) <= 1e-4);

    for (double v : eulerian_velocity(s0, xg).v) CHECK(v == 0.0);
    const auto v2 = eulerian_velocity(s2, xg);
    CHECK(v2.v[xg.nearest(1.0)] == doctest::Approx(0.25).epsilon(1e-7));

    const auto& boosted = gaussian_run(1.0);
    const auto vb = eulerian_velocity(boosted.snapshots.front(), xg);
    for (std::size_t i = 0; i < xg.size; ++i) {
        if (vb.mask[i]) CHECK(vb.v[i] == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("wavefunction reconstruction") {
    const auto& run = gaussian_run();
    const auto rec = reconstruct_wavefunction(run.snapshots, run.init, unit, xg);
    const auto& f = rec.field;
    // S(x, 2) = x^2 / 8 - pi / 8.
    CHECK(f.S[xg.nearest(1.0)] == doctest::Approx(0.125 - std::numbers::pi / 8.0).epsilon(1e-6));
    CHECK(rec.phase_check.consistent());
    CHECK(rec.phase_check.max_deviation <= 1e-3);

    std::vector<cplx> exact(xg.size);
    std::vector<std::uint8_t> win(xg.size);
    for (std::size_t i = 0; i < xg.size; ++i) {
        exact[i] = bench::gaussian_psi(xg[i], 2.0, 1.0, unit);
        win[i] = f.mask[i] && std::abs(xg[i]) <= 6.0;
    }
    CHECK(bench::error_norms(f.psi, exact, win, xg.step).phase_reduced_l2 <= 1e-3);
    for (std::size_t i = 0; i < xg.size; ++i) {
        if (f.mask[i]) CHECK(std::norm(f.psi[i]) == doctest::Approx(f.rho[i]).epsilon(1e-12));
    }

    const auto first = reconstruct_wavefunction(std::span(run.snapshots.data(), 1), run.init, unit, xg);
    for (std::size_t i = 0; i < xg.size; ++i) {
        if (first.field.mask[i]) {
            CHECK(std::abs(first.field.psi[i] - std::sqrt(run.init.analytic->rho0(xg[i]))) <= 1e-8);
        }
    }
}

TEST_CASE("hamilton-jacobi residual") {
    const auto x = UniformGrid::span(-6.0, 6.0, 241);
    for (double t : {0.0, 0.7, 1.9}) {
        for (double xi : {-2.0, 0.0, 0.5, 3.0}) {
            CHECK(std::abs(bench::gaussian_qhj_residual(xi, t, 1.0, unit)) <= 1e-12);
        }
    }
    const auto a = closed_form_field(x, 1.0);
    const auto b = closed_form_field(x, 1.001);
    CHECK(qhj_residual(a, b, unit).max_abs() <= 1e-6);
    CHECK_THROWS_AS(qhj_residual(a, a, unit), ValidationError);

    // Uniform density, S = -E t: r = -E + E.
    for (double E : {0.0, 0.5}) {
        EulerianField u0, u1;
        for (auto* f : {&u0, &u1}) {
            f->x = x;
            f->rho.assign(x.size, 0.1);
            f->mask.assign(x.size, 1);
            f->has_rho_S = true;
        }
        u1.t = 0.01;
        u0.S.assign(x.size, 0.0);
        u1.S.assign(x.size, -E * 0.01);
        const auto r = qhj_residual(u0, u1, unit);
        CHECK(r.max_abs() == doctest::Approx(E).epsilon(1e-12));
    }
}

TEST_CASE("continuity and euler residuals") {
    const auto x = UniformGrid::span(-6.0, 6.0, 241);
    const auto a = closed_form_field(x, 1.0);
    const auto b = closed_form_field(x, 1.001);
    const auto r = continuity_euler_residuals(a, b, unit);
    CHECK(r.continuity.max_abs() <= 1e-4);
    CHECK(r.euler.max_abs() <= 1e-4);

    auto s0 = a;
    s0.v.assign(x.size, 0.0);
    auto s1 = s0;
    s1.t = a.t + 0.1;
    CHECK(continuity_euler_residuals(s0, s1, unit).continuity.max_abs() == 0.0);

    auto other = b;
    other.x = UniformGrid::span(-6.0, 6.0, 121);
    CHECK_THROWS_AS(continuity_euler_residuals(a, other, unit), ValidationError);
}

TEST_CASE("reconstructed run residuals") {
    const auto& run = gaussian_run();
    const auto& h = run.snapshots;
    const auto later = reconstruct_wavefunction(h, run.init, unit, xg).field;
    const auto earlier =
        reconstruct_wavefunction(std::span(h.data(), h.size() - 1), run.init, unit, xg).field;
    CHECK(qhj_residual(earlier, later, unit).max_abs(-6.0, 6.0) <= 1e-3);
    const auto fl = continuity_euler_residuals(earlier, later, unit);
    CHECK(fl.continuity.max_abs(-6.0, 6.0) <= 1e-2);
    CHECK(fl.euler.max_abs(-6.0, 6.0) <= 1e-2);
}

TEST_CASE("label advection through closed-form velocities") {
    const auto& run = gaussian_run();
    std::vector<EulerianField> fields;
    for (const auto& s : run.snapshots) fields.push_back(closed_form_field(xg, s.t));
    const double one[] = {1.0};
    const double zero[] = {0.0};
    CHECK(advect_labels_check(fields, run.snapshots, one) <= 1e-3);
    CHECK(advect_labels_check(fields, run.snapshots, zero) <= 1e-12);
}

TEST_CASE("ensemble moments") {
    const auto& run = gaussian_run();
    const auto rec = reconstruct_wavefunction(run.snapshots, run.init, unit, xg);
    const auto m = ensemble_moments(run.snapshots.back(), run.init, rec.field, unit);
    CHECK(std::abs(m.lagrangian.position) <= 1e-10);
    CHECK(std::abs(m.lagrangian.momentum) <= 1e-10);
    CHECK(m.position_gap() <= 1e-6);
    CHECK(m.momentum_gap() <= 1e-6);

    const auto& boosted = gaussian_run(1.0);
    REQUIRE(boosted.ok());
    const auto rb = reconstruct_wavefunction(boosted.snapshots, boosted.init, unit, xg);
    const auto mb = ensemble_moments(boosted.snapshots.back(), boosted.init, rb.field, unit);
    CHECK(mb.lagrangian.momentum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(mb.eulerian.momentum == doctest::Approx(1.0).epsilon(1e-6));
}
