#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qflow/benchmarks.hpp"
#include "qflow/reference.hpp"

using namespace qflow;

namespace {

const PhysicsParams unit{};

UniformGrid periodic(double lo, double hi, std::size_t n) { return UniformGrid{lo, (hi - lo) / static_cast<double>(n), n}; }

std::vector<cplx> gaussian(const UniformGrid& x, double k = 0.0) {
    std::vector<cplx> psi(x.size);
    for (std::size_t i = 0; i < x.size; ++i) psi[i] = bench::gaussian_psi(x[i], 0.0, 1.0, unit, k);
    return psi;
}

ReferenceRun run_to(const UniformGrid& x, double t, double k = 0.0, std::size_t stride = 100) {
    ReferenceConfig c;
    c.t_final = t;
    c.snapshot_stride = stride;
    return split_step_evolve(gaussian(x, k), x, unit, c);
}

}  // namespace

TEST_CASE("split-step free gaussian") {
    const auto x = periodic(-16.0, 16.0, 1024);
    const auto run = run_to(x, 2.0);
    CHECK(run.steps == 2000);
    const auto& last = run.snapshots.back();
    CHECK(last.t == 2.0);
    const std::size_t c = x.nearest(0.0);
    CHECK(std::norm(last.psi[c]) == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-6));
    CHECK(run.max_norm_drift() <= 1e-10);
    CHECK(run.max_energy_drift() <= 1e-8);
    CHECK_FALSE(run.wrap_around_risk);

    std::vector<cplx> exact(x.size);
    for (std::size_t i = 0; i < x.size; ++i) exact[i] = bench::gaussian_psi(x[i], 2.0, 1.0, unit);
    const std::vector<std::uint8_t> all(x.size, 1);
    const auto e = bench::error_norms(last.psi, exact, all, x.step);
    CHECK(e.l2 <= 1e-6);
    CHECK(e.phase_reduced_l2 <= 1e-6);
}

TEST_CASE("plane wave picks up the kinetic phase") {
    const auto x = periodic(-8.0, 8.0, 128);
    const double L = 16.0;
    const double k = 2.0 * std::numbers::pi * 3.0 / L;
    std::vector<cplx> psi(x.size);
    for (std::size_t i = 0; i < x.size; ++i) psi[i] = std::polar(1.0 / std::sqrt(L), k * x[i]);
    ReferenceConfig c;
    c.t_final = 0.7;
    c.dt = 0.01;
    const auto run = split_step_evolve(psi, x, unit, c);
    const cplx factor = std::polar(1.0, -k * k * 0.7 / 2.0);
    for (std::size_t i = 0; i < x.size; ++i) CHECK(std::abs(run.snapshots.back().psi[i] - factor * psi[i]) <= 1e-12);
}

TEST_CASE("madelung fields of the reference") {
    const auto x = periodic(-16.0, 16.0, 1024);
    const auto run = run_to(x, 2.0);
    const std::size_t c = x.nearest(0.0);
    const auto f = reference_fields(run.snapshots.back(), c, unit);
    const std::size_t i1 = x.nearest(1.0);
    REQUIRE(x[i1] == doctest::Approx(1.0));
    CHECK(f.S[i1] - f.S[c] == doctest::Approx(0.125).epsilon(1e-8));
    CHECK(f.v[i1] == doctest::Approx(0.25).epsilon(1e-8));

    const auto f0 = reference_fields(run.snapshots.front(), c, unit);
    for (std::size_t i = 0; i < x.size; ++i) {
        if (f0.mask[i]) CHECK(std::abs(f0.v[i]) <= 1e-8);
    }

    const auto boosted = run_to(x, 1.0, 1.0);
    const auto fb = reference_fields(boosted.snapshots.front(), c, unit);
    CHECK(fb.v[c] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fb.v[i1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("wrap-around warning and input checks") {
    const auto narrow = periodic(-5.0, 5.0, 160);
    const auto run = run_to(narrow, 1.0);
    CHECK(run.wrap_around_risk);
    CHECK_FALSE(run.warning.empty());

    auto psi = gaussian(narrow);
    for (auto& z : psi) z *= 2.0;
    ReferenceConfig c;
    CHECK_THROWS_AS(split_step_evolve(psi, narrow, unit, c), ValidationError);
    c.dt = 0.0;
    CHECK_THROWS_AS(split_step_evolve(gaussian(narrow), narrow, unit, c), ValidationError);
}

TEST_CASE("harmonic ground state is stationary") {
    PhysicsParams h;
    h.potential = HarmonicPotential{1.0};
    const auto x = periodic(-10.0, 10.0, 256);
    std::vector<cplx> psi(x.size);
    for (std::size_t i = 0; i < x.size; ++i) psi[i] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x[i] * x[i]);
    ReferenceConfig c;
    c.t_final = 1.0;
    c.dt = 1e-3;
    const auto run = split_step_evolve(psi, x, h, c);
    const cplx factor = std::polar(1.0, -0.5);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size; ++i) worst = std::max(worst, std::abs(run.snapshots.back().psi[i] - factor * psi[i]));
    CHECK(worst <= 1e-6);
    CHECK(run.energy.front() == doctest::Approx(0.5).epsilon(1e-10));
}
