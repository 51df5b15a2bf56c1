#pragma once

// Config-driven runs behind the command-line subcommands. Each run writes its
// CSV files into an output directory and returns a JSON summary together with
// the process exit code.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qflow/benchmarks.hpp"
#include "qflow/config.hpp"
#include "qflow/identities.hpp"
#include "qflow/io.hpp"
#include "qflow/lagrangian.hpp"
#include "qflow/qtm.hpp"
#include "qflow/reconstruction.hpp"
#include "qflow/reference.hpp"

namespace qflow {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int checks_failed = 1;
inline constexpr int validation = 2;
inline constexpr int numerical = 3;
}  // namespace exit_code

using json = nlohmann::ordered_json;

struct PipelineResult {
    json summary;
    int exit = exit_code::ok;
};

inline PhysicsParams physics_from(const Config& c) {
    PhysicsParams p;
    p.hbar = c.real("physics.hbar");
    p.mass = c.real("physics.mass");
    const std::string pot = c.str("physics.potential");
    if (pot == "harmonic") {
        p.potential = HarmonicPotential{c.real("physics.omega")};
    } else if (pot != "free") {
        throw ValidationError("physics.potential must be free or harmonic, got " + pot);
    }
    p.validate();
    return p;
}

inline UniformGrid label_grid(const Config& c, std::size_t n) {
    return UniformGrid::span(c.real("grid.a_min"), c.real("grid.a_max"), n);
}

inline InitialState state_from(const Config& c, const PhysicsParams& p, std::size_t n) {
    const auto labels = label_grid(c, n);
    const std::string kind = c.str("state.kind");
    const double sigma0 = c.real("state.sigma0");
    if (kind == "gaussian") return make_gaussian_state(sigma0, p, labels, c.real("state.k"));
    if (kind == "perturbed") {
        return make_perturbed_gaussian_state(sigma0, c.real("state.beta"), c.real("state.kappa"), p, labels);
    }
    throw ValidationError("state.kind must be gaussian or perturbed, got " + kind);
}

inline SolverConfig solver_from(const Config& c) {
    SolverConfig s;
    s.dt = c.real("solver.dt");
    if (c.is_set("solver.dt") && !(s.dt > 0.0)) {
        throw ValidationError("solver.dt must be > 0 (omit it for the automatic step)");
    }
    s.cfl_coefficient = c.real("solver.cfl");
    const std::string integ = c.str("solver.integrator");
    if (integ == "rk4") {
        s.integrator = Integrator::rk4;
    } else if (integ == "verlet") {
        s.integrator = Integrator::velocity_verlet;
    } else {
        throw ValidationError("solver.integrator must be rk4 or verlet, got " + integ);
    }
    s.stencil_order = static_cast<int>(c.count("solver.stencil_order"));
    s.t_final = c.real("solver.t_final");
    s.snapshot_stride = c.count("solver.snapshot_stride");
    const std::string acc = c.str("solver.acceleration");
    if (acc == "direct") {
        s.acceleration_path = AccelerationPath::direct;
    } else if (acc == "newton") {
        s.acceleration_path = AccelerationPath::newton;
    } else if (acc == "both") {
        s.acceleration_path = AccelerationPath::both_with_check;
    } else {
        throw ValidationError("solver.acceleration must be direct, newton or both, got " + acc);
    }
    s.energy_abort = c.real("solver.energy_abort");
    s.validate();
    return s;
}

inline UniformGrid output_grid(const Config& c) {
    return UniformGrid::span(c.real("output.x_min"), c.real("output.x_max"), c.count("output.n_x"));
}

/// Periodic grid: n points starting at x_min with period x_max - x_min.
inline UniformGrid reference_grid(const Config& c) {
    const double lo = c.real("reference.x_min");
    const double hi = c.real("reference.x_max");
    const std::size_t n = c.count("reference.n");
    if (n < 8 || !(hi > lo)) throw ValidationError("reference grid needs n >= 8 and x_max > x_min");
    return UniformGrid{lo, (hi - lo) / static_cast<double>(n), n};
}

inline ReferenceConfig reference_from(const Config& c) {
    ReferenceConfig r;
    r.dt = c.real("reference.dt");
    r.t_final = c.real("solver.t_final");
    r.snapshot_stride = c.count("reference.snapshot_stride");
    r.validate();
    return r;
}

inline QtmConfig qtm_from(const Config& c) {
    QtmConfig q;
    q.dt = c.real("qtm.dt");
    if (c.is_set("qtm.dt") && !(q.dt > 0.0)) throw ValidationError("qtm.dt must be > 0 (omit it for auto)");
    q.cfl_coefficient = c.real("qtm.cfl");
    q.t_final = c.real("solver.t_final");
    q.snapshot_stride = c.count("qtm.snapshot_stride");
    q.mwls.degree = static_cast<int>(c.count("qtm.degree"));
    q.mwls.stencil_size = c.count("qtm.stencil_size");
    q.mwls.width_factor = c.real("qtm.width_factor");
    q.validate();
    return q;
}

/// Whether the run has a closed form to compare against.
inline bool has_closed_form(const Config& c) {
    return c.str("state.kind") == "gaussian" && c.str("physics.potential") == "free";
}

inline json config_echo(const Config& c) {
    json j = json::object();
    for (const auto& [k, v] : c.effective()) j[k] = v;
    return j;
}

inline json header(const std::string& command, const Config& c) {
    json j;
    j["schema"] = "qflow.summary/1";
    j["command"] = command;
    j["config"] = config_echo(c);
    return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path.string());
    f << text;
    if (!f) throw Error("write failed for " + path.string());
}

template <class Writer>
void write_csv(const std::filesystem::path& path, Writer&& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path.string());
    w(f);
    if (!f) throw Error("write failed for " + path.string());
}

inline double trajectory_error(const TrajectoryState& s, double sigma0, double k, const PhysicsParams& p) {
    const double u = p.hbar * k / p.mass;
    double worst = 0.0;
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        const double a = s.labels[i];
        const double exact = bench::gaussian_trajectory(a, s.t, sigma0, p).q + u * s.t;
        worst = std::max(worst, std::abs(s.q[i] - exact) / (1.0 + std::abs(a)));
    }
    return worst;
}

inline bench::ErrorNorms psi_error(const EulerianField& f, double sigma0, double k, const PhysicsParams& p,
                                   double window) {
    std::vector<cplx> exact(f.size());
    std::vector<std::uint8_t> mask(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        exact[i] = bench::gaussian_psi(f.x[i], f.t, sigma0, p, k);
        mask[i] = f.mask[i] && std::abs(f.x[i]) <= window;
    }
    return bench::error_norms(f.psi, exact, mask, f.x.step);
}

inline json energy_trace(const LagrangianRun& run) {
    json e;
    e["t"] = run.energy_times;
    e["value"] = run.energy;
    e["max_relative_drift"] = run.max_energy_drift();
    return e;
}

inline std::size_t peak_index(std::span<const cplx> psi) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < psi.size(); ++i) {
        if (std::abs(psi[i]) > std::abs(psi[best])) best = i;
    }
    return best;
}

}  // namespace detail

inline PipelineResult run_lagrangian_pipeline(const Config& c, const std::filesystem::path& out) {
    const auto p = physics_from(c);
    const auto solver = solver_from(c);
    const auto init = state_from(c, p, c.count("grid.n_labels"));
    const auto xg = output_grid(c);

    PipelineResult res;
    res.summary = header("run-lagrangian", c);
    const auto run = evolve(init, p, solver);
    detail::write_csv(out / "trajectories.csv", [&](std::ostream& f) { io::write_trajectories(f, run.snapshots); });

    auto& s = res.summary;
    s["status"] = to_string(run.status);
    s["diagnostic"] = run.diagnostic;
    s["dt"] = run.dt;
    s["steps"] = run.steps;
    s["evolved_labels"] = run.init.labels.size;
    s["min_jacobian"] = run.min_jacobian;
    if (solver.acceleration_path == AccelerationPath::both_with_check) {
        s["max_path_disagreement"] = run.max_path_disagreement;
    }
    s["energy"] = detail::energy_trace(run);
    if (!run.ok()) {
        res.exit = exit_code::numerical;
        return res;
    }

    const auto rec = reconstruct_wavefunction(run.snapshots, run.init, p, xg);
    const EulerianField* fields = &rec.field;
    detail::write_csv(out / "field.csv", [&](std::ostream& f) { io::write_fields(f, std::span(fields, 1)); });
    json r;
    r["t"] = rec.field.t;
    r["norm"] = trapezoid_masked(rec.field.rho, xg, rec.field.mask);
    r["min_jacobian"] = rec.min_jacobian;
    r["phase_check_deviation"] = rec.phase_check.max_deviation;
    r["phase_check_consistent"] = rec.phase_check.consistent();
    s["reconstruction"] = r;
    const auto mom = ensemble_moments(run.snapshots.back(), run.init, rec.field, p);
    s["moments"] = {{"lagrangian_position", mom.lagrangian.position},
                    {"lagrangian_momentum", mom.lagrangian.momentum},
                    {"eulerian_position", mom.eulerian.position},
                    {"eulerian_momentum", mom.eulerian.momentum}};

    if (has_closed_form(c)) {
        const double sigma0 = c.real("state.sigma0");
        const double k = c.real("state.k");
        double worst = 0.0;
        for (const auto& snap : run.snapshots) worst = std::max(worst, detail::trajectory_error(snap, sigma0, k, p));
        const auto e = detail::psi_error(rec.field, sigma0, k, p, c.real("output.window"));
        s["closed_form"] = {{"trajectory_max_rel_error", worst},
                            {"psi_l2_error", e.l2},
                            {"psi_phase_reduced_l2_error", e.phase_reduced_l2}};
    }
    return res;
}

inline PipelineResult run_reference_pipeline(const Config& c, const std::filesystem::path& out) {
    const auto p = physics_from(c);
    const auto rc = reference_from(c);
    const auto x = reference_grid(c);
    // Only the closed-form initial data is used; the label grid is not evolved.
    const auto init = state_from(c, p, c.count("grid.n_labels"));
    if (!init.analytic) throw ValidationError("reference run needs a closed-form initial state");
    std::vector<cplx> psi0(x.size);
    for (std::size_t i = 0; i < x.size; ++i) {
        const double rho = init.analytic->rho0(x[i]);
        const double S = init.analytic->S0 ? init.analytic->S0(x[i]) : 0.0;
        psi0[i] = std::polar(std::sqrt(rho), S / p.hbar);
    }

    PipelineResult res;
    res.summary = header("run-reference", c);
    const auto run = split_step_evolve(psi0, x, p, rc);
    std::vector<EulerianField> fields;
    try {
        for (const auto& snap : run.snapshots) fields.push_back(reference_fields(snap, detail::peak_index(snap.psi), p));
    } catch (const NodeEncountered& e) {
        res.summary["status"] = "node";
        res.summary["diagnostic"] = e.what();
        res.exit = exit_code::numerical;
        return res;
    }
    detail::write_csv(out / "field.csv", [&](std::ostream& f) { io::write_fields(f, fields); });

    auto& s = res.summary;
    s["status"] = "completed";
    s["dt"] = run.dt;
    s["steps"] = run.steps;
    s["max_norm_drift"] = run.max_norm_drift();
    s["max_energy_drift"] = run.max_energy_drift();
    s["wrap_around_risk"] = run.wrap_around_risk;
    if (run.wrap_around_risk) s["warning"] = run.warning;
    s["moments"] = [&] {
        const auto m = moments_eulerian(fields.back(), p);
        return json{{"position", m.position}, {"momentum", m.momentum}};
    }();
    if (has_closed_form(c)) {
        std::vector<cplx> exact(x.size);
        std::vector<std::uint8_t> all(x.size, 1);
        for (std::size_t i = 0; i < x.size; ++i) {
            exact[i] = bench::gaussian_psi(x[i], rc.t_final, c.real("state.sigma0"), p, c.real("state.k"));
        }
        const auto e = bench::error_norms(run.snapshots.back().psi, exact, all, x.step);
        s["closed_form"] = {{"psi_l2_error", e.l2}, {"psi_phase_reduced_l2_error", e.phase_reduced_l2}};
    }
    return res;
}

inline PipelineResult run_qtm_pipeline(const Config& c, const std::filesystem::path& out) {
    const auto p = physics_from(c);
    const auto qc = qtm_from(c);
    const auto init = state_from(c, p, c.count("qtm.n_particles"));

    PipelineResult res;
    res.summary = header("run-qtm", c);
    const auto run = qtm_evolve(init, p, qc);

    // Trajectory rows: a = seed position, q = x, qdot = S_x / m, chi = S - S0.
    std::vector<TrajectoryState> tracks;
    std::vector<io::FieldRow> rows;
    for (const auto& ps : run.snapshots) {
        TrajectoryState t;
        t.labels = run.init.labels;
        t.t = ps.t;
        t.q = ps.x;
        const auto dS = mwls_derivatives(ps.x, ps.S, qc.mwls);
        const auto psi = qtm_wavefunction(ps, run.init, p.hbar);
        t.qdot.resize(ps.size());
        t.chi.resize(ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            t.qdot[i] = dS.d1[i] / p.mass;
            t.chi[i] = ps.S[i] - run.init.S0[i];
            rows.push_back({ps.t, ps.x[i], std::exp(ps.c[i]), ps.S[i], t.qdot[i], psi[i], 1});
        }
        tracks.push_back(std::move(t));
    }
    detail::write_csv(out / "trajectories.csv", [&](std::ostream& f) { io::write_trajectories(f, tracks); });
    detail::write_csv(out / "field.csv", [&](std::ostream& f) { io::write_field_rows(f, rows); });

    auto& s = res.summary;
    s["status"] = to_string(run.status);
    s["diagnostic"] = run.diagnostic;
    s["dt"] = run.dt;
    s["steps"] = run.steps;
    s["particles"] = run.init.labels.size;
    std::vector<double> norms;
    for (const auto& ps : run.snapshots) norms.push_back(qtm_norm(ps));
    s["norm"] = norms;
    if (!run.ok()) res.exit = exit_code::numerical;
    return res;
}

/// Compares the last time level of two field files on a shared grid.
inline PipelineResult compare_pipeline(const Config& c, const std::filesystem::path& a,
                                       const std::filesystem::path& b) {
    auto resolve = [](const std::filesystem::path& p) {
        return std::filesystem::is_directory(p) ? p / "field.csv" : p;
    };
    const auto ra = io::last_time_level(io::read_field_file(resolve(a).string()));
    const auto rb = io::last_time_level(io::read_field_file(resolve(b).string()));
    if (ra.size() != rb.size()) throw ValidationError("field files have different point counts");
    if (ra.size() < 2) throw ValidationError("field files need at least two points");
    const double span = ra.back().x - ra.front().x;
    std::vector<cplx> pa(ra.size()), pb(rb.size());
    std::vector<double> rhoa(ra.size()), rhob(rb.size());
    std::vector<std::uint8_t> mask(ra.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        if (std::abs(ra[i].x - rb[i].x) > 1e-9 * std::abs(span)) {
            throw ValidationError("field files are on different grids (point " + std::to_string(i) + ")");
        }
        pa[i] = ra[i].psi;
        pb[i] = rb[i].psi;
        rhoa[i] = ra[i].rho;
        rhob[i] = rb[i].rho;
        mask[i] = ra[i].mask && rb[i].mask;
    }
    const double dx = span / static_cast<double>(ra.size() - 1);
    const auto ep = bench::error_norms(pa, pb, mask, dx);
    const auto er = bench::error_norms(rhoa, rhob, mask, dx);

    PipelineResult res;
    res.summary = header("compare", c);
    auto& s = res.summary;
    s["a"] = resolve(a).string();
    s["b"] = resolve(b).string();
    s["t_a"] = ra.front().t;
    s["t_b"] = rb.front().t;
    s["points_compared"] = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    s["psi_l2_error"] = ep.l2;
    s["psi_linf_error"] = ep.linf;
    s["psi_phase_reduced_l2_error"] = ep.phase_reduced_l2;
    s["optimal_phase"] = ep.optimal_phase;
    s["rho_l2_error"] = er.l2;
    s["rho_linf_error"] = er.linf;
    return res;
}

inline PipelineResult tensor_check_pipeline(const Config& c) {
    const auto rep = run_identity_suite(c.count("run.seed"), c.count("tensor.draws"));
    PipelineResult res;
    res.summary = header("tensor-check", c);
    json checks = json::array();
    for (const auto& ch : rep.checks) {
        checks.push_back({{"name", ch.name},
                          {"value", ch.value},
                          {ch.lower_bound ? "minimum" : "maximum", ch.tolerance},
                          {"passed", ch.passed},
                          {"detail", ch.detail}});
    }
    res.summary["cofactor_draws"] = rep.cofactor_draws;
    res.summary["cofactor_passed"] = rep.cofactor_passed;
    res.summary["checks"] = checks;
    res.summary["passed"] = rep.all_passed();
    res.exit = rep.all_passed() ? exit_code::ok : exit_code::checks_failed;
    return res;
}

/// Free-Gaussian acceptance: trajectories at every step, the reconstructed
/// wavefunction and its norm, and the energy drift.
inline PipelineResult gaussian_accept_pipeline(const Config& c, const std::filesystem::path& out) {
    if (!has_closed_form(c)) throw ValidationError("gaussian-accept needs state.kind = gaussian and a free potential");
    const auto p = physics_from(c);
    const auto solver = solver_from(c);
    const auto init = state_from(c, p, c.count("grid.n_labels"));
    const auto xg = output_grid(c);
    const double sigma0 = c.real("state.sigma0");
    const double k = c.real("state.k");

    PipelineResult res;
    res.summary = header("gaussian-accept", c);
    double worst = 0.0;
    const auto run = evolve(init, p, solver, [&](const TrajectoryState& st) {
        worst = std::max(worst, detail::trajectory_error(st, sigma0, k, p));
    });
    detail::write_csv(out / "trajectories.csv", [&](std::ostream& f) { io::write_trajectories(f, run.snapshots); });
    auto& s = res.summary;
    s["status"] = to_string(run.status);
    s["diagnostic"] = run.diagnostic;
    s["dt"] = run.dt;
    s["steps"] = run.steps;
    s["min_jacobian"] = run.min_jacobian;
    s["energy"] = detail::energy_trace(run);
    if (!run.ok()) {
        res.exit = exit_code::numerical;
        return res;
    }
    const auto rec = reconstruct_wavefunction(run.snapshots, run.init, p, xg);
    const EulerianField* fields = &rec.field;
    detail::write_csv(out / "field.csv", [&](std::ostream& f) { io::write_fields(f, std::span(fields, 1)); });
    const auto e = detail::psi_error(rec.field, sigma0, k, p, c.real("output.window"));
    const double norm = trapezoid_masked(rec.field.rho, xg, rec.field.mask);

    json checks = json::array();
    bool all = true;
    auto check = [&](const std::string& name, double value, double tol) {
        const bool ok = value <= tol;
        all = all && ok;
        checks.push_back({{"name", name}, {"value", value}, {"maximum", tol}, {"passed", ok}});
    };
    check("trajectory_max_rel_error", worst, 1e-3);
    check("psi_phase_reduced_l2_error", e.phase_reduced_l2, 1e-3);
    check("norm_deviation", std::abs(norm - 1.0), 1e-4);
    check("energy_relative_drift", run.max_energy_drift(), 1e-4);
    check("phase_check_deviation", rec.phase_check.max_deviation, rec.phase_check.tolerance);
    s["checks"] = checks;
    s["passed"] = all;
    res.exit = all ? exit_code::ok : exit_code::checks_failed;
    return res;
}

inline void write_summary(const std::filesystem::path& out, const json& summary) {
    detail::write_text(out / "summary.json", summary.dump(2) + "\n");
}

}  // namespace qflow
