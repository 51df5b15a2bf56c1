#pragma once

// Quantum trajectory method: particles carrying ln(rho) and S, advanced
// along their own tracks with spatial derivatives from moving weighted least
// squares fits over neighbouring particles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"
#include "qflow/lagrangian.hpp"
#include "qflow/model.hpp"

namespace qflow {

struct MwlsOptions {
    int degree = 4;
    std::size_t stencil_size = 9;
    double width_factor = 3.0;  // Gaussian weight width in units of local spacing

    void validate() const {
        if (degree < 2) throw ValidationError("qtm.degree must be >= 2");
        if (stencil_size < static_cast<std::size_t>(degree) + 1) {
            throw ValidationError("qtm.stencil needs at least degree + 1 particles");
        }
        if (!(width_factor > 0.0)) throw ValidationError("qtm.weight_width must be > 0");
    }
};

struct Derivatives {
    std::vector<double> d1;
    std::vector<double> d2;
};

/// First- and second-derivative weights per particle from a weighted
/// polynomial fit over the stencil_size nearest particles (in index order,
/// shifted inward at the ends). Built once per set of positions and reused
/// for every field on them.
class MwlsOperator {
  public:
    MwlsOperator(std::span<const double> x, const MwlsOptions& opt = {}) : n_(x.size()) {
        opt.validate();
        const std::size_t k = opt.stencil_size;
        if (n_ < k) {
            throw ValidationError("mwls needs at least " + std::to_string(k) + " particles, got " +
                                  std::to_string(n_));
        }
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (!(x[i + 1] > x[i])) {
                throw ValidationError("mwls positions not distinct and increasing at particle " +
                                      std::to_string(i + 1));
            }
        }
        const int terms = opt.degree + 1;
        start_.resize(n_);
        w1_.assign(n_ * k, 0.0);
        w2_.assign(n_ * k, 0.0);
        k_ = k;
        parallel_for(n_, [&](std::size_t i) {
            Eigen::MatrixXd A(static_cast<Eigen::Index>(k), terms);
            const std::size_t lo = std::min(i >= k / 2 ? i - k / 2 : 0, n_ - k);
            start_[i] = lo;
            const double h = (x[lo + k - 1] - x[lo]) / static_cast<double>(k - 1);
            const double width = opt.width_factor * h;
            Eigen::VectorXd sw(static_cast<Eigen::Index>(k));
            for (std::size_t j = 0; j < k; ++j) {
                const double s = (x[lo + j] - x[i]) / h;
                const double d = (x[lo + j] - x[i]) / width;
                sw(static_cast<Eigen::Index>(j)) = std::exp(-0.5 * d * d);
                double p = 1.0;
                for (int c = 0; c < terms; ++c) {
                    A(static_cast<Eigen::Index>(j), c) = sw(static_cast<Eigen::Index>(j)) * p;
                    p *= s;
                }
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
            if (qr.rank() < terms) {
                throw ValidationError("mwls fit rank-deficient at particle " + std::to_string(i));
            }
            // Rows 1 and 2 of the weighted pseudo-inverse give the fitted
            // derivatives at s = 0.
            const Eigen::MatrixXd pinv = qr.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                                              static_cast<Eigen::Index>(k)));
            for (std::size_t j = 0; j < k; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                w1_[i * k + j] = pinv(1, jj) * sw(jj) / h;
                w2_[i * k + j] = 2.0 * pinv(2, jj) * sw(jj) / (h * h);
            }
        });
    }

    std::size_t size() const { return n_; }

    Derivatives apply(std::span<const double> f) const {
        if (f.size() != n_) throw ValidationError("mwls applied to a field of the wrong length");
        Derivatives d;
        d.d1.assign(n_, 0.0);
        d.d2.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* a = &w1_[i * k_];
            const double* b = &w2_[i * k_];
            const double* v = &f[start_[i]];
            double s1 = 0.0;
            double s2 = 0.0;
            for (std::size_t j = 0; j < k_; ++j) {
                s1 += a[j] * v[j];
                s2 += b[j] * v[j];
            }
            d.d1[i] = s1;
            d.d2[i] = s2;
        }
        return d;
    }

  private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<std::size_t> start_;
    std::vector<double> w1_, w2_;
};

inline Derivatives mwls_derivatives(std::span<const double> x, std::span<const double> f,
                                    const MwlsOptions& opt = {}) {
    return MwlsOperator(x, opt).apply(f);
}

/// Particle ensemble. D and Lambda are the running integrals of dv/dx and of
/// the particle Lagrangian L_Q = (S_x)^2/2m - V - V_Q along each track.
struct ParticleSet {
    std::vector<double> x;
    std::vector<double> c;  // ln rho
    std::vector<double> S;
    std::vector<double> D;
    std::vector<double> Lambda;
    std::vector<double> weight;  // initial label spacing (trapezoid weights)
    double t = 0.0;

    std::size_t size() const { return x.size(); }
};

struct QtmConfig {
    double dt = 0.0;  // <= 0 selects cfl_coefficient * dx^2 * m / hbar
    double cfl_coefficient = 0.1;
    double t_final = 1.0;
    std::size_t snapshot_stride = 100;
    MwlsOptions mwls;

    void validate() const {
        if (!(t_final > 0.0)) throw ValidationError("qtm.t_final must be > 0");
        if (!(dt >= 0.0)) throw ValidationError("qtm.dt must be > 0 (or 0/auto)");
        if (!(cfl_coefficient > 0.0)) throw ValidationError("qtm.cfl must be > 0");
        if (snapshot_stride < 1) throw ValidationError("qtm.snapshot_stride must be >= 1");
        mwls.validate();
    }
};

struct QtmRun {
    InitialState init;  // seeding labels (after tail restriction)
    std::vector<ParticleSet> snapshots;
    double dt = 0.0;
    std::size_t steps = 0;
    RunStatus status = RunStatus::completed;
    std::string diagnostic;

    bool ok() const { return status == RunStatus::completed; }
};

/// Particles at the label points with c = ln rho0 and S = S0.
inline ParticleSet seed_particles(const InitialState& init) {
    ParticleSet p;
    p.x = init.labels.nodes();
    p.c.resize(p.x.size());
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        if (!(init.rho0[i] > 0.0)) throw ValidationError("qtm particles need rho0 > 0 at every seed");
        p.c[i] = std::log(init.rho0[i]);
    }
    p.S = init.S0;
    p.D.assign(p.x.size(), 0.0);
    p.Lambda.assign(p.x.size(), 0.0);
    p.weight = trapezoid_weights(init.labels);
    return p;
}

/// psi(x_n(t)) = psi0(x_n(0)) exp(-D/2) exp(i Lambda / hbar).
inline std::vector<cplx> qtm_wavefunction(const ParticleSet& p, const InitialState& init, double hbar) {
    if (p.size() != init.labels.size) throw ValidationError("particle count differs from the seeding labels");
    std::vector<cplx> psi(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const cplx psi0 = std::polar(std::sqrt(init.rho0[i]), init.S0[i] / hbar);
        psi[i] = psi0 * std::exp(-0.5 * p.D[i]) * std::polar(1.0, p.Lambda[i] / hbar);
    }
    return psi;
}

/// Trapezoid sum of exp(c) over the current particle positions.
inline double qtm_norm(const ParticleSet& p) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        s += 0.5 * (std::exp(p.c[i]) + std::exp(p.c[i + 1])) * (p.x[i + 1] - p.x[i]);
    }
    return s;
}

using QtmObserver = std::function<void(const ParticleSet&)>;

/// RK4 on (x, c, S, D, Lambda) with
///   dx/dt = S_x / m,  dc/dt = -S_xx / m,
///   dS/dt = S_x^2 / 2m - V - V_Q,  V_Q = -(hbar^2/4m)(c_xx + c_x^2 / 2).
inline QtmRun qtm_evolve(const InitialState& init_in, const PhysicsParams& params, const QtmConfig& config,
                         const QtmObserver& observer = {}) {
    config.validate();
    params.validate();
    init_in.validate();
    QtmRun run;
    run.init = restrict_to_support(init_in);
    const double m = params.mass;
    const double cq = params.hbar * params.hbar / (4.0 * m);

    const double spacing = run.init.labels.step;
    const double target = config.dt > 0.0 ? config.dt : config.cfl_coefficient * spacing * spacing * m / params.hbar;
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(config.t_final / target - 1e-9)));
    const double dt = config.t_final / static_cast<double>(steps);
    run.dt = dt;

    ParticleSet s = seed_particles(run.init);
    const std::size_t n = s.size();

    struct Rate {
        std::vector<double> x, c, S, D, L;
    };
    auto rate = [&](const ParticleSet& p, Rate& r) {
        const MwlsOperator op(p.x, config.mwls);
        const auto dS = op.apply(p.S);
        const auto dc = op.apply(p.c);
        r.x.resize(n);
        r.c.resize(n);
        r.S.resize(n);
        r.D.resize(n);
        r.L.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = dS.d1[i] / m;
            const double div = dS.d2[i] / m;
            const double vq = -cq * (dc.d2[i] + 0.5 * dc.d1[i] * dc.d1[i]);
            const double lq = 0.5 * m * v * v - params.V(p.x[i]) - vq;
            r.x[i] = v;
            r.c[i] = -div;
            r.S[i] = lq;
            r.D[i] = div;
            r.L[i] = lq;
        }
    };

    auto check_order = [&](const ParticleSet& p) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!(p.x[i + 1] > p.x[i])) throw TrajectoryCrossing(i, p.t, "qtm particles crossed");
        }
    };

    try {
        run.snapshots.push_back(s);
        if (observer) observer(s);
        Rate k[4];
        ParticleSet st = s;
        for (std::size_t step = 1; step <= steps; ++step) {
            static constexpr double stage_c[4] = {0.0, 0.5, 0.5, 1.0};
            for (int r = 0; r < 4; ++r) {
                if (r == 0) {
                    st = s;
                } else {
                    const double h = stage_c[r] * dt;
                    for (std::size_t i = 0; i < n; ++i) {
                        st.x[i] = s.x[i] + h * k[r - 1].x[i];
                        st.c[i] = s.c[i] + h * k[r - 1].c[i];
                        st.S[i] = s.S[i] + h * k[r - 1].S[i];
                    }
                    st.t = s.t + h;
                    check_order(st);
                }
                rate(st, k[r]);
            }
            auto combine = [&](std::vector<double>& y, std::vector<double> Rate::*f) {
                for (std::size_t i = 0; i < n; ++i) {
                    y[i] += dt / 6.0 * ((k[0].*f)[i] + 2.0 * (k[1].*f)[i] + 2.0 * (k[2].*f)[i] + (k[3].*f)[i]);
                }
            };
            combine(s.x, &Rate::x);
            combine(s.c, &Rate::c);
            combine(s.S, &Rate::S);
            combine(s.D, &Rate::D);
            combine(s.Lambda, &Rate::L);
            s.t = step == steps ? config.t_final : static_cast<double>(step) * dt;
            run.steps = step;
            check_order(s);
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.c[i]) || !std::isfinite(s.S[i])) {
                    throw InstabilityError(s.t, std::numeric_limits<double>::infinity());
                }
            }
            if (observer) observer(s);
            if (step % config.snapshot_stride == 0 || step == steps) run.snapshots.push_back(s);
        }
    } catch (const TrajectoryCrossing& e) {
        run.status = RunStatus::crossing;
        run.diagnostic = e.what();
    } catch (const InstabilityError& e) {
        run.status = RunStatus::unstable;
        run.diagnostic = e.what();
    } catch (const ValidationError& e) {
        // A degenerate fit mid-run is a numerical failure, not bad input.
        run.status = RunStatus::unstable;
        run.diagnostic = e.what();
    }
    return run;
}

}  // namespace qflow
