#pragma once

// Split-step Fourier propagator for the 1D Schrodinger equation on a periodic
// grid, used as the independent reference for the trajectory solvers.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"
#include "qflow/model.hpp"

namespace qflow {

namespace detail {

/// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// In-place forward/backward DFT pair of fixed length (unnormalised).
class Fft {
  public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n < 2) throw ValidationError("transform length must be >= 2");
        buf_ = fftw_alloc_complex(n);
        if (!buf_) throw Error("fftw allocation failed");
        std::lock_guard lock(detail::fftw_planner_mutex());
        const int len = static_cast<int>(n);
        fwd_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    ~Fft() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }

    void forward(std::span<cplx> data) { run(fwd_, data); }
    void backward(std::span<cplx> data) { run(bwd_, data); }

  private:
    void run(fftw_plan plan, std::span<cplx> data) {
        if (data.size() != n_) throw ValidationError("transform applied to a field of the wrong length");
        std::copy(data.begin(), data.end(), reinterpret_cast<cplx*>(buf_));
        fftw_execute(plan);
        std::copy_n(reinterpret_cast<const cplx*>(buf_), n_, data.begin());
    }

    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// Angular wavenumbers of the periodic grid in FFT order; the period is
/// n * step (the last grid point is not repeated).
inline std::vector<double> wavenumbers(const UniformGrid& x) {
    const std::size_t n = x.size;
    const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * x.step);
    std::vector<double> k(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto s = static_cast<double>(j);
        k[j] = base * (j < (n + 1) / 2 ? s : s - static_cast<double>(n));
    }
    return k;
}

/// d psi / dx by spectral differentiation.
inline std::vector<cplx> spectral_derivative(std::span<const cplx> psi, const UniformGrid& x) {
    Fft fft(x.size);
    std::vector<cplx> d(psi.begin(), psi.end());
    fft.forward(d);
    const auto k = wavenumbers(x);
    const double inv_n = 1.0 / static_cast<double>(x.size);
    for (std::size_t j = 0; j < d.size(); ++j) d[j] *= cplx(0.0, k[j] * inv_n);
    if (x.size % 2 == 0) d[x.size / 2] = 0.0;  // Nyquist mode has no consistent derivative
    fft.backward(d);
    return d;
}

struct ReferenceConfig {
    double dt = 1e-3;
    double t_final = 1.0;
    std::size_t snapshot_stride = 100;
    /// Probability allowed in the outer 10% of the domain on each side
    /// before the wrap-around warning is raised.
    double edge_mass_warning = 1e-8;

    void validate() const {
        if (!(dt > 0.0)) throw ValidationError("reference.dt must be > 0");
        if (!(t_final > 0.0)) throw ValidationError("reference.t_final must be > 0");
        if (snapshot_stride < 1) throw ValidationError("reference.snapshot_stride must be >= 1");
    }
};

struct ReferenceRun {
    std::vector<EulerianField> snapshots;  // psi only
    std::vector<double> times;            // every step
    std::vector<double> norm;
    std::vector<double> energy;
    double dt = 0.0;
    std::size_t steps = 0;
    bool wrap_around_risk = false;
    std::string warning;

    double max_norm_drift() const { return drift(norm); }
    double max_energy_drift() const { return drift(energy); }

  private:
    static double drift(const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double worst = 0.0;
        for (double e : v) worst = std::max(worst, std::abs(e - v.front()));
        return std::abs(v.front()) > 0.0 ? worst / std::abs(v.front()) : worst;
    }
};

/// Strang splitting: half kinetic step exp(-i hbar k^2 dt / 4m) in Fourier
/// space, full potential step exp(-i V dt / hbar), half kinetic step.
class SplitStep {
  public:
    SplitStep(const UniformGrid& x, const PhysicsParams& params, double dt)
        : x_(x), params_(params), fft_(x.size) {
        params_.validate();
        if (x.size < 8) throw ValidationError("reference grid needs at least 8 points");
        k_ = wavenumbers(x);
        V_ = params_.sample(x);
        half_kinetic_.resize(x.size);
        potential_.resize(x.size);
        // The 1/n of each inverse transform is folded into the kinetic factor.
        const double inv_n = 1.0 / static_cast<double>(x.size);
        for (std::size_t j = 0; j < x.size; ++j) {
            const double w = params_.hbar * k_[j] * k_[j] / (4.0 * params_.mass);
            half_kinetic_[j] = std::polar(inv_n, -w * dt);
            potential_[j] = std::polar(1.0, -V_[j] * dt / params_.hbar);
        }
    }

    void step(std::vector<cplx>& psi) {
        fft_.forward(psi);
        for (std::size_t j = 0; j < psi.size(); ++j) psi[j] *= half_kinetic_[j];
        fft_.backward(psi);
        for (std::size_t j = 0; j < psi.size(); ++j) psi[j] *= potential_[j];
        fft_.forward(psi);
        for (std::size_t j = 0; j < psi.size(); ++j) psi[j] *= half_kinetic_[j];
        fft_.backward(psi);
    }

    double norm(std::span<const cplx> psi) const {
        double s = 0.0;
        for (const auto& z : psi) s += std::norm(z);
        return s * x_.step;
    }

    /// <psi|H|psi> with the kinetic part evaluated spectrally.
    double energy(std::span<const cplx> psi) {
        std::vector<cplx> hat(psi.begin(), psi.end());
        fft_.forward(hat);
        const double n = static_cast<double>(x_.size);
        double kin = 0.0;
        for (std::size_t j = 0; j < hat.size(); ++j) kin += std::norm(hat[j]) * k_[j] * k_[j];
        kin *= params_.hbar * params_.hbar / (2.0 * params_.mass) * x_.step / n;
        double pot = 0.0;
        for (std::size_t j = 0; j < psi.size(); ++j) pot += V_[j] * std::norm(psi[j]);
        return kin + pot * x_.step;
    }

  private:
    UniformGrid x_;
    PhysicsParams params_;
    Fft fft_;
    std::vector<double> k_, V_;
    std::vector<cplx> half_kinetic_, potential_;
};

/// Fraction of probability in the outer 10% of the grid on either side.
inline double edge_mass(std::span<const cplx> psi, const UniformGrid& x) {
    const std::size_t band = std::max<std::size_t>(1, x.size / 10);
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < band; ++i) {
        lo += std::norm(psi[i]);
        hi += std::norm(psi[x.size - 1 - i]);
    }
    return std::max(lo, hi) * x.step;
}

using ReferenceObserver = std::function<void(double t, std::span<const cplx> psi)>;

inline ReferenceRun split_step_evolve(std::vector<cplx> psi, const UniformGrid& x, const PhysicsParams& params,
                                      const ReferenceConfig& config, const ReferenceObserver& observer = {}) {
    config.validate();
    if (psi.size() != x.size) throw ValidationError("initial wavefunction does not match the grid");
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(config.t_final / config.dt - 1e-9)));
    const double dt = config.t_final / static_cast<double>(steps);
    SplitStep prop(x, params, dt);

    ReferenceRun run;
    run.dt = dt;
    run.steps = steps;
    const double n0 = prop.norm(psi);
    if (std::abs(n0 - 1.0) > 1e-6) {
        throw ValidationError("initial wavefunction norm " + std::to_string(n0) + " differs from 1");
    }
    auto snapshot = [&](double t) {
        EulerianField f;
        f.x = x;
        f.t = t;
        f.psi = psi;
        f.mask.assign(x.size, 1);
        f.has_psi = true;
        run.snapshots.push_back(std::move(f));
    };
    auto record = [&](double t) {
        run.times.push_back(t);
        run.norm.push_back(prop.norm(psi));
        run.energy.push_back(prop.energy(psi));
        if (!run.wrap_around_risk && edge_mass(psi, x) > config.edge_mass_warning) {
            run.wrap_around_risk = true;
            run.warning = "wavepacket within 10% of the domain edge at t = " + std::to_string(t);
        }
        if (observer) observer(t, psi);
    };

    record(0.0);
    snapshot(0.0);
    for (std::size_t s = 1; s <= steps; ++s) {
        prop.step(psi);
        const double t = s == steps ? config.t_final : static_cast<double>(s) * dt;
        record(t);
        if (s % config.snapshot_stride == 0 || s == steps) snapshot(t);
    }
    return run;
}

/// Madelung split of a reference snapshot over the contiguous region around
/// x_ref where |psi| >= 1e-6 max|psi|, with v = (hbar/m) Im(psi'/psi) from
/// the spectral derivative.
inline EulerianField reference_fields(const EulerianField& snap, std::size_t x_ref, const PhysicsParams& params) {
    if (!snap.has_psi) throw ValidationError("reference snapshot carries no wavefunction");
    const std::size_t n = snap.x.size;
    if (x_ref >= n) throw ValidationError("x_ref outside the grid");
    double peak = 0.0;
    for (const auto& z : snap.psi) peak = std::max(peak, std::abs(z));
    std::vector<std::uint8_t> window(n, 0);
    for (std::size_t i = 0; i < n; ++i) window[i] = std::abs(snap.psi[i]) >= 1e-6 * peak;
    if (!window[x_ref]) throw NodeEncountered(x_ref, snap.x[x_ref]);
    const auto mad = madelung_decompose(snap.psi, x_ref, params.hbar, snap.x, window);
    const auto dpsi = spectral_derivative(snap.psi, snap.x);

    EulerianField f = snap;
    f.rho = mad.rho;
    f.S = mad.S;
    f.mask = mad.mask;
    f.v.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (f.mask[i]) f.v[i] = params.hbar / params.mass * std::imag(dpsi[i] / snap.psi[i]);
    }
    f.has_rho_S = f.has_v = true;
    return f;
}

}  // namespace qflow
