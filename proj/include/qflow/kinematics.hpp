#pragma once

// Deformation-gradient algebra of the label-to-position map and the quantum
// stress, potential and internal energy built from it.
//
// Index conventions: g(i, l) = dq_i/da_l; second derivatives
// d2[i](j, k) = d^2 q_i / da_j da_k; third derivatives
// d3[i][j](k, l) = d^3 q_i / da_j da_k da_l. The hyper-cofactor is stored
// as H[j][m](l, n) = dJ_jl / d(dq_m/da_n).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"

namespace qflow {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Tensor3 = std::array<Mat3, 3>;
using Tensor4 = std::array<std::array<Mat3, 3>, 3>;

/// Levi-Civita symbol with eps(0,1,2) = 1.
constexpr int levi_civita(int i, int j, int k) {
    return (i - j) * (j - k) * (k - i) / 2;
}

struct DeformGradient {
    Mat3 g = Mat3::Identity();
    std::optional<Tensor3> d2;
    std::optional<Tensor4> d3;
};

/// J = (1/3!) eps_ijk eps_lmn g_il g_jm g_kn.
inline double jacobian(const Mat3& g) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                const int eijk = levi_civita(i, j, k);
                if (eijk == 0) continue;
                for (int l = 0; l < 3; ++l)
                    for (int m = 0; m < 3; ++m)
                        for (int n = 0; n < 3; ++n) {
                            const int elmn = levi_civita(l, m, n);
                            if (elmn == 0) continue;
                            s += eijk * elmn * g(i, l) * g(j, m) * g(k, n);
                        }
            }
    return s / 6.0;
}

inline double jacobian(const DeformGradient& d) { return jacobian(d.g); }

/// Cofactor J_il = (1/2) eps_ijk eps_lmn g_jm g_kn, so that g_kj J_ki = J delta_ij.
inline Mat3 cofactor_matrix(const Mat3& g) {
    Mat3 c = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) {
                    const int eijk = levi_civita(i, j, k);
                    if (eijk == 0) continue;
                    for (int m = 0; m < 3; ++m)
                        for (int n = 0; n < 3; ++n) {
                            const int elmn = levi_civita(l, m, n);
                            if (elmn == 0) continue;
                            s += eijk * elmn * g(j, m) * g(k, n);
                        }
                }
            c(i, l) = 0.5 * s;
        }
    return c;
}

inline Mat3 cofactor_matrix(const DeformGradient& d) { return cofactor_matrix(d.g); }

/// H[j][m](l, n) = eps_jmk eps_lnr g_kr, the derivative of the cofactor J_jl
/// with respect to g_mn.
inline Tensor4 hyper_cofactor(const Mat3& g) {
    Tensor4 h;
    for (int j = 0; j < 3; ++j)
        for (int m = 0; m < 3; ++m) {
            Mat3& blk = h[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)];
            for (int l = 0; l < 3; ++l)
                for (int n = 0; n < 3; ++n) {
                    double s = 0.0;
                    for (int k = 0; k < 3; ++k) {
                        const int ejmk = levi_civita(j, m, k);
                        if (ejmk == 0) continue;
                        for (int r = 0; r < 3; ++r) s += ejmk * levi_civita(l, n, r) * g(k, r);
                    }
                    blk(l, n) = s;
                }
        }
    return h;
}

inline Tensor4 hyper_cofactor(const DeformGradient& d) { return hyper_cofactor(d.g); }

/// Density with its spatial gradient and Hessian at one point.
struct DensityJet {
    double rho = 0.0;
    Vec3 grad = Vec3::Zero();
    Mat3 hess = Mat3::Zero();
};

/// sigma_ij = (hbar^2 / 4m) (rho^-1 d_i rho d_j rho - d_i d_j rho).
inline Mat3 stress_eulerian(const DensityJet& d, double hbar, double mass) {
    if (!(d.rho > 0.0)) throw ValidationError("stress_eulerian needs rho > 0");
    const double c = hbar * hbar / (4.0 * mass);
    return c * (d.grad * d.grad.transpose() / d.rho - d.hess);
}

/// V_Q = (hbar^2 / 4 m rho) (|grad rho|^2 / (2 rho) - lap rho).
inline double quantum_potential(const DensityJet& d, double hbar, double mass) {
    if (!(d.rho > 0.0)) throw ValidationError("quantum_potential needs rho > 0");
    return hbar * hbar / (4.0 * mass * d.rho) * (0.5 * d.grad.squaredNorm() / d.rho - d.hess.trace());
}

/// U = (hbar^2 / 8m) |grad rho|^2 / rho^2.
inline double internal_energy(const DensityJet& d, double hbar, double mass) {
    if (!(d.rho > 0.0)) throw ValidationError("internal_energy needs rho > 0");
    return hbar * hbar / (8.0 * mass) * d.grad.squaredNorm() / (d.rho * d.rho);
}

/// Initial density and its label derivatives at one label.
struct LabelDensity {
    double rho0 = 0.0;
    Vec3 grad = Vec3::Zero();
    Mat3 hess = Mat3::Zero();
};

/// Quantum stress written entirely in label-space quantities: deformation
/// gradient, its second and third label derivatives, and rho0 with its first
/// two label derivatives. Equal to stress_eulerian of rho = rho0 / J.
inline Mat3 stress_lagrangian(const DeformGradient& d, const LabelDensity& r0, double hbar, double mass) {
    if (!d.d2 || !d.d3) throw ValidationError("stress_lagrangian needs second and third label derivatives");
    const double J = jacobian(d.g);
    if (!(J > 0.0)) throw ValidationError("stress_lagrangian needs J > 0");
    if (!(r0.rho0 > 0.0)) throw ValidationError("stress_lagrangian needs rho0 > 0");

    const Mat3 C = cofactor_matrix(d.g);
    const Tensor4 H = hyper_cofactor(d.g);
    const Tensor3& q2 = *d.d2;
    const Tensor4& q3 = *d.d3;
    const double rho0 = r0.rho0;
    const Vec3& dr = r0.grad;
    const Mat3& ddr = r0.hess;
    const double Ji = 1.0 / J;

    auto q2at = [&](int i, int j, int k) { return q2[static_cast<std::size_t>(i)](j, k); };
    auto Hat = [&](int j, int m, int l, int n) {
        return H[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)](l, n);
    };

    // dJ_k = dJ/da_k = J_mn d^2 q_m / da_k da_n
    Vec3 dJ = Vec3::Zero();
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < 3; ++m)
            for (int n = 0; n < 3; ++n) dJ(k) += C(m, n) * q2at(m, k, n);

    // Bracketed tensor B_jk; sigma_ij = hbar^2 / (4 m J^3) J_ik B_jk.
    Mat3 B = Mat3::Zero();
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (int l = 0; l < 3; ++l) {
                s += C(j, l) * dr(k) * dr(l) / rho0;
                s -= C(j, l) * ddr(k, l);
                for (int m = 0; m < 3; ++m)
                    for (int n = 0; n < 3; ++n) {
                        s += (Ji * C(j, l) * C(m, n) - Hat(j, m, l, n)) * dr(l) * q2at(m, k, n);
                        s += rho0 * Ji * C(j, l) * C(m, n) *
                             q3[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)](l, n);
                        for (int r = 0; r < 3; ++r)
                            for (int t = 0; t < 3; ++t) {
                                const double coeff = Ji * C(m, n) * Hat(j, r, l, t) +
                                                     Ji * C(j, l) * Hat(m, r, n, t) -
                                                     2.0 * Ji * Ji * C(j, l) * C(m, n) * C(r, t);
                                s += rho0 * coeff * q2at(r, k, t) * q2at(m, l, n);
                            }
                    }
            }
            B(j, k) = s;
        }

    const double pref = hbar * hbar / (4.0 * mass * J * J * J);
    Mat3 sigma = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += C(i, k) * B(j, k);
            sigma(i, j) = pref * s;
        }
    return sigma;
}

/// Field sampled on a 1D grid with a validity flag per point.
struct MaskedField {
    std::vector<double> value;
    std::vector<std::uint8_t> valid;
};

namespace detail {

inline std::vector<std::uint8_t> density_mask(std::span<const double> rho) {
    double peak = 0.0;
    for (double r : rho) peak = std::max(peak, r);
    const double floor = 1e-14 * peak;
    std::vector<std::uint8_t> ok(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) ok[i] = rho[i] > floor ? 1 : 0;
    return ok;
}

}  // namespace detail

/// 1D sigma_xx on a uniform grid with `order`-accurate differences. Points
/// where rho <= 1e-14 max rho are flagged invalid.
inline MaskedField stress_field(std::span<const double> rho, const UniformGrid& grid, double hbar,
                                double mass, int order = 4) {
    const auto rx = Stencil(1, order, grid.size, grid.step)(rho);
    const auto rxx = Stencil(2, order, grid.size, grid.step)(rho);
    MaskedField out{std::vector<double>(rho.size(), 0.0), detail::density_mask(rho)};
    const double c = hbar * hbar / (4.0 * mass);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (out.valid[i]) out.value[i] = c * (rx[i] * rx[i] / rho[i] - rxx[i]);
    }
    return out;
}

/// 1D quantum potential on a uniform grid.
inline MaskedField quantum_potential_field(std::span<const double> rho, const UniformGrid& grid,
                                           double hbar, double mass, int order = 4) {
    const auto rx = Stencil(1, order, grid.size, grid.step)(rho);
    const auto rxx = Stencil(2, order, grid.size, grid.step)(rho);
    MaskedField out{std::vector<double>(rho.size(), 0.0), detail::density_mask(rho)};
    const double c = hbar * hbar / (4.0 * mass);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (out.valid[i]) out.value[i] = c / rho[i] * (0.5 * rx[i] * rx[i] / rho[i] - rxx[i]);
    }
    return out;
}

/// 1D internal energy density per unit mass of probability.
inline MaskedField internal_energy_field(std::span<const double> rho, const UniformGrid& grid,
                                         double hbar, double mass, int order = 4) {
    const auto rx = Stencil(1, order, grid.size, grid.step)(rho);
    MaskedField out{std::vector<double>(rho.size(), 0.0), detail::density_mask(rho)};
    const double c = hbar * hbar / (8.0 * mass);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (out.valid[i]) out.value[i] = c * rx[i] * rx[i] / (rho[i] * rho[i]);
    }
    return out;
}

/// max |rho^-1 d sigma/dx - d V_Q/dx| over points at least `halo` nodes away
/// from the ends and from invalid points. Zero in the continuum.
inline double force_identity_residual(std::span<const double> rho, const UniformGrid& grid, double hbar,
                                      double mass, int order = 2, std::size_t halo = 4) {
    const auto sigma = stress_field(rho, grid, hbar, mass, order);
    const auto vq = quantum_potential_field(rho, grid, hbar, mass, order);
    const Stencil d1(1, order, grid.size, grid.step);
    const auto dsig = d1(sigma.value);
    const auto dvq = d1(vq.value);
    double worst = 0.0;
    for (std::size_t i = halo; i + halo < rho.size(); ++i) {
        bool ok = true;
        for (std::size_t k = i - halo; k <= i + halo; ++k) ok = ok && sigma.valid[k];
        if (!ok) continue;
        worst = std::max(worst, std::abs(dsig[i] / rho[i] - dvq[i]));
    }
    return worst;
}

}  // namespace qflow
