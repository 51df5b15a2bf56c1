#pragma once

// Uniform grids, trapezoid quadrature and finite-difference stencils with
// one-sided closures at the ends.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "qflow/errors.hpp"

namespace qflow {

/// Uniformly spaced nodes x_i = start + i * step, i = 0..size-1.
struct UniformGrid {
    double start = 0.0;
    double step = 1.0;
    std::size_t size = 0;

    static UniformGrid span(double lo, double hi, std::size_t n) {
        if (n < 2 || !(hi > lo)) {
            throw ValidationError("grid needs n >= 2 and hi > lo");
        }
        return {lo, (hi - lo) / static_cast<double>(n - 1), n};
    }

    double operator[](std::size_t i) const { return start + step * static_cast<double>(i); }
    double front() const { return start; }
    double back() const { return (*this)[size - 1]; }
    double length() const { return back() - front(); }

    std::vector<double> nodes() const {
        std::vector<double> out(size);
        for (std::size_t i = 0; i < size; ++i) out[i] = (*this)[i];
        return out;
    }

    /// Index of the node closest to x, clamped to the grid.
    std::size_t nearest(double x) const {
        const double r = std::round((x - start) / step);
        if (r <= 0.0) return 0;
        return std::min(size - 1, static_cast<std::size_t>(r));
    }

    bool same_as(const UniformGrid& o, double rel = 1e-12) const {
        const double tol = rel * std::max({1.0, std::abs(start), std::abs(back())});
        return size == o.size && std::abs(start - o.start) <= tol &&
               std::abs(step - o.step) <= rel * std::abs(step);
    }
};

/// Trapezoid weights for an arbitrary strictly increasing node set.
inline std::vector<double> trapezoid_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

inline std::vector<double> trapezoid_weights(const UniformGrid& g) {
    std::vector<double> w(g.size, g.step);
    if (!w.empty()) {
        w.front() *= 0.5;
        w.back() *= 0.5;
    }
    return w;
}

inline double trapezoid(std::span<const double> f, const UniformGrid& g) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) s += f[i] + f[i + 1];
    return 0.5 * g.step * s;
}

/// Trapezoid integral restricted to mask, treating each maximal masked run
/// as its own interval.
inline double trapezoid_masked(std::span<const double> f, const UniformGrid& g,
                               std::span<const std::uint8_t> mask) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        if (mask[i] && mask[i + 1]) s += 0.5 * g.step * (f[i] + f[i + 1]);
    }
    return s;
}

/// Fornberg's recursion: weights w[k][j] for the k-th derivative at z using
/// nodes x[0..n-1], for k = 0..max_deriv.
inline std::vector<std::vector<double>> fornberg_weights(double z, std::span<const double> x,
                                                         int max_deriv) {
    const int n = static_cast<int>(x.size());
    const int m = max_deriv;
    std::vector<std::vector<double>> c(static_cast<std::size_t>(m + 1),
                                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
    double c1 = 1.0;
    double c4 = x[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[static_cast<std::size_t>(i)] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) {
                    c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) {
                c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

/// Finite-difference operator for the d-th derivative with formal accuracy
/// `order` on a uniform grid. Interior rows are centred; rows whose centred
/// window would leave the grid use the nearest in-range window of width
/// max(centred width, d + order).
class Stencil {
  public:
    Stencil() = default;

    Stencil(int deriv, int order, std::size_t n, double h) : deriv_(deriv), n_(n) {
        if (deriv < 1 || order < 1 || order % 2 != 0) {
            throw ValidationError("stencil needs deriv >= 1 and an even order");
        }
        const int centred = 2 * ((deriv + 1) / 2) - 1 + order;
        half_ = centred / 2;
        const int onesided = std::max(centred, deriv + order);
        if (n < static_cast<std::size_t>(onesided)) {
            throw ValidationError("grid of " + std::to_string(n) + " points too short for a " +
                                  std::to_string(onesided) + "-point stencil");
        }
        const double scale = std::pow(h, -deriv);

        std::vector<double> offs(static_cast<std::size_t>(centred));
        for (int k = 0; k < centred; ++k) offs[static_cast<std::size_t>(k)] = k - half_;
        centre_ = fornberg_weights(0.0, offs, deriv)[static_cast<std::size_t>(deriv)];
        for (double& w : centre_) w *= scale;

        // Closures for the first and last `half_` rows.
        const auto width = static_cast<std::size_t>(onesided);
        std::vector<double> nodes(width);
        for (std::size_t k = 0; k < width; ++k) nodes[k] = static_cast<double>(k);
        for (int r = 0; r < half_; ++r) {
            auto w = fornberg_weights(static_cast<double>(r), nodes, deriv)[static_cast<std::size_t>(deriv)];
            for (double& v : w) v *= scale;
            left_.push_back(w);
            // Mirror for the right edge: node k counted from the end.
            auto wr = fornberg_weights(static_cast<double>(onesided - 1 - r), nodes,
                                       deriv)[static_cast<std::size_t>(deriv)];
            for (double& v : wr) v *= scale;
            right_.push_back(wr);
        }
        width_ = width;
    }

    std::size_t size() const { return n_; }
    int derivative() const { return deriv_; }

    void apply(std::span<const double> f, std::span<double> out) const {
        const std::size_t n = n_;
        const auto h = static_cast<std::size_t>(half_);
        for (std::size_t r = 0; r < h; ++r) {
            double s = 0.0;
            for (std::size_t k = 0; k < width_; ++k) s += left_[r][k] * f[k];
            out[r] = s;
            double t = 0.0;
            const std::size_t base = n - width_;
            for (std::size_t k = 0; k < width_; ++k) t += right_[r][k] * f[base + k];
            out[n - 1 - r] = t;
        }
        for (std::size_t i = h; i + h < n; ++i) {
            double s = 0.0;
            const std::size_t base = i - h;
            for (std::size_t k = 0; k < centre_.size(); ++k) s += centre_[k] * f[base + k];
            out[i] = s;
        }
    }

    std::vector<double> operator()(std::span<const double> f) const {
        if (f.size() != n_) throw ValidationError("stencil applied to a field of the wrong length");
        std::vector<double> out(n_);
        apply(f, out);
        return out;
    }

  private:
    int deriv_ = 1;
    int half_ = 0;
    std::size_t n_ = 0;
    std::size_t width_ = 0;
    std::vector<double> centre_;
    std::vector<std::vector<double>> left_;
    std::vector<std::vector<double>> right_;
};

/// First-derivative operator with the summation-by-parts property
/// H D + (H D)^T = diag(-1, 0, ..., 0, 1) for the diagonal norm H returned by
/// norm(). Interior rows are the centred stencils of order 2 or 4; boundary
/// closures (order 1 or 2) are the classical diagonal-norm ones.
class SbpDerivative {
  public:
    SbpDerivative() = default;

    SbpDerivative(int order, std::size_t n, double h) : n_(n), h_(h) {
        if (order == 2) {
            interior_ = {-0.5, 0.0, 0.5};
            block_ = {{-1.0, 1.0}};
            norm_ = {0.5};
        } else if (order == 4) {
            interior_ = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
            block_ = {{-24.0 / 17, 59.0 / 34, -4.0 / 17, -3.0 / 34},
                      {-0.5, 0.0, 0.5},
                      {4.0 / 43, -59.0 / 86, 0.0, 59.0 / 86, -4.0 / 43},
                      {3.0 / 98, 0.0, -59.0 / 98, 0.0, 32.0 / 49, -4.0 / 49}};
            norm_ = {17.0 / 48, 59.0 / 48, 43.0 / 48, 49.0 / 48};
        } else {
            throw ValidationError("summation-by-parts operator needs order 2 or 4");
        }
        if (n < 2 * block_.size() + 2) throw ValidationError("grid too short for the boundary closure");
    }

    std::size_t size() const { return n_; }

    /// Diagonal of H (already scaled by h).
    std::vector<double> norm() const {
        std::vector<double> w(n_, h_);
        for (std::size_t r = 0; r < norm_.size(); ++r) {
            w[r] = norm_[r] * h_;
            w[n_ - 1 - r] = norm_[r] * h_;
        }
        return w;
    }

    void apply(std::span<const double> f, std::span<double> out) const {
        const std::size_t n = n_;
        const std::size_t b = block_.size();
        const std::size_t half = interior_.size() / 2;
        const double inv = 1.0 / h_;
        for (std::size_t r = 0; r < b; ++r) {
            double s = 0.0;
            double t = 0.0;
            for (std::size_t k = 0; k < block_[r].size(); ++k) {
                s += block_[r][k] * f[k];
                t -= block_[r][k] * f[n - 1 - k];
            }
            out[r] = s * inv;
            out[n - 1 - r] = t * inv;
        }
        for (std::size_t i = b; i + b < n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < interior_.size(); ++k) s += interior_[k] * f[i - half + k];
            out[i] = s * inv;
        }
    }

    std::vector<double> operator()(std::span<const double> f) const {
        if (f.size() != n_) throw ValidationError("operator applied to a field of the wrong length");
        std::vector<double> out(n_);
        apply(f, out);
        return out;
    }

  private:
    std::size_t n_ = 0;
    double h_ = 1.0;
    std::vector<double> interior_;
    std::vector<std::vector<double>> block_;
    std::vector<double> norm_;
};

/// Thread cap from QFLOW_THREADS (unset or invalid: hardware concurrency).
inline unsigned thread_cap() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QFLOW_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<unsigned>(std::min<long>(v, hw));
    }
    return hw;
}

/// Runs body(i) for i in [0, n). Each index is written by exactly one call,
/// so results do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned threads = std::min<std::size_t>(thread_cap(), std::max<std::size_t>(n, 1));
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace qflow
