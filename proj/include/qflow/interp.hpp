#pragma once

// Piecewise cubic Hermite interpolation on strictly increasing nodes, with an
// optional Fritsch-Carlson limiter that keeps monotone data monotone.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qflow/errors.hpp"

namespace qflow {

class CubicHermite {
  public:
    CubicHermite() = default;

    /// Nodal slopes given explicitly. With `monotone` set, the data must be
    /// strictly increasing and slopes are limited so that every cell stays
    /// monotone.
    CubicHermite(std::vector<double> x, std::vector<double> y, std::vector<double> slope,
                 bool monotone = false)
        : x_(std::move(x)), y_(std::move(y)), m_(std::move(slope)) {
        check();
        if (monotone) limit();
    }

    /// Shape-preserving slopes (harmonic mean of neighbouring secants) with
    /// linear end cells.
    static CubicHermite monotone_from_data(std::vector<double> x, std::vector<double> y) {
        const std::size_t n = x.size();
        if (n < 2 || y.size() != n) throw ValidationError("interpolation needs >= 2 matching nodes");
        std::vector<double> m(n, 0.0);
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        m.front() = d.front();
        m.back() = d.back();
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0.0) {
                m[i] = 0.0;
            } else {
                const double h0 = x[i] - x[i - 1];
                const double h1 = x[i + 1] - x[i];
                const double w0 = 2.0 * h1 + h0;
                const double w1 = h1 + 2.0 * h0;
                m[i] = (w0 + w1) / (w0 / d[i - 1] + w1 / d[i]);
            }
        }
        CubicHermite c(std::move(x), std::move(y), std::move(m), false);
        c.linear_ends_ = true;
        return c;
    }

    std::size_t size() const { return x_.size(); }
    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    bool contains(double x) const { return x >= x_.front() && x <= x_.back(); }

    double operator()(double x) const { return eval(x).first; }
    double derivative(double x) const { return eval(x).second; }

    /// (value, derivative) at x; x must lie inside [front, back].
    std::pair<double, double> eval(double x) const {
        if (!contains(x)) throw ValidationError("interpolation point outside node range");
        const std::size_t i = cell(x);
        const double h = x_[i + 1] - x_[i];
        if (linear_ends_ && (i == 0 || i + 2 == x_.size())) {
            const double d = (y_[i + 1] - y_[i]) / h;
            return {y_[i] + d * (x - x_[i]), d};
        }
        const double s = (x - x_[i]) / h;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double y0 = y_[i], y1 = y_[i + 1];
        const double m0 = m_[i] * h, m1 = m_[i + 1] * h;
        const double v = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 +
                         (s3 - s2) * m1;
        const double dv =
            ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * m1) /
            h;
        return {v, dv};
    }

  private:
    void check() const {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n || m_.size() != n) {
            throw ValidationError("interpolation needs >= 2 nodes with matching values and slopes");
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!(x_[i + 1] > x_[i])) throw ValidationError("interpolation nodes not strictly increasing");
        }
    }

    void limit() {
        const std::size_t n = x_.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double d = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
            if (!(d > 0.0)) throw ValidationError("monotone interpolation needs strictly increasing data");
        }
        for (std::size_t i = 0; i < n; ++i) m_[i] = std::max(m_[i], 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double d = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
            const double a = m_[i] / d;
            const double b = m_[i + 1] / d;
            const double r = a * a + b * b;
            if (r > 9.0) {
                const double tau = 3.0 / std::sqrt(r);
                m_[i] = tau * a * d;
                m_[i + 1] = tau * b * d;
            }
        }
    }

    std::size_t cell(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
        if (i == 0) return 0;
        return std::min(i - 1, x_.size() - 2);
    }

    std::vector<double> x_, y_, m_;
    bool linear_ends_ = false;
};

}  // namespace qflow
