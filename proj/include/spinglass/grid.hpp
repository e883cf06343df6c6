#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "spinglass/errors.hpp"

namespace spinglass {

// Uniform x-grid, x_i = x0 + i*dx for i in [0, n).
struct UniformGrid {
    double x0 = 0.0;
    double dx = 0.0;
    int n = 0;

    double at(int i) const { return x0 + i * dx; }
    double back() const { return x0 + (n - 1) * dx; }

    static UniformGrid symmetric(double half_width, int points) {
        if (points < 8) throw domain_error("UniformGrid: need at least 8 points");
        return {-half_width, 2.0 * half_width / (points - 1), points};
    }
};

// 4-point Lagrange cubic on a uniform grid; linear extension with the
// one-sided boundary slope outside [x0, x_end].  The level functions are
// asymptotically linear (tanh saturation), so the extension is benign.
inline double interp_cubic(const UniformGrid& g, const std::vector<double>& f, double x) {
    const double s = (x - g.x0) / g.dx;
    if (s <= 0.0) {
        const double slope = (f[1] - f[0]) / g.dx;
        return f[0] + (x - g.x0) * slope;
    }
    if (s >= g.n - 1) {
        const double slope = (f[g.n - 1] - f[g.n - 2]) / g.dx;
        return f[g.n - 1] + (x - g.back()) * slope;
    }
    int i = static_cast<int>(s);
    if (i < 1) i = 1;
    if (i > g.n - 3) i = g.n - 3;
    const double t = s - i;
    const double w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    const double w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    const double w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    const double w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    return w0 * f[i - 1] + w1 * f[i] + w2 * f[i + 1] + w3 * f[i + 2];
}

// Sampled function with x-derivatives 0..3.  d1..d3 are centered finite
// differences of d0 (second order; one-sided at the edges).
struct GridFunction {
    UniformGrid grid;
    std::vector<double> d0, d1, d2, d3;

    double eval(double x) const { return interp_cubic(grid, d0, x); }
    double eval_d1(double x) const { return interp_cubic(grid, d1, x); }
    double eval_d2(double x) const { return interp_cubic(grid, d2, x); }
    double eval_d3(double x) const { return interp_cubic(grid, d3, x); }
};

inline std::vector<double> centered_derivative(const UniformGrid& g, const std::vector<double>& f) {
    std::vector<double> d(g.n);
    const double inv2h = 1.0 / (2.0 * g.dx);
    for (int i = 1; i + 1 < g.n; ++i) d[i] = (f[i + 1] - f[i - 1]) * inv2h;
    // second-order one-sided ends
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2h;
    d[g.n - 1] = (3.0 * f[g.n - 1] - 4.0 * f[g.n - 2] + f[g.n - 3]) * inv2h;
    return d;
}

inline GridFunction make_grid_function(const UniformGrid& g, std::vector<double> values) {
    GridFunction out;
    out.grid = g;
    out.d0 = std::move(values);
    out.d1 = centered_derivative(g, out.d0);
    out.d2 = centered_derivative(g, out.d1);
    out.d3 = centered_derivative(g, out.d2);
    return out;
}

// log(cosh x) without overflow
inline double log_cosh(double x) {
    const double a = std::fabs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - 0.6931471805599453094172321214582;
}

} // namespace spinglass
