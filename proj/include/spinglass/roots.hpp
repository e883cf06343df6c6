#pragma once

#include <cmath>
#include <functional>

#include "spinglass/errors.hpp"

namespace spinglass {

// Bracketing root finder: bisection with secant acceleration.  Returns x with
// |f(x)| <= tol or bracket width <= tol.  Deterministic: identical inputs
// produce bit-identical outputs.
template <typename F>
double find_root(F&& f, double lo, double hi, double tol) {
    if (!(lo <= hi)) throw domain_error("find_root: lo > hi");
    double flo = f(lo), fhi = f(hi);
    if (std::fabs(flo) <= tol) return lo;
    if (std::fabs(fhi) <= tol) return hi;
    if (flo * fhi > 0.0) throw domain_error("find_root: no sign change on bracket");

    double x = lo, fx = flo;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        // secant proposal, rejected unless it falls safely inside the bracket
        double cand = hi - fhi * (hi - lo) / (fhi - flo);
        const double width = hi - lo;
        if (!std::isfinite(cand) || cand <= lo + 0.01 * width || cand >= hi - 0.01 * width)
            cand = 0.5 * (lo + hi);
        x = cand;
        fx = f(x);
        if (std::fabs(fx) <= tol) return x;
        if (flo * fx <= 0.0) {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
    }
    return 0.5 * (lo + hi);
}

// Golden-section minimizer on [lo, hi]; unimodal f assumed.
template <typename F>
double golden_minimize(F&& f, double lo, double hi, double xtol, int max_iter = 200) {
    const double phi = 0.6180339887498948482;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < max_iter && b - a > xtol; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

} // namespace spinglass
