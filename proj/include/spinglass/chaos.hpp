#pragma once

#include <cmath>
#include <vector>

#include "spinglass/mixture.hpp"
#include "spinglass/parisi.hpp"
#include "spinglass/quadrature.hpp"
#include "spinglass/roots.hpp"

namespace spinglass {

// Smallest c in [0,1) with c = E tanh^2(h + z sqrt(xi'(c))).  c = 0 is always
// admissible when the field vanishes; with a nondegenerate field the scan
// starts from g(0) = E tanh^2(h) > 0 and brackets the first crossing.
inline double rs_fixed_point(const MixtureSpec& spec, const FieldMarginal& field,
                             int quad_n = 64) {
    if (field.degenerate()) return 0.0;
    const QuadratureRule quad = hermite_rule(quad_n);
    auto g = [&](double c) {
        const double sd = std::sqrt(field.std * field.std + spec.xi(c, 1));
        const double e = gauss_expect(quad, field.mean, sd, [](double y) {
            const double t = std::tanh(y);
            return t * t;
        });
        return e - c;
    };
    if (g(0.0) <= 0.0) return 0.0;
    double lo = 0.0;
    const int scan = 4000;
    for (int i = 1; i <= scan; ++i) {
        const double c = static_cast<double>(i) / scan;
        if (g(c) <= 0.0) return find_root(g, lo, c, 1e-12);
        lo = c;
    }
    return 1.0; // not reachable: g(1) = E tanh^2 - 1 < 0
}

// AT stability index xi''(c) E sech^4(h + z sqrt(xi'(c))); > 1 flags RS instability.
inline double at_index(const MixtureSpec& spec, const FieldMarginal& field, double c,
                       int quad_n = 64) {
    if (!(c >= 0.0 && c < 1.0)) throw domain_error("at_index: c must lie in [0,1)");
    const QuadratureRule quad = hermite_rule(quad_n);
    const double sd = std::sqrt(field.std * field.std + spec.xi(c, 1));
    const double e = gauss_expect(quad, field.mean, sd, [](double y) {
        const double s = 1.0 / std::cosh(y);
        return s * s * s * s;
    });
    return spec.xi(c, 2) * e;
}

// Smallest atom location of the induced measure carrying mass > mass_tol;
// falls back to the heaviest atom's location if none qualifies.
inline double support_min(const OrderParameterTriplet& triplet, double mass_tol = 0.01) {
    triplet.validate();
    const auto atoms = triplet.atoms();
    double best_loc = 0.0, best_mass = -1.0;
    for (const auto& a : atoms) {
        if (a.second > mass_tol) return a.first;
        if (a.second > best_mass) {
            best_mass = a.second;
            best_loc = a.first;
        }
    }
    return best_loc;
}

// phi_{v1,v2}(u) = E dPhi1(h^1 + chi^1, v1) dPhi2(h^2 + chi^2, v2) with the
// joint field law folded into the Gaussian pair.  Profiles are fixed per
// (v1, v2); u only moves the cross covariance, so a kernel is reused across u.
class CouplingKernel {
public:
    CouplingKernel(const CoupledModelSpec& coupled, GridFunction profile1, GridFunction profile2,
                   double v1, double v2, int quad_n = 48)
        : coupled_(&coupled),
          prof1_(std::move(profile1)),
          prof2_(std::move(profile2)),
          v1_(v1),
          v2_(v2),
          quad_(hermite_rule(quad_n)) {
        if (!(v1 > 0.0 && v1 <= 1.0) || !(v2 > 0.0 && v2 <= 1.0))
            throw domain_error("phi_coupling: v1, v2 must lie in (0,1]");
        const FieldLaw& f = coupled.field_law();
        var1_ = f.std1 * f.std1 + coupled.spec1().xi(v1, 1);
        var2_ = f.std2 * f.std2 + coupled.spec2().xi(v2, 1);
        fcov_ = f.std1 * f.std2 * f.corr;
        mean1_ = f.mean1;
        mean2_ = f.mean2;
    }

    double bound() const { return std::sqrt(v1_ * v2_); }

    double operator()(double u) const {
        if (!(std::fabs(u) <= bound() + 1e-15))
            throw domain_error("phi_coupling: |u| must be <= sqrt(v1 v2)");
        const double cov = fcov_ + coupled_->cross_xi(u, 1);
        PairGauss pg(var1_, var2_, cov);
        return pg.expect_product(
            quad_, mean1_, mean2_, [&](double x) { return prof1_.eval_d1(x); },
            [&](double x) { return prof2_.eval_d1(x); });
    }

private:
    const CoupledModelSpec* coupled_;
    GridFunction prof1_, prof2_;
    double v1_, v2_;
    QuadratureRule quad_;
    double var1_ = 0, var2_ = 0, fcov_ = 0, mean1_ = 0, mean2_ = 0;
};

inline double phi_coupling(const CoupledModelSpec& coupled, const ParisiSolution& sol1,
                           const ParisiSolution& sol2, double v1, double v2, double u,
                           int quad_n = 48) {
    CouplingKernel kernel(coupled, sol1.phi_at(v1), sol2.phi_at(v2), v1, v2, quad_n);
    return kernel(u);
}

struct FixedPointResult {
    double u_f = 0.0;
    double residual = 0.0;
    int iterations = 0;
    double max_abs_derivative = 0.0;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    bool contraction_ok = true;
};

// Fixed point of phi_{c1,c2}: damped iteration from 0 with a bisection
// fallback on phi(u) - u.  Also estimates max |phi'| on the interior by
// central differences as the contraction witness.
inline FixedPointResult find_uf(const CoupledModelSpec& coupled, const ParisiSolution& sol1,
                                const ParisiSolution& sol2, double c1, double c2, double tol,
                                int quad_n = 48) {
    if (!(c1 > 0.0 && c1 <= 1.0) || !(c2 > 0.0 && c2 <= 1.0))
        throw domain_error("find_uf: c1, c2 must lie in (0,1]");
    CouplingKernel kernel(coupled, sol1.phi_at(c1), sol2.phi_at(c2), c1, c2, quad_n);
    const double B = kernel.bound();

    FixedPointResult res;
    res.bracket_lo = -B;
    res.bracket_hi = B;

    double u = 0.0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const double r = kernel(u) - u;
        res.iterations = it + 1;
        res.residual = std::fabs(r);
        if (res.residual <= tol) {
            converged = true;
            break;
        }
        u += 0.5 * r; // damping 0.5
        u = std::min(B, std::max(-B, u));
    }
    if (!converged) {
        u = find_root([&](double x) { return kernel(x) - x; }, -B, B, tol);
        res.residual = std::fabs(kernel(u) - u);
    }
    res.u_f = u;

    // contraction witness on an interior grid
    const int pts = 33;
    const double du = std::min(1e-4, B / 256.0);
    double dmax = 0.0;
    for (int i = 1; i < pts; ++i) {
        const double x = -B + 2.0 * B * i / pts;
        if (x - du < -B || x + du > B) continue;
        const double d = (kernel(x + du) - kernel(x - du)) / (2.0 * du);
        dmax = std::max(dmax, std::fabs(d));
    }
    res.max_abs_derivative = dmax;
    res.contraction_ok = dmax < 1.0 - 1e-6;
    return res;
}

} // namespace spinglass
