#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "spinglass/errors.hpp"
#include "spinglass/grid.hpp"
#include "spinglass/mixture.hpp"
#include "spinglass/quadrature.hpp"

namespace spinglass {

// Discrete functional order parameter (k, m, q):
//   m_0 = 0 <= m_1 <= ... <= m_{k+1} = 1,
//   q_0 = 0 <= q_1 <= ... <= q_{k+1} <= q_{k+2} = 1,
// read as the measure mu with mu([0, q_p]) = m_p.
struct OrderParameterTriplet {
    int k = 0;
    std::vector<double> m; // size k+2
    std::vector<double> q; // size k+3

    void validate() const {
        if (k < 0) throw domain_error("triplet: k must be >= 0");
        if (m.size() != static_cast<std::size_t>(k + 2) ||
            q.size() != static_cast<std::size_t>(k + 3))
            throw domain_error("triplet: m must have k+2 entries and q k+3");
        if (m.front() != 0.0 || m.back() != 1.0)
            throw domain_error("triplet: m_0 = 0 and m_{k+1} = 1 required");
        if (q.front() != 0.0 || q.back() != 1.0)
            throw domain_error("triplet: q_0 = 0 and q_{k+2} = 1 required");
        for (std::size_t i = 1; i < m.size(); ++i)
            if (!(m[i] >= m[i - 1])) throw domain_error("triplet: m must be nondecreasing");
        for (std::size_t i = 1; i < q.size(); ++i)
            if (!(q[i] >= q[i - 1])) throw domain_error("triplet: q must be nondecreasing");
        for (double v : q)
            if (!(v >= 0.0 && v <= 1.0)) throw domain_error("triplet: q must lie in [0,1]");
    }

    // mu([0, x])
    double cdf(double x) const {
        if (x < q[0]) return 0.0;
        int p = 0;
        for (int i = 1; i <= k + 1; ++i)
            if (q[i] <= x) p = i;
        return m[p];
    }

    // merged (location, mass) pairs with positive mass
    std::vector<std::pair<double, double>> atoms() const {
        std::vector<std::pair<double, double>> out;
        for (int p = 1; p <= k + 1; ++p) {
            const double mass = m[p] - m[p - 1];
            if (mass <= 0.0) continue;
            if (!out.empty() && out.back().first == q[p])
                out.back().second += mass;
            else
                out.emplace_back(q[p], mass);
        }
        return out;
    }
};

inline OrderParameterTriplet rs_triplet(double q1) {
    return OrderParameterTriplet{0, {0.0, 1.0}, {0.0, q1, 1.0}};
}

// Exact integral of |cdf difference| between the two induced measures.
inline double measure_distance(const OrderParameterTriplet& a, const OrderParameterTriplet& b) {
    a.validate();
    b.validate();
    std::vector<double> brk{0.0, 1.0};
    for (const auto& at : a.atoms()) brk.push_back(at.first);
    for (const auto& at : b.atoms()) brk.push_back(at.first);
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < brk.size(); ++i)
        acc += std::fabs(a.cdf(brk[i]) - b.cdf(brk[i])) * (brk[i + 1] - brk[i]);
    return acc;
}

struct EvalSettings {
    int quad_n = 40;
    int grid_points = 4097;
    double min_half_width = 8.0;
};

namespace detail {

// canonical (merged) measure arrays: zero-mass atoms dropped, ties combined
struct CanonicalMeasure {
    std::vector<double> m; // m_0..m_{K+1}
    std::vector<double> q; // q_0..q_{K+2}
    int K = 0;
};

inline CanonicalMeasure canonicalize(const OrderParameterTriplet& t) {
    const auto at = t.atoms();
    CanonicalMeasure c;
    c.K = std::max(0, static_cast<int>(at.size()) - 1);
    c.m.assign(1, 0.0);
    c.q.assign(1, 0.0);
    if (at.empty()) {
        // no positive mass can only mean ill-formed input; validate() prevents it
        c.m.push_back(1.0);
        c.q.push_back(0.0);
    } else {
        double cum = 0.0;
        for (const auto& a : at) {
            cum += a.second;
            c.m.push_back(cum);
            c.q.push_back(a.first);
        }
        c.m.back() = 1.0;
    }
    c.q.push_back(1.0);
    c.K = static_cast<int>(c.m.size()) - 2;
    return c;
}

// out(x) = (1/mp) log E exp(mp * f(x + s z)); plain expectation when mp = 0
inline std::vector<double> level_step(const UniformGrid& g, const std::vector<double>& f,
                                      double s, double mp, const QuadratureRule& quad) {
    if (s == 0.0) return f;
    std::vector<double> out(g.n);
    std::vector<double> buf(quad.size());
    for (int i = 0; i < g.n; ++i) {
        const double x = g.at(i);
        double mx = -1e300;
        for (int j = 0; j < quad.size(); ++j) {
            buf[j] = interp_cubic(g, f, x + s * quad.nodes[j]);
            mx = std::max(mx, buf[j]);
        }
        if (mp > 0.0) {
            double acc = 0.0;
            for (int j = 0; j < quad.size(); ++j)
                acc += quad.weights[j] * std::exp(mp * (buf[j] - mx));
            out[i] = mx + std::log(acc) / mp;
        } else {
            double acc = 0.0;
            for (int j = 0; j < quad.size(); ++j) acc += quad.weights[j] * buf[j];
            out[i] = acc;
        }
    }
    return out;
}

// A_p'(x) = E[w~ A_{p+1}'(x + s z)] with tilted weights w~ ~ exp(mp A_{p+1});
// exact (up to quadrature) unlike finite differences of the value table
inline std::vector<double> level_step_derivative(const UniformGrid& g,
                                                 const std::vector<double>& f_next,
                                                 const std::vector<double>& d_next, double s,
                                                 double mp, const QuadratureRule& quad) {
    if (s == 0.0) return d_next;
    std::vector<double> out(g.n);
    std::vector<double> fa(quad.size()), da(quad.size());
    for (int i = 0; i < g.n; ++i) {
        const double x = g.at(i);
        double mx = -1e300;
        for (int j = 0; j < quad.size(); ++j) {
            const double xx = x + s * quad.nodes[j];
            fa[j] = interp_cubic(g, f_next, xx);
            da[j] = interp_cubic(g, d_next, xx);
            mx = std::max(mx, fa[j]);
        }
        if (mp > 0.0) {
            double num = 0.0, den = 0.0;
            for (int j = 0; j < quad.size(); ++j) {
                const double w = quad.weights[j] * std::exp(mp * (fa[j] - mx));
                num += w * da[j];
                den += w;
            }
            out[i] = num / den;
        } else {
            double num = 0.0;
            for (int j = 0; j < quad.size(); ++j) num += quad.weights[j] * da[j];
            out[i] = num;
        }
    }
    return out;
}

struct LevelSet {
    UniformGrid grid;
    QuadratureRule quad;
    CanonicalMeasure cm;
    std::vector<std::vector<double>> tables; // A_0 .. A_{K+2}
};

inline double variance_increment(const MixtureSpec& spec, double qa, double qb) {
    const double v = spec.xi(qb, 1) - spec.xi(qa, 1);
    if (v < -1e-12) throw numerical_error("parisi: negative variance increment");
    return std::max(0.0, v);
}

inline LevelSet build_levels(const MixtureSpec& spec, const FieldMarginal& field,
                             const OrderParameterTriplet& triplet, const EvalSettings& st) {
    triplet.validate();
    LevelSet ls;
    ls.cm = canonicalize(triplet);
    const double width = std::max(
        st.min_half_width,
        std::fabs(field.mean) + 6.0 * std::sqrt(spec.xi(1.0, 1) + field.std * field.std));
    ls.grid = UniformGrid::symmetric(width, st.grid_points);
    ls.quad = hermite_rule(st.quad_n);

    const int K = ls.cm.K;
    ls.tables.assign(K + 3, {});
    auto& top = ls.tables[K + 2];
    top.resize(ls.grid.n);
    for (int i = 0; i < ls.grid.n; ++i) top[i] = log_cosh(ls.grid.at(i));
    for (int p = K + 1; p >= 0; --p) {
        const double s = std::sqrt(variance_increment(spec, ls.cm.q[p], ls.cm.q[p + 1]));
        ls.tables[p] = level_step(ls.grid, ls.tables[p + 1], s, ls.cm.m[p], ls.quad);
    }
    return ls;
}

} // namespace detail

// Evaluated Parisi functional: value, X_0, the sampled level functions A_p on
// the shared x-grid and everything needed to reconstruct Phi profiles.
struct ParisiSolution {
    double value = 0.0;
    double x0 = 0.0;
    OrderParameterTriplet triplet;
    MixtureSpec spec;
    FieldMarginal field;
    EvalSettings settings;
    UniformGrid grid;
    std::vector<double> level_m, level_q;            // canonical arrays
    std::vector<std::vector<double>> level_tables;    // A_0 .. A_{K+2}
    QuadratureRule quad;

    int canonical_k() const { return static_cast<int>(level_m.size()) - 2; }

    GridFunction level_function(int p) const {
        return make_grid_function(grid, level_tables.at(p));
    }

    // Phi_mu(., q) by the representation through the bracketing level
    GridFunction phi_at(double qe) const {
        if (!(qe >= 0.0 && qe <= 1.0)) throw domain_error("phi_at: q must lie in [0,1]");
        const int K = canonical_k();
        if (qe >= 1.0) return make_grid_function(grid, level_tables[K + 2]);
        int p = 0;
        while (p + 1 <= K + 1 && level_q[p + 1] <= qe) ++p;
        const double var = spec.xi(level_q[p + 1], 1) - spec.xi(qe, 1);
        auto vals = detail::level_step(grid, level_tables[p + 1], std::sqrt(std::max(0.0, var)),
                                       level_m[p], quad);
        return make_grid_function(grid, std::move(vals));
    }
};

// P_k(m, q) by the backward recursion.  Gaussian increments have variance
// xi'(q_{p+1}) - xi'(q_p); m_p = 0 levels take a plain expectation.
inline ParisiSolution evaluate_functional(const MixtureSpec& spec, const FieldMarginal& field,
                                          const OrderParameterTriplet& triplet,
                                          const EvalSettings& st = {}) {
    auto ls = detail::build_levels(spec, field, triplet, st);
    ParisiSolution sol;
    sol.triplet = triplet;
    sol.spec = spec;
    sol.field = field;
    sol.settings = st;
    sol.grid = ls.grid;
    sol.level_m = ls.cm.m;
    sol.level_q = ls.cm.q;
    sol.level_tables = std::move(ls.tables);
    sol.quad = ls.quad;

    const auto& a0 = sol.level_tables[0];
    double x0 = 0.0;
    if (field.std == 0.0) {
        x0 = interp_cubic(sol.grid, a0, field.mean);
    } else {
        for (int j = 0; j < sol.quad.size(); ++j)
            x0 += sol.quad.weights[j] *
                  interp_cubic(sol.grid, a0, field.mean + field.std * sol.quad.nodes[j]);
    }
    sol.x0 = x0;

    const int K = sol.canonical_k();
    double corr = 0.0;
    for (int p = 1; p <= K + 1; ++p)
        corr += sol.level_m[p] * (spec.theta(sol.level_q[p + 1]) - spec.theta(sol.level_q[p]));
    sol.value = 0.6931471805599453094172321214582 + x0 - 0.5 * corr;
    return sol;
}

inline ParisiSolution evaluate_functional(const MixtureSpec& spec, const FieldMarginal& field,
                                          const OrderParameterTriplet& triplet, int quad_n) {
    EvalSettings st;
    st.quad_n = quad_n;
    return evaluate_functional(spec, field, triplet, st);
}

// Phi_mu(., q_eval) with x-derivatives; the field does not enter Phi.
inline GridFunction phi_profile(const MixtureSpec& spec, const OrderParameterTriplet& triplet,
                                double q_eval, const EvalSettings& st = {}) {
    if (!(q_eval >= 0.0 && q_eval <= 1.0)) throw domain_error("phi_profile: q in [0,1] required");
    auto ls = detail::build_levels(spec, FieldMarginal{}, triplet, st);
    const int K = ls.cm.K;
    if (q_eval >= 1.0) return make_grid_function(ls.grid, ls.tables[K + 2]);
    int p = 0;
    while (p + 1 <= K + 1 && ls.cm.q[p + 1] <= q_eval) ++p;
    const double var = spec.xi(ls.cm.q[p + 1], 1) - spec.xi(q_eval, 1);
    auto vals = detail::level_step(ls.grid, ls.tables[p + 1], std::sqrt(std::max(0.0, var)),
                                   ls.cm.m[p], ls.quad);
    return make_grid_function(ls.grid, std::move(vals));
}

// Right-continuous step function on [0,1], used as mu([0, .]) for the PDE.
struct StepCdf {
    std::vector<double> locs; // ascending jump locations
    std::vector<double> vals; // value on [locs[i], locs[i+1})
    double operator()(double x) const {
        if (locs.empty() || x < locs.front()) return 0.0;
        std::size_t p = 0;
        while (p + 1 < locs.size() && locs[p + 1] <= x) ++p;
        return vals[p];
    }
    void validate() const {
        if (locs.size() != vals.size()) throw domain_error("StepCdf: size mismatch");
        for (std::size_t i = 1; i < locs.size(); ++i)
            if (!(locs[i] >= locs[i - 1]) || !(vals[i] >= vals[i - 1]))
                throw domain_error("StepCdf: must be nondecreasing");
        for (double v : vals)
            if (!(v >= 0.0 && v <= 1.0)) throw domain_error("StepCdf: values in [0,1] required");
    }
};

inline StepCdf cdf_of(const OrderParameterTriplet& t) {
    StepCdf c;
    double cum = 0.0;
    for (const auto& a : t.atoms()) {
        cum += a.second;
        c.locs.push_back(a.first);
        c.vals.push_back(std::min(1.0, cum));
    }
    return c;
}

// Backward finite-difference solution of
//   dPhi/dq = -(xi''(q)/2) (Phi_xx + mu([0,q]) Phi_x^2),  Phi(x,1) = log cosh x,
// returned at the requested q values (pass 0.0 to get the q=0 slice).
// Explicit two-stage (Heun) stepping, fourth-order stencils inside, linear
// tanh-tail closure on a padded margin.  q_steps <= 0 picks the stability
// bound automatically; a positive q_steps is honored exactly and rejected if
// it violates the bound.
inline std::vector<GridFunction> phi_pde_solve(const MixtureSpec& spec, const StepCdf& cdf,
                                               const UniformGrid& grid, int q_steps,
                                               const std::vector<double>& eval_qs) {
    cdf.validate();
    for (double qe : eval_qs)
        if (!(qe >= 0.0 && qe <= 1.0)) throw domain_error("phi_pde_solve: q in [0,1] required");

    const double h = grid.dx;
    const double xipp_max = std::max(spec.xi(1.0, 2), 1e-300);
    const double dq_stable = h * h / (2.0 * xipp_max);
    int total_steps = std::max(1, static_cast<int>(std::ceil(1.0 / dq_stable)));
    if (q_steps > 0) {
        if (1.0 / q_steps > dq_stable * (1.0 + 1e-12))
            throw numerical_error("phi_pde_solve: q step violates the stability bound");
        total_steps = q_steps;
    }

    // padded working grid; the tanh tails are linear there
    const int pad = static_cast<int>(std::ceil(2.0 / h));
    UniformGrid wg{grid.x0 - pad * h, h, grid.n + 2 * pad};
    std::vector<double> f(wg.n), fs(wg.n), rhs0(wg.n), rhs1(wg.n);
    for (int i = 0; i < wg.n; ++i) f[i] = log_cosh(wg.at(i));

    // segment boundaries: eval points and cdf jumps, descending from 1
    std::vector<double> marks{0.0, 1.0};
    for (double qe : eval_qs) marks.push_back(qe);
    for (double l : cdf.locs)
        if (l > 0.0 && l < 1.0) marks.push_back(l);
    std::sort(marks.begin(), marks.end(), std::greater<>());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

    auto rhs = [&](const std::vector<double>& u, double q, double mu, std::vector<double>& out) {
        const double a = 0.5 * spec.xi(q, 2);
        const double ih2 = 1.0 / (12.0 * h * h);
        const double ih1 = 1.0 / (12.0 * h);
        for (int i = 2; i < wg.n - 2; ++i) {
            const double uxx =
                (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2]) * ih2;
            const double ux = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) * ih1;
            out[i] = a * (uxx + mu * ux * ux);
        }
        // margin rows: Phi_xx -> 0 and Phi_x -> +-1 in the linear tails
        out[0] = out[1] = out[wg.n - 2] = out[wg.n - 1] = a * mu;
    };

    std::vector<std::pair<double, std::vector<double>>> slices;
    const double base_dq = 1.0 / total_steps;
    for (std::size_t seg = 0; seg + 1 < marks.size(); ++seg) {
        const double q_hi = marks[seg], q_lo = marks[seg + 1];
        const int nsteps = std::max(1, static_cast<int>(std::ceil((q_hi - q_lo) / base_dq)));
        const double dq = (q_hi - q_lo) / nsteps;
        // the cdf jumps only at segment boundaries, so it is constant inside
        const double mu = cdf(0.5 * (q_hi + q_lo));
        double q = q_hi;
        for (int s = 0; s < nsteps; ++s) {
            rhs(f, q, mu, rhs0);
            for (int i = 0; i < wg.n; ++i) fs[i] = f[i] + dq * rhs0[i];
            rhs(fs, q - dq, mu, rhs1);
            for (int i = 0; i < wg.n; ++i) f[i] += 0.5 * dq * (rhs0[i] + rhs1[i]);
            q -= dq;
        }
        slices.emplace_back(q_lo, f);
    }

    std::vector<GridFunction> out;
    out.reserve(eval_qs.size());
    for (double qe : eval_qs) {
        const std::vector<double>* src = nullptr;
        std::vector<double> vals(grid.n);
        if (qe >= 1.0) {
            for (int i = 0; i < grid.n; ++i) vals[i] = log_cosh(grid.at(i));
        } else {
            for (const auto& s : slices)
                if (s.first == qe) src = &s.second;
            if (!src) throw numerical_error("phi_pde_solve: internal slice bookkeeping");
            for (int i = 0; i < grid.n; ++i) vals[i] = (*src)[i + pad];
        }
        out.push_back(make_grid_function(grid, std::move(vals)));
    }
    return out;
}

// Residuals E W_1...W_{r-1} A_r'(zeta_r)^2 - q_r for the eligible atoms
// (r >= 2, or r = 1 when q_1 > 0), by nested quadrature along the Gaussian
// path zeta_p = h + z_0 + ... + z_{p-1} with the change-of-measure weights
// W_p = exp(m_p (A_{p+1}(zeta_{p+1}) - A_p(zeta_p))).
inline std::vector<double> stationarity_residuals(const MixtureSpec& spec,
                                                  const FieldMarginal& field,
                                                  const OrderParameterTriplet& triplet,
                                                  const EvalSettings& st = {}) {
    triplet.validate();
    // no canonicalization: residual indices refer to the triplet as given
    const int k = triplet.k;
    const auto& m = triplet.m;
    const auto& q = triplet.q;

    const double width = std::max(
        st.min_half_width,
        std::fabs(field.mean) + 6.0 * std::sqrt(spec.xi(1.0, 1) + field.std * field.std));
    const UniformGrid grid = UniformGrid::symmetric(width, st.grid_points);
    const QuadratureRule quad = hermite_rule(st.quad_n);

    std::vector<std::vector<double>> tab(k + 3), dtab(k + 3);
    tab[k + 2].resize(grid.n);
    dtab[k + 2].resize(grid.n);
    for (int i = 0; i < grid.n; ++i) {
        tab[k + 2][i] = log_cosh(grid.at(i));
        dtab[k + 2][i] = std::tanh(grid.at(i));
    }
    std::vector<double> sdev(k + 2);
    for (int p = k + 1; p >= 0; --p) {
        sdev[p] = std::sqrt(detail::variance_increment(spec, q[p], q[p + 1]));
        dtab[p] = detail::level_step_derivative(grid, tab[p + 1], dtab[p + 1], sdev[p], m[p], quad);
        tab[p] = detail::level_step(grid, tab[p + 1], sdev[p], m[p], quad);
    }

    std::vector<double> residuals;
    for (int r = 1; r <= k + 1; ++r) {
        if (r == 1 && !(q[1] > 1e-6)) continue; // q_1 below grid tolerance: boundary case

        // E over the path down to level r, weights W_1..W_{r-1}
        // depth-first over quadrature nodes of (z_0, ..., z_{r-1})
        auto descend = [&](auto&& self, int p, double zeta) -> double {
            if (p == r) {
                const double d = interp_cubic(grid, dtab[r], zeta);
                return d * d;
            }
            const double s = sdev[p];
            const double ap = interp_cubic(grid, tab[p], zeta);
            double acc = 0.0;
            if (s == 0.0) {
                const double anext = interp_cubic(grid, tab[p + 1], zeta);
                const double logw = m[p] * (anext - ap);
                if (logw < -700.0)
                    throw numerical_error("stationarity_residuals: weight underflow at level " +
                                          std::to_string(p));
                return std::exp(logw) * self(self, p + 1, zeta);
            }
            for (int j = 0; j < quad.size(); ++j) {
                const double zn = zeta + s * quad.nodes[j];
                const double anext = interp_cubic(grid, tab[p + 1], zn);
                const double logw = m[p] * (anext - ap);
                if (logw < -700.0)
                    throw numerical_error("stationarity_residuals: weight underflow at level " +
                                          std::to_string(p));
                acc += quad.weights[j] * std::exp(logw) * self(self, p + 1, zn);
            }
            return acc;
        };

        // outermost: h and z_0 (level 0 always uses the plain expectation)
        auto outer = [&](double hval) -> double {
            const double s0 = sdev[0];
            if (s0 == 0.0) return descend(descend, 1, hval);
            double acc = 0.0;
            for (int j = 0; j < quad.size(); ++j)
                acc += quad.weights[j] * descend(descend, 1, hval + s0 * quad.nodes[j]);
            return acc;
        };
        const double ew = gauss_expect(quad, field.mean, field.std, outer);
        residuals.push_back(ew - q[r]);
    }
    return residuals;
}

} // namespace spinglass
