#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spinglass/chaos.hpp"
#include "spinglass/grid.hpp"
#include "spinglass/mixture.hpp"
#include "spinglass/parisi.hpp"
#include "spinglass/quadrature.hpp"

namespace spinglass {

// Interpolation schedule for the two-system Guerra bound:
//   n_0 = 0 <= n_1 <= ... <= n_kappa = 1,
//   rho_p^{j,j'} for p = 0..kappa+1 with rho_0 = 0, rho_{kappa+1}^{1,1} =
//   rho_{kappa+1}^{2,2} = 1 and rho_{kappa+1}^{1,2} = rho_{kappa+1}^{2,1} = u.
// Admissibility means every per-level pair covariance increment is PSD.
struct CoupledBoundParams {
    int kappa = 1;
    std::vector<double> n;                    // size kappa+1
    std::vector<double> rho11, rho22, rho12, rho21; // size kappa+2

    double u() const { return rho12.back(); }

    // level-p increment covariance [[d11, d12], [d12, d22]]
    struct LevelCov {
        double d11, d22, d12;
    };

    LevelCov level_cov(const CoupledModelSpec& c, int p) const {
        const double d11 = c.spec1().xi(rho11[p + 1], 1) - c.spec1().xi(rho11[p], 1);
        const double d22 = c.spec2().xi(rho22[p + 1], 1) - c.spec2().xi(rho22[p], 1);
        const double d12 = c.cross_xi(rho12[p + 1], 1) - c.cross_xi(rho12[p], 1);
        return {d11, d22, d12};
    }

    void validate(const CoupledModelSpec& c) const {
        if (kappa < 1) throw domain_error("CoupledBoundParams: kappa must be >= 1");
        if (n.size() != static_cast<std::size_t>(kappa + 1))
            throw domain_error("CoupledBoundParams: n must have kappa+1 entries");
        if (n.front() != 0.0 || n.back() != 1.0)
            throw domain_error("CoupledBoundParams: n_0 = 0 and n_kappa = 1 required");
        for (std::size_t i = 1; i < n.size(); ++i)
            if (!(n[i] >= n[i - 1])) throw domain_error("CoupledBoundParams: n must be nondecreasing");
        for (const auto* r : {&rho11, &rho22, &rho12, &rho21}) {
            if (r->size() != static_cast<std::size_t>(kappa + 2))
                throw domain_error("CoupledBoundParams: rho must have kappa+2 entries");
            if (r->front() != 0.0) throw domain_error("CoupledBoundParams: rho_0 = 0 required");
        }
        if (rho11.back() != 1.0 || rho22.back() != 1.0)
            throw domain_error("CoupledBoundParams: rho_{kappa+1}^{jj} = 1 required");
        if (rho12.back() != rho21.back())
            throw domain_error("CoupledBoundParams: cross paths must end at the same u");
        const double psd_tol = 1e-12;
        for (int p = 0; p <= kappa; ++p) {
            const double d21 =
                c.cross_xi(rho21[p + 1], 1) - c.cross_xi(rho21[p], 1);
            const auto lc = level_cov(c, p);
            if (std::fabs(lc.d12 - d21) > 1e-10)
                throw numerical_error("CoupledBoundParams: inconsistent cross increments at level " +
                                      std::to_string(p));
            if (lc.d11 < -psd_tol || lc.d22 < -psd_tol ||
                lc.d11 * lc.d22 - lc.d12 * lc.d12 < -psd_tol)
                throw numerical_error("CoupledBoundParams: level covariance not PSD at level " +
                                      std::to_string(p));
        }
    }

    // schedule used to prove the manageable bound: kappa = k - iota + 2,
    // n = (0, m_iota, ..., m_{k+1}), diagonal paths (0, q_iota, ..., 1) and
    // cross path (0, u, ..., u)
    static CoupledBoundParams manageable_schedule(const OrderParameterTriplet& t1,
                                                  const OrderParameterTriplet& t2, int iota,
                                                  double u) {
        t1.validate();
        t2.validate();
        if (t1.k != t2.k || t1.m != t2.m)
            throw domain_error("manageable_schedule: triplets must share m");
        const int k = t1.k;
        if (iota < 1 || iota > k + 1) throw domain_error("manageable_schedule: iota out of range");
        CoupledBoundParams p;
        p.kappa = k - iota + 2;
        p.n.assign(1, 0.0);
        for (int i = iota; i <= k + 1; ++i) p.n.push_back(t1.m[i]);
        p.rho11.assign(1, 0.0);
        p.rho22.assign(1, 0.0);
        for (int i = iota; i <= k + 2; ++i) {
            p.rho11.push_back(t1.q[i]);
            p.rho22.push_back(t2.q[i]);
        }
        p.rho12.assign(p.rho11.size(), u);
        p.rho21.assign(p.rho11.size(), u);
        p.rho12.front() = p.rho21.front() = 0.0;
        return p;
    }
};

struct GuerraSettings {
    int grid_points = 257; // per axis of the 2-d recursion
    int quad_n = 12;
    bool force_dense = false; // skip the exact separable shortcut
};

namespace detail {

struct AxisStencil {
    int idx[4];
    double w[4];
    int count;
};

inline AxisStencil axis_stencil(const UniformGrid& g, double x) {
    AxisStencil st;
    const double s = (x - g.x0) / g.dx;
    if (s <= 0.0) {
        st.count = 2;
        st.idx[0] = 0;
        st.idx[1] = 1;
        st.w[0] = 1.0 - s;
        st.w[1] = s;
        return st;
    }
    if (s >= g.n - 1) {
        const double t = s - (g.n - 1);
        st.count = 2;
        st.idx[0] = g.n - 2;
        st.idx[1] = g.n - 1;
        st.w[0] = -t;
        st.w[1] = 1.0 + t;
        return st;
    }
    int i = static_cast<int>(s);
    if (i < 1) i = 1;
    if (i > g.n - 3) i = g.n - 3;
    const double t = s - i;
    st.count = 4;
    st.idx[0] = i - 1;
    st.idx[1] = i;
    st.idx[2] = i + 1;
    st.idx[3] = i + 2;
    st.w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    st.w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    st.w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    st.w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
    return st;
}

struct Grid2 {
    UniformGrid ga, gb;
    std::vector<double> data; // data[i * gb.n + j]

    double eval(const AxisStencil& sa, const AxisStencil& sb) const {
        double acc = 0.0;
        for (int p = 0; p < sa.count; ++p) {
            const double* row = data.data() + static_cast<std::size_t>(sa.idx[p]) * gb.n;
            double r = 0.0;
            for (int q = 0; q < sb.count; ++q) r += sb.w[q] * row[sb.idx[q]];
            acc += sa.w[p] * r;
        }
        return acc;
    }

    double eval(double a, double b) const { return eval(axis_stencil(ga, a), axis_stencil(gb, b)); }
};

// one backward level of the two-system recursion:
// out(a,b) = (1/np) log E exp(np G(a + y1, b + y2)), plain mean when np = 0.
// (y1, y2) = (l11 alpha, l21 alpha + l22 beta) with alpha, beta standard normal.
inline Grid2 level_step2(const Grid2& G, double np, double l11, double l21, double l22,
                         const QuadratureRule& quad) {
    if (l11 == 0.0 && l21 == 0.0 && l22 == 0.0) return G;
    Grid2 out;
    out.ga = G.ga;
    out.gb = G.gb;
    const std::size_t total = static_cast<std::size_t>(G.ga.n) * G.gb.n;
    std::vector<double> mx(total, -1e300), acc(total, 0.0);

    std::vector<AxisStencil> sa(G.ga.n), sb(G.gb.n);
    const int nq = quad.size();
    for (int qi = 0; qi < nq; ++qi) {
        const double alpha = quad.nodes[qi];
        const int nq2 = l22 == 0.0 ? 1 : nq;
        for (int qj = 0; qj < nq2; ++qj) {
            const double beta = l22 == 0.0 ? 0.0 : quad.nodes[qj];
            const double y1 = l11 * alpha;
            const double y2 = l21 * alpha + l22 * beta;
            const double w = quad.weights[qi] * (l22 == 0.0 ? 1.0 : quad.weights[qj]);
            for (int i = 0; i < G.ga.n; ++i) sa[i] = axis_stencil(G.ga, G.ga.at(i) + y1);
            for (int j = 0; j < G.gb.n; ++j) sb[j] = axis_stencil(G.gb, G.gb.at(j) + y2);
            for (int i = 0; i < G.ga.n; ++i) {
                const std::size_t base = static_cast<std::size_t>(i) * G.gb.n;
                for (int j = 0; j < G.gb.n; ++j) {
                    const double v = G.eval(sa[i], sb[j]);
                    const std::size_t id = base + j;
                    if (np > 0.0) {
                        // online log-sum-exp in the tilted variable
                        if (v <= mx[id]) {
                            acc[id] += w * std::exp(np * (v - mx[id]));
                        } else {
                            acc[id] = acc[id] * std::exp(np * (mx[id] - v)) + w;
                            mx[id] = v;
                        }
                    } else {
                        acc[id] += w * v;
                    }
                }
            }
        }
    }
    out.data.resize(total);
    for (std::size_t id = 0; id < total; ++id)
        out.data[id] = np > 0.0 ? mx[id] + std::log(acc[id]) / np : acc[id];
    return out;
}

inline void cholesky2(double d11, double d22, double d12, double& l11, double& l21, double& l22) {
    l11 = std::sqrt(std::max(0.0, d11));
    if (l11 > 0.0) {
        l21 = d12 / l11;
        l22 = std::sqrt(std::max(0.0, d22 - l21 * l21));
    } else {
        if (std::fabs(d12) > 1e-10) throw numerical_error("cholesky2: inconsistent covariance");
        l21 = 0.0;
        l22 = std::sqrt(std::max(0.0, d22));
    }
}

} // namespace detail

// Y_0(lambda) of the coupled Guerra bound: backward nested expectation over
// the correlated pairs (y_p^1, y_p^2), starting from the tilted terminal
//   log(cosh A cosh B cosh l + sinh A sinh B sinh l).
// When lambda = 0 and all cross increments vanish the recursion splits into
// the two single-system recursions and is computed that way, exactly.
inline double y0_recursion(const CoupledModelSpec& coupled, const CoupledBoundParams& params,
                           double lambda, const GuerraSettings& st = {}) {
    params.validate(coupled);
    const FieldLaw& fl = coupled.field_law();
    const double fcov = fl.std1 * fl.std2 * fl.corr;

    bool separable = lambda == 0.0 && fcov == 0.0 && !st.force_dense;
    if (separable) {
        for (int p = 0; p <= params.kappa; ++p)
            if (std::fabs(params.level_cov(coupled, p).d12) > 0.0) separable = false;
    }

    if (separable) {
        // Y_0(0) = E D_{1,1}(h^1 + y_0^1) + E D_{2,1}(h^2 + y_0^2)
        const QuadratureRule quad = hermite_rule(std::max(24, st.quad_n));
        double total = 0.0;
        for (int sys = 0; sys < 2; ++sys) {
            const MixtureSpec& spec = sys == 0 ? coupled.spec1() : coupled.spec2();
            const FieldMarginal f = sys == 0 ? coupled.field1() : coupled.field2();
            const auto& rho = sys == 0 ? params.rho11 : params.rho22;
            const double width =
                std::max(8.0, std::fabs(f.mean) + 6.0 * std::sqrt(spec.xi(1.0, 1) + f.std * f.std));
            const UniformGrid g = UniformGrid::symmetric(width, 2049);
            std::vector<double> tab(g.n);
            for (int i = 0; i < g.n; ++i) tab[i] = log_cosh(g.at(i));
            for (int p = params.kappa; p >= 1; --p) {
                const double var = spec.xi(rho[p + 1], 1) - spec.xi(rho[p], 1);
                tab = detail::level_step(g, tab, std::sqrt(std::max(0.0, var)), params.n[p], quad);
            }
            const double var0 = spec.xi(rho[1], 1) - spec.xi(rho[0], 1);
            const double sd = std::sqrt(std::max(0.0, var0) + f.std * f.std);
            total += gauss_expect(quad, f.mean, sd,
                                  [&](double x) { return interp_cubic(g, tab, x); });
        }
        return total;
    }

    const QuadratureRule quad = hermite_rule(st.quad_n);
    const double w1 = std::max(
        8.0, std::fabs(fl.mean1) + 6.0 * std::sqrt(coupled.spec1().xi(1.0, 1) + fl.std1 * fl.std1));
    const double w2 = std::max(
        8.0, std::fabs(fl.mean2) + 6.0 * std::sqrt(coupled.spec2().xi(1.0, 1) + fl.std2 * fl.std2));
    detail::Grid2 G;
    G.ga = UniformGrid::symmetric(w1, st.grid_points);
    G.gb = UniformGrid::symmetric(w2, st.grid_points);
    G.data.resize(static_cast<std::size_t>(G.ga.n) * G.gb.n);
    const double lcl = log_cosh(lambda);
    const double tl = std::tanh(lambda);
    for (int i = 0; i < G.ga.n; ++i) {
        const double a = G.ga.at(i);
        for (int j = 0; j < G.gb.n; ++j) {
            const double b = G.gb.at(j);
            G.data[static_cast<std::size_t>(i) * G.gb.n + j] =
                log_cosh(a) + log_cosh(b) + lcl + std::log1p(std::tanh(a) * std::tanh(b) * tl);
        }
    }

    for (int p = params.kappa; p >= 1; --p) {
        const auto lc = params.level_cov(coupled, p);
        double l11, l21, l22;
        detail::cholesky2(lc.d11, lc.d22, lc.d12, l11, l21, l22);
        G = detail::level_step2(G, params.n[p], l11, l21, l22, quad);
    }

    // outermost level: y_0 pair and the external fields together
    const auto lc0 = params.level_cov(coupled, 0);
    return gauss2_expect(quad, fl.mean1, fl.mean2, lc0.d11 + fl.std1 * fl.std1,
                         lc0.d22 + fl.std2 * fl.std2, lc0.d12 + fcov,
                         [&](double a, double b) { return G.eval(a, b); });
}

struct CoupledBoundResult {
    double value = 0.0;
    double lambda = 0.0;
    double y0 = 0.0;
};

// 2 log 2 + Y_0(lambda) - lambda u - (1/2) sum_{j,j'} sum_p n_p dtheta_{j,j'};
// an upper bound for p_{N,u} at every admissible schedule and every lambda.
// lambda_opt picks the quadratic-majorant minimizer lambda* = u - Y_0'(0)
// (valid since 0 <= Y_0'' <= 1) and polishes by golden section around it.
inline CoupledBoundResult coupled_rsb_bound(const CoupledModelSpec& coupled,
                                            const CoupledBoundParams& params, double u,
                                            bool lambda_opt, double lambda = 0.0,
                                            const GuerraSettings& st = {}) {
    params.validate(coupled);
    if (std::fabs(params.u() - u) > 1e-12)
        throw domain_error("coupled_rsb_bound: u does not match the schedule");

    double theta_sum = 0.0;
    for (int p = 0; p <= params.kappa; ++p) {
        theta_sum += params.n[p] * (coupled.spec1().theta(params.rho11[p + 1]) -
                                    coupled.spec1().theta(params.rho11[p]));
        theta_sum += params.n[p] * (coupled.spec2().theta(params.rho22[p + 1]) -
                                    coupled.spec2().theta(params.rho22[p]));
        theta_sum += params.n[p] * (coupled.cross_theta(params.rho12[p + 1]) -
                                    coupled.cross_theta(params.rho12[p]));
        theta_sum += params.n[p] * (coupled.cross_theta(params.rho21[p + 1]) -
                                    coupled.cross_theta(params.rho21[p]));
    }

    const double two_log2 = 2.0 * 0.6931471805599453094172321214582;
    auto bound_at = [&](double l) {
        return y0_recursion(coupled, params, l, st) - l * u - 0.5 * theta_sum + two_log2;
    };

    CoupledBoundResult res;
    if (!lambda_opt) {
        res.lambda = lambda;
        res.y0 = y0_recursion(coupled, params, lambda, st);
        res.value = res.y0 - lambda * u - 0.5 * theta_sum + two_log2;
        return res;
    }
    const double dl = 1e-3;
    const double y0p = (y0_recursion(coupled, params, dl, st) -
                        y0_recursion(coupled, params, -dl, st)) /
                       (2.0 * dl);
    const double lstar = u - y0p;
    const double lopt = golden_minimize(bound_at, lstar - 1.0, lstar + 1.0, 1e-6, 60);
    res.lambda = lopt;
    res.y0 = y0_recursion(coupled, params, lopt, st);
    res.value = res.y0 - lopt * u - 0.5 * theta_sum + two_log2;
    return res;
}

// Manageable bound of the coupled free energy (shared-m triplets, v_j = q^j_iota):
//   P^1 + P^2 - (phi~(u) - u)^2/2 + prefix theta sums below iota.
// The kernel caches the two functional values and Phi profiles so a u-grid
// can be swept cheaply.
class ManageableBound {
public:
    ManageableBound(const CoupledModelSpec& coupled, const OrderParameterTriplet& t1,
                    const OrderParameterTriplet& t2, int iota, const EvalSettings& st = {})
        : coupled_(&coupled) {
        t1.validate();
        t2.validate();
        if (t1.k != t2.k || t1.m != t2.m)
            throw domain_error("manageable_bound: triplets must share m");
        if (iota < 1 || iota > t1.k + 1) throw domain_error("manageable_bound: iota out of range");
        v1_ = t1.q[iota];
        v2_ = t2.q[iota];
        if (!(v1_ > 0.0 && v1_ < 1.0) || !(v2_ > 0.0 && v2_ < 1.0))
            throw domain_error("manageable_bound: q_iota must lie in (0,1)");
        const auto sol1 = evaluate_functional(coupled.spec1(), coupled.field1(), t1, st);
        const auto sol2 = evaluate_functional(coupled.spec2(), coupled.field2(), t2, st);
        p1_ = sol1.value;
        p2_ = sol2.value;
        kernel_.emplace(coupled, sol1.phi_at(v1_), sol2.phi_at(v2_), v1_, v2_);
        prefix_ = 0.0;
        for (int p = 0; p <= iota - 1; ++p) {
            prefix_ += 0.5 * t1.m[p] *
                       (coupled.spec1().theta(t1.q[p + 1]) - coupled.spec1().theta(t1.q[p]));
            prefix_ += 0.5 * t2.m[p] *
                       (coupled.spec2().theta(t2.q[p + 1]) - coupled.spec2().theta(t2.q[p]));
        }
    }

    double v1() const { return v1_; }
    double v2() const { return v2_; }
    double p1() const { return p1_; }
    double p2() const { return p2_; }
    double phi_tilde(double u) const { return (*kernel_)(u); }

    double operator()(double u) const {
        if (!(std::fabs(u) <= std::sqrt(v1_ * v2_) + 1e-15))
            throw domain_error("manageable_bound: |u| must be <= sqrt(v1 v2)");
        const double d = phi_tilde(u) - u;
        return p1_ + p2_ - 0.5 * d * d + prefix_;
    }

private:
    const CoupledModelSpec* coupled_;
    double v1_, v2_, p1_ = 0, p2_ = 0, prefix_ = 0;
    std::optional<CouplingKernel> kernel_;
};

inline double manageable_bound(const CoupledModelSpec& coupled, const OrderParameterTriplet& t1,
                               const OrderParameterTriplet& t2, int iota, double u,
                               const EvalSettings& st = {}) {
    return ManageableBound(coupled, t1, t2, iota, st)(u);
}

// Chaos band bound at (v1, v2):
//   P^1 + P^2 - (phi_{v1,v2}(u) - u)^2/2
//   + (theta11(v1) - theta11(c1))_+ + (theta22(v2) - theta22(c2))_+.
class ChaosBandBound {
public:
    ChaosBandBound(const CoupledModelSpec& coupled, const ParisiSolution& sol1,
                   const ParisiSolution& sol2, double c1, double c2, double v1, double v2)
        : v1_(v1), v2_(v2) {
        if (!(v1 > 0.0 && v1 < 1.0) || !(v2 > 0.0 && v2 < 1.0))
            throw domain_error("chaos_band_bound: v1, v2 must lie in (0,1)");
        p_sum_ = sol1.value + sol2.value;
        kernel_.emplace(coupled, sol1.phi_at(v1), sol2.phi_at(v2), v1, v2);
        pos_parts_ = std::max(0.0, coupled.spec1().theta(v1) - coupled.spec1().theta(c1)) +
                     std::max(0.0, coupled.spec2().theta(v2) - coupled.spec2().theta(c2));
    }

    double p_sum() const { return p_sum_; }
    double positive_parts() const { return pos_parts_; }
    double phi(double u) const { return (*kernel_)(u); }

    double operator()(double u) const {
        if (!(std::fabs(u) <= std::sqrt(v1_ * v2_) + 1e-15))
            throw domain_error("chaos_band_bound: |u| must be <= sqrt(v1 v2)");
        const double d = phi(u) - u;
        return p_sum_ - 0.5 * d * d + pos_parts_;
    }

private:
    double v1_, v2_, p_sum_ = 0, pos_parts_ = 0;
    std::optional<CouplingKernel> kernel_;
};

inline double chaos_band_bound(const CoupledModelSpec& coupled, const ParisiSolution& sol1,
                               const ParisiSolution& sol2, double c1, double c2, double v1,
                               double v2, double u) {
    return ChaosBandBound(coupled, sol1, sol2, c1, c2, v1, v2)(u);
}

// Integral of E F_u(h^1, h^2, xi'(q)) xi''(q) over [c_lo, c_hi] for identical
// systems, with F_u(x1, x2, w) = E_z (tanh(x1 + z sqrt(w)) -+ tanh(x2 -+ z
// sqrt(w)))^2 by the sign of u.  The band-bound constants K_1, K_2 are not
// applied; only the integral is reported.
inline double identical_band_integrand(const CoupledModelSpec& coupled, double c_lo, double c_hi,
                                       int u_sign, int quad_n = 48) {
    if (!coupled.identical_systems())
        throw domain_error("identical_band_integrand: mixtures must be identical with t_p = 1");
    if (!(0.0 < c_lo && c_lo < c_hi && c_hi < 1.0))
        throw domain_error("identical_band_integrand: need 0 < c_lo < c_hi < 1");
    if (u_sign == 0) throw domain_error("identical_band_integrand: u_sign must be +-1");

    const QuadratureRule gh = hermite_rule(quad_n);
    const QuadratureRule gl = legendre_rule(64);
    const FieldLaw& fl = coupled.field_law();
    const MixtureSpec& spec = coupled.spec1();

    auto f_u = [&](double x1, double x2, double w) {
        const double s = std::sqrt(w);
        return gh.expect([&](double z) {
            const double d = u_sign > 0 ? std::tanh(x1 + z * s) - std::tanh(x2 + z * s)
                                        : std::tanh(x1 + z * s) + std::tanh(x2 - z * s);
            return d * d;
        });
    };

    double acc = 0.0;
    const double half = 0.5 * (c_hi - c_lo), mid = 0.5 * (c_hi + c_lo);
    for (int i = 0; i < gl.size(); ++i) {
        const double q = mid + half * gl.nodes[i];
        const double w = spec.xi(q, 1);
        const double inner =
            gauss2_expect(gh, fl.mean1, fl.mean2, fl.std1 * fl.std1, fl.std2 * fl.std2,
                          fl.std1 * fl.std2 * fl.corr,
                          [&](double x1, double x2) { return f_u(x1, x2, w); });
        acc += gl.weights[i] * inner * spec.xi(q, 2);
    }
    return acc * half;
}

} // namespace spinglass
