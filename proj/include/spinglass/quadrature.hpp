#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "spinglass/errors.hpp"
#include "spinglass/mixture.hpp"

namespace spinglass {

// Quadrature for expectations against the standard normal density:
// E f(z) ~= sum_i weights[i] * f(nodes[i]).  Weights sum to 1.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    int size() const { return static_cast<int>(nodes.size()); }

    template <typename F>
    double expect(F&& f) const {
        double acc = 0.0;
        for (int i = 0; i < size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

namespace detail {

// Eigenvalues/first-row eigenvector components of a symmetric tridiagonal
// matrix (diag d, off-diagonal e), QL with implicit shifts.  z carries the
// first components, used for Golub-Welsch weights.
inline void tridiag_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    e.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= 1e-300 + 1e-16 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60) throw numerical_error("tridiag_ql: no convergence");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::fabs(r) : -std::fabs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
                if (r == 0.0 && m - 1 >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    // sort ascending, carrying z
    for (int i = 0; i < n - 1; ++i) {
        int k = i;
        for (int j = i + 1; j < n; ++j)
            if (d[j] < d[k]) k = j;
        if (k != i) {
            std::swap(d[i], d[k]);
            std::swap(z[i], z[k]);
        }
    }
}

} // namespace detail

// Gauss-Hermite rule in probabilists' normalization (standard normal weight),
// exact for monomials z^k with k <= 2n-1.  Golub-Welsch on the Jacobi matrix
// of the monic Hermite recurrence; nodes are symmetrized afterwards so that
// odd integrands cancel exactly.
inline QuadratureRule hermite_rule(int n) {
    if (n < 1 || n > 256) throw domain_error("hermite_rule: n must be in [1,256]");
    std::vector<double> d(n, 0.0), e(n > 1 ? n - 1 : 0), z(n, 0.0);
    for (int k = 1; k < n; ++k) e[k - 1] = std::sqrt(static_cast<double>(k));
    z[0] = 1.0;
    if (n > 1) detail::tridiag_ql(d, e, z);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = d[i];
        rule.weights[i] = z[i] * z[i];
    }
    // enforce the +-symmetry the spectrum has analytically
    for (int i = 0, j = n - 1; i < j; ++i, --j) {
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    double sum = 0.0;
    for (double w : rule.weights) sum += w;
    for (double& w : rule.weights) w /= sum;
    return rule;
}

// Gauss-Legendre on [-1,1] (weights sum to 2), Newton on P_n.
inline QuadratureRule legendre_rule(int n) {
    if (n < 1 || n > 512) throw domain_error("legendre_rule: n must be in [1,512]");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

// E over h = mean + s*z of f(h): one-dimensional Gaussian expectation.
template <typename F>
double gauss_expect(const QuadratureRule& q, double mean, double sd, F&& f) {
    if (sd == 0.0) return f(mean);
    double acc = 0.0;
    for (int i = 0; i < q.size(); ++i) acc += q.weights[i] * f(mean + sd * q.nodes[i]);
    return acc;
}

// E g(a, b) for jointly Gaussian (a, b); tensorized rule on the Cholesky factor.
template <typename G>
double gauss2_expect(const QuadratureRule& q, double mean1, double mean2, double var1,
                     double var2, double cov, G&& g) {
    if (var1 < 0.0 || var2 < 0.0) throw domain_error("gauss2_expect: negative variance");
    const double sd1 = std::sqrt(var1);
    if (sd1 == 0.0) {
        if (std::fabs(cov) > 1e-14) throw domain_error("gauss2_expect: inconsistent covariance");
        const double sd2 = std::sqrt(var2);
        double acc = 0.0;
        if (sd2 == 0.0) return g(mean1, mean2);
        for (int j = 0; j < q.size(); ++j)
            acc += q.weights[j] * g(mean1, mean2 + sd2 * q.nodes[j]);
        return acc;
    }
    const double l21 = cov / sd1;
    const double l22 = std::sqrt(std::max(0.0, var2 - l21 * l21));
    double acc = 0.0;
    for (int i = 0; i < q.size(); ++i) {
        const double a = mean1 + sd1 * q.nodes[i];
        const double b0 = mean2 + l21 * q.nodes[i];
        if (l22 == 0.0) {
            acc += q.weights[i] * g(a, b0);
        } else {
            double inner = 0.0;
            for (int j = 0; j < q.size(); ++j)
                inner += q.weights[j] * g(a, b0 + l22 * q.nodes[j]);
            acc += q.weights[i] * inner;
        }
    }
    return acc;
}

// Centered Gaussian pair (a, b) with Var a = v1t, Var b = v2t, E ab = cov,
// realized through the shared-factor construction
//   a = sd1 (sqrt(eta) w + sqrt(1-eta) w1),
//   b = sd2 (sign sqrt(eta) w + sqrt(1-eta) w2).
// expect_product exploits that a and b are independent given w, so the
// three-fold tensor integral costs O(n^2) evaluations instead of O(n^3).
struct PairGauss {
    double sd1 = 0.0, sd2 = 0.0;
    double eta = 0.0;
    double sign = 1.0;

    PairGauss(double v1t, double v2t, double cov) {
        if (v1t < 0.0 || v2t < 0.0) throw domain_error("PairGauss: negative variance");
        sd1 = std::sqrt(v1t);
        sd2 = std::sqrt(v2t);
        if (sd1 == 0.0 || sd2 == 0.0) {
            if (std::fabs(cov) > 1e-14) throw domain_error("PairGauss: inconsistent covariance");
            eta = 0.0;
            return;
        }
        sign = cov < 0.0 ? -1.0 : 1.0;
        eta = std::fabs(cov) / (sd1 * sd2);
        if (eta > 1.0 + 1e-10) throw domain_error("PairGauss: |correlation| > 1");
        if (eta > 1.0) eta = 1.0;
    }

    template <typename F1, typename F2>
    double expect_product(const QuadratureRule& q, double mean1, double mean2, F1&& f1,
                          F2&& f2) const {
        const double se = std::sqrt(eta);
        const double sr = std::sqrt(std::max(0.0, 1.0 - eta));
        if (eta <= 0.0) {
            double e1 = 0.0, e2 = 0.0;
            for (int i = 0; i < q.size(); ++i) {
                e1 += q.weights[i] * f1(mean1 + sd1 * q.nodes[i]);
                e2 += q.weights[i] * f2(mean2 + sd2 * q.nodes[i]);
            }
            return e1 * e2;
        }
        double acc = 0.0;
        for (int i = 0; i < q.size(); ++i) {
            const double w = q.nodes[i];
            double e1, e2;
            if (eta >= 1.0) {
                e1 = f1(mean1 + sd1 * w);
                e2 = f2(mean2 + sign * sd2 * w);
            } else {
                e1 = e2 = 0.0;
                for (int j = 0; j < q.size(); ++j) {
                    e1 += q.weights[j] * f1(mean1 + sd1 * (se * w + sr * q.nodes[j]));
                    e2 += q.weights[j] * f2(mean2 + sd2 * (sign * se * w + sr * q.nodes[j]));
                }
            }
            acc += q.weights[i] * e1 * e2;
        }
        return acc;
    }
};

// Discrete rule on pairs (chi^1, chi^2) with the covariance triple
// (xi'_{1,1}(v1), xi'_{2,2}(v2), xi'_{1,2}(u)).  The tensor over (w, w1, w2)
// collapses to n nodes when eta = 1 and n^2 nodes when eta = 0.
struct JointPairRule {
    std::vector<std::array<double, 2>> nodes;
    std::vector<double> weights;
    double v1 = 0.0, v2 = 0.0, u = 0.0, eta = 0.0;

    template <typename F>
    double expect(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i][0], nodes[i][1]);
        return acc;
    }
};

inline JointPairRule correlated_pair_rule(const CoupledModelSpec& coupled, double v1, double v2,
                                          double u, int n) {
    if (!(v1 > 0.0 && v1 <= 1.0) || !(v2 > 0.0 && v2 <= 1.0))
        throw domain_error("correlated_pair_rule: v1, v2 must lie in (0,1]");
    if (!(std::fabs(u) <= std::sqrt(v1 * v2) + 1e-15))
        throw domain_error("correlated_pair_rule: |u| must be <= sqrt(v1 v2)");
    if (coupled.spec1().is_trivial() || coupled.spec2().is_trivial())
        throw domain_error("correlated_pair_rule: mixture is identically zero");
    const double V1 = coupled.spec1().xi(v1, 1);
    const double V2 = coupled.spec2().xi(v2, 1);
    if (!(V1 > 0.0) || !(V2 > 0.0))
        throw domain_error("correlated_pair_rule: xi' must be positive at v1, v2");
    const double sd1 = std::sqrt(V1), sd2 = std::sqrt(V2);
    // sign(0) := +1; harmless since eta(0) = 0 for even mixtures
    const double sign = u < 0.0 ? -1.0 : 1.0;
    double eta = coupled.cross_xi(std::fabs(u), 1) / (sd1 * sd2);
    if (eta > 1.0) eta = 1.0; // Cauchy-Schwarz guarantees eta <= 1 up to roundoff

    const QuadratureRule q = hermite_rule(n);
    JointPairRule rule;
    rule.v1 = v1;
    rule.v2 = v2;
    rule.u = u;
    rule.eta = eta;
    if (eta == 0.0) {
        rule.nodes.reserve(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                rule.nodes.push_back({sd1 * q.nodes[i], sd2 * q.nodes[j]});
                rule.weights.push_back(q.weights[i] * q.weights[j]);
            }
    } else if (eta == 1.0) {
        for (int i = 0; i < n; ++i) {
            rule.nodes.push_back({sd1 * q.nodes[i], sign * sd2 * q.nodes[i]});
            rule.weights.push_back(q.weights[i]);
        }
    } else {
        const double se = std::sqrt(eta), sr = std::sqrt(1.0 - eta);
        rule.nodes.reserve(static_cast<std::size_t>(n) * n * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    rule.nodes.push_back({sd1 * (se * q.nodes[i] + sr * q.nodes[j]),
                                          sd2 * (sign * se * q.nodes[i] + sr * q.nodes[k])});
                    rule.weights.push_back(q.weights[i] * q.weights[j] * q.weights[k]);
                }
    }
    return rule;
}

} // namespace spinglass
