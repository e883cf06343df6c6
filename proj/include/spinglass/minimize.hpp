#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spinglass/parisi.hpp"
#include "spinglass/rng.hpp"
#include "spinglass/roots.hpp"

namespace spinglass {

struct MinimizeResult {
    OrderParameterTriplet triplet;
    double value = 0.0;
    bool converged = false;
    long evaluations = 0;
};

struct MinimizeOptions {
    int restarts = 8;
    std::uint64_t seed = 0;
    EvalSettings search;      // cheap settings used during the search
    EvalSettings final;       // settings for the reported value
    int nm_max_iter = 400;
    double nm_tol = 1e-9;
    int cd_sweeps = 3;

    MinimizeOptions() {
        search.quad_n = 16;
        search.grid_points = 769;
        final = EvalSettings{};
    }
};

namespace detail {

// ordered vectors in (0,1) <-> unconstrained stick-breaking coordinates
inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
inline double logit(double p) {
    p = std::min(1.0 - 1e-12, std::max(1e-12, p));
    return std::log(p / (1.0 - p));
}

inline std::vector<double> decode_ordered(const double* th, int n) {
    std::vector<double> out(n);
    double carry = 1.0;
    for (int i = 0; i < n; ++i) {
        carry *= 1.0 - sigmoid(th[i]);
        out[i] = 1.0 - carry;
    }
    return out;
}

inline void encode_ordered(const std::vector<double>& v, double* th) {
    double carry = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = std::min(1.0 - 1e-12, std::max(1e-12, v[i]));
        const double u = 1.0 - (1.0 - x) / carry;
        th[i] = logit(u);
        carry = 1.0 - x;
        if (carry < 1e-12) carry = 1e-12;
    }
}

inline OrderParameterTriplet decode_triplet(int k, const std::vector<double>& th) {
    OrderParameterTriplet t;
    t.k = k;
    t.m.resize(k + 2);
    t.q.resize(k + 3);
    t.m.front() = 0.0;
    t.m.back() = 1.0;
    t.q.front() = 0.0;
    t.q.back() = 1.0;
    if (k > 0) {
        auto mm = decode_ordered(th.data(), k);
        for (int i = 0; i < k; ++i) t.m[i + 1] = mm[i];
    }
    auto qq = decode_ordered(th.data() + k, k + 1);
    for (int i = 0; i <= k; ++i) t.q[i + 1] = qq[i];
    return t;
}

inline std::vector<double> encode_triplet(const OrderParameterTriplet& t) {
    std::vector<double> th(t.k + (t.k + 1));
    if (t.k > 0) {
        std::vector<double> mm(t.m.begin() + 1, t.m.begin() + 1 + t.k);
        encode_ordered(mm, th.data());
    }
    std::vector<double> qq(t.q.begin() + 1, t.q.begin() + 2 + t.k);
    encode_ordered(qq, th.data() + t.k);
    return th;
}

// standard Nelder-Mead on R^d; returns best point, deterministic
inline double nelder_mead(std::function<double(const std::vector<double>&)> f,
                          std::vector<double>& x, double step, int max_iter, double ftol) {
    const int d = static_cast<int>(x.size());
    std::vector<std::vector<double>> S(d + 1, x);
    std::vector<double> fv(d + 1);
    for (int i = 1; i <= d; ++i) S[i][i - 1] += step;
    for (int i = 0; i <= d; ++i) fv[i] = f(S[i]);

    auto order = [&] {
        std::vector<int> idx(d + 1);
        for (int i = 0; i <= d; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> S2(d + 1);
        std::vector<double> f2(d + 1);
        for (int i = 0; i <= d; ++i) {
            S2[i] = S[idx[i]];
            f2[i] = fv[idx[i]];
        }
        S.swap(S2);
        fv.swap(f2);
    };

    order();
    for (int it = 0; it < max_iter; ++it) {
        if (std::fabs(fv[d] - fv[0]) < ftol) break;
        std::vector<double> cen(d, 0.0);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) cen[j] += S[i][j];
        }
        for (int j = 0; j < d; ++j) cen[j] /= d;

        auto blend = [&](double a) {
            std::vector<double> p(d);
            for (int j = 0; j < d; ++j) p[j] = cen[j] + a * (S[d][j] - cen[j]);
            return p;
        };
        auto xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fv[0]) {
            auto xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                S[d] = xe;
                fv[d] = fe;
            } else {
                S[d] = xr;
                fv[d] = fr;
            }
        } else if (fr < fv[d - 1]) {
            S[d] = xr;
            fv[d] = fr;
        } else {
            auto xc = blend(fr < fv[d] ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[d])) {
                S[d] = xc;
                fv[d] = fc;
            } else {
                for (int i = 1; i <= d; ++i) {
                    for (int j = 0; j < d; ++j) S[i][j] = S[0][j] + 0.5 * (S[i][j] - S[0][j]);
                    fv[i] = f(S[i]);
                }
            }
        }
        order();
    }
    x = S[0];
    return fv[0];
}

} // namespace detail

// Local minimization of P_k over ordered (m, q) at fixed k: projected
// block-coordinate descent, then Nelder-Mead polish in stick-breaking
// coordinates, multi-started from stratified random triplets.  Deterministic
// given the seed; restart results merge by value, then lexicographically.
inline MinimizeResult minimize_functional(const MixtureSpec& spec, const FieldMarginal& field,
                                          int k, const MinimizeOptions& opt = {}) {
    if (k < 0) throw domain_error("minimize_functional: k must be >= 0");
    long evals = 0;
    auto value_of = [&](const OrderParameterTriplet& t, const EvalSettings& st) {
        ++evals;
        return evaluate_functional(spec, field, t, st).value;
    };

    // deterministic starting triplets
    std::vector<OrderParameterTriplet> starts;
    {
        OrderParameterTriplet at0;
        at0.k = k;
        at0.m.resize(k + 2);
        at0.q.assign(k + 3, 1e-8);
        at0.q.front() = 0.0;
        at0.q.back() = 1.0;
        for (int i = 0; i <= k + 1; ++i) at0.m[i] = i == 0 ? 0.0 : (i == k + 1 ? 1.0 : double(i) / (k + 1));
        for (int i = 1; i <= k + 1; ++i) at0.q[i] = 1e-8 * i;
        starts.push_back(at0);

        OrderParameterTriplet spread = at0;
        for (int i = 1; i <= k + 1; ++i) spread.q[i] = double(i) / (k + 2);
        starts.push_back(spread);

        for (int r = static_cast<int>(starts.size()); r < std::max(opt.restarts, 2); ++r) {
            RandomStream rs{opt.seed, 0x5eedULL, static_cast<std::uint64_t>(r)};
            OrderParameterTriplet t = at0;
            std::vector<double> qs(k + 1), ms(k);
            for (auto& v : qs) v = rs.next_double();
            for (auto& v : ms) v = rs.next_double();
            std::sort(qs.begin(), qs.end());
            std::sort(ms.begin(), ms.end());
            for (int i = 0; i < k; ++i) t.m[i + 1] = ms[i];
            for (int i = 0; i <= k; ++i) t.q[i + 1] = qs[i];
            starts.push_back(t);
        }
    }

    OrderParameterTriplet best;
    double best_val = 1e300;
    bool best_converged = false;

    for (const auto& start : starts) {
        OrderParameterTriplet cur = start;
        double cur_val = value_of(cur, opt.search);

        // block-coordinate sweeps with bracket projection
        for (int sweep = 0; sweep < opt.cd_sweeps; ++sweep) {
            for (int i = 1; i <= k; ++i) {
                const double lo = cur.m[i - 1], hi = cur.m[i + 1];
                if (hi - lo < 1e-10) continue;
                const double mi = golden_minimize(
                    [&](double v) {
                        OrderParameterTriplet t = cur;
                        t.m[i] = v;
                        return value_of(t, opt.search);
                    },
                    lo, hi, 1e-4 * (hi - lo), 40);
                cur.m[i] = mi;
            }
            for (int i = 1; i <= k + 1; ++i) {
                const double lo = cur.q[i - 1], hi = cur.q[i + 1];
                if (hi - lo < 1e-10) continue;
                const double qi = golden_minimize(
                    [&](double v) {
                        OrderParameterTriplet t = cur;
                        t.q[i] = v;
                        return value_of(t, opt.search);
                    },
                    lo, hi, 1e-4 * (hi - lo), 40);
                cur.q[i] = qi;
            }
            cur_val = value_of(cur, opt.search);
        }

        // Nelder-Mead polish in unconstrained coordinates
        auto th = detail::encode_triplet(cur);
        bool converged = false;
        const double nm_val = detail::nelder_mead(
            [&](const std::vector<double>& v) {
                return value_of(detail::decode_triplet(k, v), opt.search);
            },
            th, 0.25, opt.nm_max_iter, opt.nm_tol);
        converged = true;
        if (nm_val < cur_val) {
            cur = detail::decode_triplet(k, th);
            cur_val = nm_val;
        }

        const double final_val = value_of(cur, opt.final);
        if (final_val < best_val - 1e-14 ||
            (std::fabs(final_val - best_val) <= 1e-14 &&
             std::lexicographical_compare(cur.q.begin(), cur.q.end(), best.q.begin(),
                                          best.q.end()))) {
            best = cur;
            best_val = final_val;
            best_converged = converged;
        }
    }

    return MinimizeResult{best, best_val, best_converged, evals};
}

// spec-facing convenience signature
inline MinimizeResult minimize_functional(const MixtureSpec& spec, const FieldMarginal& field,
                                          int k, int restarts, std::uint64_t seed) {
    MinimizeOptions opt;
    opt.restarts = restarts;
    opt.seed = seed;
    return minimize_functional(spec, field, k, opt);
}

} // namespace spinglass
