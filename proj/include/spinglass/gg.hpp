#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spinglass/errors.hpp"
#include "spinglass/parallel.hpp"
#include "spinglass/sim.hpp"

namespace spinglass {

// Overlap symbol: kind 0 is the cross overlap R_{l1,l2} = R(sigma^{l1},
// tau^{l2}); kinds 1 and 2 are the within-system overlaps R^j_{l1,l2}.
struct OverlapVar {
    int kind = 0;
    int l1 = 1, l2 = 2;
    bool operator<(const OverlapVar& o) const {
        return std::tie(kind, l1, l2) < std::tie(o.kind, o.l1, o.l2);
    }
    bool operator==(const OverlapVar& o) const {
        return kind == o.kind && l1 == o.l1 && l2 == o.l2;
    }
};

struct GGMonomial {
    double coef = 1.0;
    std::vector<std::pair<OverlapVar, int>> powers;
    int degree() const {
        int d = 0;
        for (const auto& p : powers) d += p.second;
        return d;
    }
};

// Polynomial in overlap entries, e.g. (R1_12)^2 - 0.5*R_11*R_12.
struct FunctionSpec {
    std::vector<GGMonomial> terms;

    static FunctionSpec constant(double c) {
        FunctionSpec f;
        f.terms.push_back({c, {}});
        return f;
    }
    static FunctionSpec var(OverlapVar v, int pow = 1) {
        FunctionSpec f;
        f.terms.push_back({1.0, {{v, pow}}});
        return f;
    }
    static FunctionSpec parse(const std::string& text);

    int max_replica() const {
        int r = 0;
        for (const auto& t : terms)
            for (const auto& p : t.powers) r = std::max({r, p.first.l1, p.first.l2});
        return r;
    }
    int degree() const {
        int d = 0;
        for (const auto& t : terms) d = std::max(d, t.degree());
        return d;
    }

    FunctionSpec operator*(const FunctionSpec& o) const {
        FunctionSpec out;
        for (const auto& a : terms)
            for (const auto& b : o.terms) {
                GGMonomial m;
                m.coef = a.coef * b.coef;
                m.powers = a.powers;
                for (const auto& p : b.powers) {
                    auto it = std::find_if(m.powers.begin(), m.powers.end(),
                                           [&](const auto& q) { return q.first == p.first; });
                    if (it != m.powers.end())
                        it->second += p.second;
                    else
                        m.powers.push_back(p);
                }
                out.terms.push_back(std::move(m));
            }
        return out;
    }
};

// Polynomial in one variable, used for psi.
struct PsiSpec {
    std::vector<double> coef; // coef[a] multiplies x^a
    static PsiSpec parse(const std::string& text);
    int degree() const {
        for (int a = static_cast<int>(coef.size()) - 1; a >= 0; --a)
            if (coef[a] != 0.0) return a;
        return 0;
    }
};

namespace detail {

// --- tiny recursive-descent parser for both spec flavors ------------------

struct PolyParser {
    const std::string& s;
    std::size_t pos = 0;
    bool allow_x;       // psi uses x; f uses R symbols
    bool allow_overlap;

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eof() {
        skip();
        return pos >= s.size();
    }
    char peek() {
        skip();
        return pos < s.size() ? s[pos] : '\0';
    }
    bool accept(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw domain_error("polynomial parse error at position " + std::to_string(pos) + ": " +
                           what);
    }

    int parse_int() {
        skip();
        std::size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        if (start == pos) fail("expected integer");
        return std::stoi(s.substr(start, pos - start));
    }

    double parse_number() {
        skip();
        std::size_t start = pos;
        while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) ||
                                  s[pos] == '.' || s[pos] == 'e' || s[pos] == 'E' ||
                                  ((s[pos] == '+' || s[pos] == '-') && pos > start &&
                                   (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
            ++pos;
        if (start == pos) fail("expected number");
        return std::stod(s.substr(start, pos - start));
    }

    // variable token: x | R_ab | R1_ab | R2_ab  (single-digit replica ids)
    FunctionSpec parse_var() {
        skip();
        if (allow_x && (peek() == 'x' || peek() == 'X')) {
            ++pos;
            OverlapVar v{-1, 0, 0}; // marker for the psi variable
            return FunctionSpec::var(v);
        }
        if (!allow_overlap || peek() != 'R') fail("expected variable");
        ++pos;
        int kind = 0;
        if (pos < s.size() && (s[pos] == '1' || s[pos] == '2')) {
            kind = s[pos] - '0';
            ++pos;
        }
        if (pos >= s.size() || s[pos] != '_') fail("expected '_' in overlap symbol");
        ++pos;
        if (pos + 1 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])) ||
            !std::isdigit(static_cast<unsigned char>(s[pos + 1])))
            fail("expected two replica digits");
        OverlapVar v{kind, s[pos] - '0', s[pos + 1] - '0'};
        pos += 2;
        if (v.l1 < 1 || v.l2 < 1) fail("replica indices start at 1");
        return FunctionSpec::var(v);
    }

    FunctionSpec parse_factor() {
        skip();
        FunctionSpec base;
        if (accept('(')) {
            base = parse_expr();
            if (!accept(')')) fail("expected ')'");
        } else if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.') {
            base = FunctionSpec::constant(parse_number());
        } else {
            base = parse_var();
        }
        if (accept('^')) {
            const int e = parse_int();
            if (e < 0 || e > 12) fail("exponent out of range");
            FunctionSpec out = FunctionSpec::constant(1.0);
            for (int i = 0; i < e; ++i) out = out * base;
            return out;
        }
        return base;
    }

    FunctionSpec parse_term() {
        FunctionSpec out = parse_factor();
        for (;;) {
            skip();
            if (accept('*')) {
                out = out * parse_factor();
            } else if (!eof() && (peek() == '(' || peek() == 'R' ||
                                  (allow_x && (peek() == 'x' || peek() == 'X')))) {
                out = out * parse_factor(); // implicit product
            } else {
                return out;
            }
        }
    }

    FunctionSpec parse_expr() {
        FunctionSpec out;
        double sign = 1.0;
        if (accept('-')) sign = -1.0;
        else accept('+');
        FunctionSpec t = parse_term();
        for (auto& m : t.terms) m.coef *= sign;
        out.terms = t.terms;
        for (;;) {
            skip();
            if (accept('+'))
                sign = 1.0;
            else if (accept('-'))
                sign = -1.0;
            else
                return out;
            t = parse_term();
            for (auto& m : t.terms) {
                m.coef *= sign;
                out.terms.push_back(m);
            }
        }
    }
};

} // namespace detail

inline FunctionSpec FunctionSpec::parse(const std::string& text) {
    detail::PolyParser p{text, 0, false, true};
    FunctionSpec f = p.parse_expr();
    if (!p.eof()) p.fail("trailing input");
    return f;
}

inline PsiSpec PsiSpec::parse(const std::string& text) {
    detail::PolyParser p{text, 0, true, false};
    FunctionSpec f = p.parse_expr();
    if (!p.eof()) p.fail("trailing input");
    PsiSpec out;
    for (const auto& t : f.terms) {
        int deg = 0;
        for (const auto& pw : t.powers) {
            if (pw.first.kind != -1) throw domain_error("psi may only use the variable x");
            deg += pw.second;
        }
        if (static_cast<int>(out.coef.size()) <= deg) out.coef.resize(deg + 1, 0.0);
        out.coef[deg] += t.coef;
    }
    if (out.coef.empty()) out.coef.push_back(0.0);
    return out;
}

namespace detail {

// dense tensor with labeled axes, every axis of length N
struct LTensor {
    std::vector<int> labels;
    std::vector<double> data;
    int N = 0;

    std::size_t order() const { return labels.size(); }
};

// moments <sigma_{i1}...sigma_{ir}> of one system, cached as subset moments
// indexed by bitmask (repeated indices cancel through the XOR parity)
class SystemMoments {
public:
    SystemMoments(const std::vector<double>& w_normalized, int N)
        : w_(&w_normalized), N_(N), sub_(std::size_t{1} << N, 0.0), have_(N + 1, false) {
        sub_[0] = 1.0;
        have_[0] = true;
    }

    double subset(std::uint32_t mask) {
        const int pc = std::popcount(mask);
        if (!have_[pc]) compute_popcount(pc);
        return sub_[mask];
    }

    // full dense tensor of the given order
    LTensor dense(int order, const std::vector<int>& labels) {
        if (order > 6) throw guard_error("gg: per-replica moment order above 6");
        std::size_t size = 1;
        for (int i = 0; i < order; ++i) size *= N_;
        if (size > (std::size_t{3} << 20))
            throw guard_error("gg: moment tensor too large for this N");
        for (int pc = order; pc >= 0; pc -= 2)
            if (!have_[pc]) compute_popcount(pc);
        LTensor t;
        t.N = N_;
        t.labels = labels;
        t.data.resize(size);
        std::vector<int> idx(order, 0);
        for (std::size_t flat = 0; flat < size; ++flat) {
            std::uint32_t mask = 0;
            std::size_t rem = flat;
            for (int a = order - 1; a >= 0; --a) {
                mask ^= 1u << (rem % N_);
                rem /= N_;
            }
            t.data[flat] = sub_[mask];
        }
        return t;
    }

private:
    void compute_popcount(int r) {
        // enumerate all masks of popcount r, one pass each over the weights
        std::vector<int> comb(r);
        for (int i = 0; i < r; ++i) comb[i] = i;
        const std::size_t M = w_->size();
        for (;;) {
            std::uint32_t mask = 0;
            for (int i = 0; i < r; ++i) mask |= 1u << comb[i];
            double acc = 0.0;
            for (std::size_t cfg = 0; cfg < M; ++cfg) {
                const int flips = std::popcount(mask & ~static_cast<std::uint32_t>(cfg)) & 1;
                acc += flips ? -(*w_)[cfg] : (*w_)[cfg];
            }
            sub_[mask] = acc;
            int i = r - 1;
            while (i >= 0 && comb[i] == N_ - r + i) --i;
            if (i < 0) break;
            ++comb[i];
            for (int j = i + 1; j < r; ++j) comb[j] = comb[j - 1] + 1;
        }
        have_[r] = true;
    }

    const std::vector<double>* w_;
    int N_;
    std::vector<double> sub_;
    std::vector<char> have_;
};

inline LTensor contract(const LTensor& A, const LTensor& B) {
    std::vector<int> shared;
    for (int la : A.labels)
        if (std::find(B.labels.begin(), B.labels.end(), la) != B.labels.end())
            shared.push_back(la);
    LTensor out;
    out.N = A.N;
    std::vector<int> a_free, b_free;
    for (int la : A.labels)
        if (std::find(shared.begin(), shared.end(), la) == shared.end()) a_free.push_back(la);
    for (int lb : B.labels)
        if (std::find(shared.begin(), shared.end(), lb) == shared.end()) b_free.push_back(lb);
    out.labels = a_free;
    out.labels.insert(out.labels.end(), b_free.begin(), b_free.end());

    const int N = A.N;
    auto stride_of = [N](const LTensor& t, int label) {
        std::size_t s = 1;
        for (int a = static_cast<int>(t.labels.size()) - 1; a >= 0; --a) {
            if (t.labels[a] == label) return s;
            s *= N;
        }
        throw numerical_error("gg: label bookkeeping");
    };

    std::vector<std::size_t> sa_free, sb_free, sa_sh, sb_sh;
    for (int l : a_free) sa_free.push_back(stride_of(A, l));
    for (int l : b_free) sb_free.push_back(stride_of(B, l));
    for (int l : shared) {
        sa_sh.push_back(stride_of(A, l));
        sb_sh.push_back(stride_of(B, l));
    }

    std::size_t out_size = 1;
    for (std::size_t i = 0; i < out.labels.size(); ++i) out_size *= N;
    out.data.assign(out_size, 0.0);

    const int nf = static_cast<int>(out.labels.size());
    const int ns = static_cast<int>(shared.size());
    std::vector<int> fidx(nf, 0), sidx(ns, 0);
    for (std::size_t flat = 0; flat < out_size; ++flat) {
        std::size_t offa = 0, offb = 0;
        {
            std::size_t rem = flat;
            for (int a = nf - 1; a >= 0; --a) {
                const int v = static_cast<int>(rem % N);
                rem /= N;
                if (a < static_cast<int>(a_free.size()))
                    offa += sa_free[a] * v;
                else
                    offb += sb_free[a - a_free.size()] * v;
            }
        }
        double acc = 0.0;
        std::fill(sidx.begin(), sidx.end(), 0);
        for (;;) {
            std::size_t pa = offa, pb = offb;
            for (int s = 0; s < ns; ++s) {
                pa += sa_sh[s] * sidx[s];
                pb += sb_sh[s] * sidx[s];
            }
            acc += A.data[pa] * B.data[pb];
            int s = ns - 1;
            while (s >= 0 && ++sidx[s] == N) sidx[s--] = 0;
            if (s < 0) break;
        }
        out.data[flat] = acc;
    }
    return out;
}

// <monomial> under the product Gibbs measure: each overlap factor carries one
// summed site index; replica components factorize into per-system moment
// tensors; the resulting network is contracted greedily.
inline double gibbs_monomial(const GGMonomial& mono, SystemMoments& sys1, SystemMoments& sys2,
                             int N) {
    struct Slot {
        int system; // 1 or 2
        int replica;
    };
    // per (system, replica) node: incident edge labels
    std::map<std::pair<int, int>, std::vector<int>> nodes;
    int edge = 0;
    for (const auto& pw : mono.powers) {
        const OverlapVar& v = pw.first;
        for (int rep = 0; rep < pw.second; ++rep) {
            if (v.kind != 0 && v.l1 == v.l2) continue; // R^j_{ll} = 1
            const Slot s1{v.kind == 2 ? 2 : 1, v.l1};
            const Slot s2{v.kind == 1 ? 1 : 2, v.l2};
            nodes[{s1.system, s1.replica}].push_back(edge);
            nodes[{s2.system, s2.replica}].push_back(edge);
            ++edge;
        }
    }
    if (edge == 0) return mono.coef;

    std::vector<LTensor> parts;
    for (const auto& [key, labels] : nodes) {
        SystemMoments& sys = key.first == 1 ? sys1 : sys2;
        parts.push_back(sys.dense(static_cast<int>(labels.size()), labels));
    }

    double scalar = 1.0;
    while (!parts.empty()) {
        // pull out finished scalars
        for (std::size_t i = 0; i < parts.size();) {
            if (parts[i].labels.empty()) {
                scalar *= parts[i].data[0];
                parts.erase(parts.begin() + i);
            } else {
                ++i;
            }
        }
        if (parts.empty()) break;
        // greedy: contract the pair leaving the smallest result order
        std::size_t bi = 0, bj = 1;
        int best = 1 << 20;
        for (std::size_t i = 0; i < parts.size(); ++i)
            for (std::size_t j = i + 1; j < parts.size(); ++j) {
                int sh = 0;
                for (int la : parts[i].labels)
                    if (std::find(parts[j].labels.begin(), parts[j].labels.end(), la) !=
                        parts[j].labels.end())
                        ++sh;
                if (sh == 0) continue;
                const int res = static_cast<int>(parts[i].order() + parts[j].order()) - 2 * sh;
                if (res < best) {
                    best = res;
                    bi = i;
                    bj = j;
                }
            }
        if (best == (1 << 20)) throw numerical_error("gg: disconnected open network");
        LTensor merged = contract(parts[bi], parts[bj]);
        parts.erase(parts.begin() + bj);
        parts[bi] = std::move(merged);
    }

    double scale = 1.0;
    for (int e = 0; e < edge; ++e) scale /= N;
    return mono.coef * scale * scalar;
}

inline double gibbs_expect(const FunctionSpec& f, SystemMoments& sys1, SystemMoments& sys2,
                           int N) {
    double acc = 0.0;
    for (const auto& t : f.terms) acc += gibbs_monomial(t, sys1, sys2, N);
    return acc;
}

// f * psi(V) expanded as an overlap polynomial
inline FunctionSpec times_psi(const FunctionSpec& f, const PsiSpec& psi, OverlapVar v) {
    FunctionSpec pv;
    for (std::size_t a = 0; a < psi.coef.size(); ++a) {
        if (psi.coef[a] == 0.0) continue;
        GGMonomial m;
        m.coef = psi.coef[a];
        if (a > 0) m.powers.push_back({v, static_cast<int>(a)});
        pv.terms.push_back(std::move(m));
    }
    if (pv.terms.empty()) pv = FunctionSpec::constant(0.0);
    return f * pv;
}

} // namespace detail

// Estimates of the four coupled-system functionals with standard errors.
struct GGReport {
    int N = 0, M = 0, n = 0;
    double phi1 = 0.0, phi1_se = 0.0;
    double psi1 = 0.0, psi1_se = 0.0;
    double phi2 = 0.0, phi2_se = 0.0;
    double psi2 = 0.0, psi2_se = 0.0;
};

// Unbiased estimates of Phi_{j,n}(f, psi) and Psi_{j,n}(f, psi) over M
// disorder realizations.  Within a realization every Gibbs average is exact:
// replica moments of the overlaps factorize through single-system moment
// tensors.  The product term of Phi_{j,n} uses the cross-realization
// U-statistic, and its standard error is jackknifed.
inline GGReport gg_residuals(const CoupledModelSpec& coupled, int N, int M, int n,
                             const PsiSpec& psi, const FunctionSpec& f, std::uint64_t seed,
                             DisorderScheme scheme = DisorderScheme::tensor) {
    if (n < 1 || n > 4) throw guard_error("gg_residuals: replica count n must be in [1,4]");
    if (f.degree() > 6 || psi.degree() > 6)
        throw guard_error("gg_residuals: polynomial degree above 6");
    if (f.max_replica() > n)
        throw domain_error("gg_residuals: f may only use replicas 1..n");
    if (M < 4) throw domain_error("gg_residuals: M >= 4 required");

    DisorderSampler sampler(coupled, N, scheme);

    // per-realization exact Gibbs values
    std::vector<double> f_val(M), psi1_pair(M), psi2_pair(M);
    std::vector<std::vector<double>> r1_terms(M), r2_terms(M), c1_terms(M), c2_terms(M);

    parallel_for(M, [&](std::size_t i) {
        const auto real = sampler.sample(seed, i);
        auto t1 = detail::weight_table(real.x1, real.h1, N);
        auto t2 = detail::weight_table(real.x2, real.h2, N);
        double z1 = 0.0, z2 = 0.0;
        for (double w : t1.w) z1 += w;
        for (double w : t2.w) z2 += w;
        for (double& w : t1.w) w /= z1;
        for (double& w : t2.w) w /= z2;
        detail::SystemMoments sys1(t1.w, N), sys2(t2.w, N);

        auto ev = [&](const FunctionSpec& fs) {
            return detail::gibbs_expect(fs, sys1, sys2, N);
        };
        f_val[i] = ev(f);
        psi1_pair[i] = ev(detail::times_psi(FunctionSpec::constant(1.0), psi, {1, 1, 2}));
        psi2_pair[i] = ev(detail::times_psi(FunctionSpec::constant(1.0), psi, {2, 1, 2}));
        r1_terms[i].resize(n + 2);
        r2_terms[i].resize(n + 2);
        c1_terms[i].resize(n + 2);
        c2_terms[i].resize(n + 2);
        for (int l = 1; l <= n + 1; ++l) {
            r1_terms[i][l] = l == 1 ? 0.0 : ev(detail::times_psi(f, psi, {1, 1, l}));
            r2_terms[i][l] = l == 1 ? 0.0 : ev(detail::times_psi(f, psi, {2, 1, l}));
            c1_terms[i][l] = ev(detail::times_psi(f, psi, {0, 1, l}));
            c2_terms[i][l] = ev(detail::times_psi(f, psi, {0, l, 1}));
        }
    });

    GGReport rep;
    rep.N = N;
    rep.M = M;
    rep.n = n;

    // Psi_{j,n}: linear in per-realization values
    auto linear_stat = [&](const std::vector<std::vector<double>>& terms) {
        std::vector<double> v(M);
        for (int i = 0; i < M; ++i) {
            double s = 0.0;
            for (int l = 1; l <= n; ++l) s += terms[i][l];
            v[i] = terms[i][n + 1] - s / n;
        }
        return detail::mean_se(v);
    };
    auto ms = linear_stat(c1_terms);
    rep.psi1 = ms.mean;
    rep.psi1_se = ms.se;
    ms = linear_stat(c2_terms);
    rep.psi2 = ms.mean;
    rep.psi2_se = ms.se;

    // Phi_{j,n}: linear part minus (1/n) E<f> E<psi(R^j_12)>, the latter via
    // the unbiased two-sample product statistic; jackknife standard error
    auto phi_stat = [&](const std::vector<std::vector<double>>& terms,
                        const std::vector<double>& pair_vals, double& out, double& out_se) {
        std::vector<double> lin(M);
        for (int i = 0; i < M; ++i) {
            double s = 0.0;
            for (int l = 2; l <= n; ++l) s += terms[i][l];
            lin[i] = terms[i][n + 1] - s / n;
        }
        double SL = 0.0, Sf = 0.0, Sg = 0.0, Sfg = 0.0;
        for (int i = 0; i < M; ++i) {
            SL += lin[i];
            Sf += f_val[i];
            Sg += pair_vals[i];
            Sfg += f_val[i] * pair_vals[i];
        }
        const double Md = M;
        const double U = (Sf * Sg - Sfg) / (Md * (Md - 1.0));
        out = SL / Md - U / n;

        std::vector<double> loo(M);
        for (int i = 0; i < M; ++i) {
            const double u_i = ((Sf - f_val[i]) * (Sg - pair_vals[i]) -
                                (Sfg - f_val[i] * pair_vals[i])) /
                               ((Md - 1.0) * (Md - 2.0));
            loo[i] = (SL - lin[i]) / (Md - 1.0) - u_i / n;
        }
        double lm = 0.0;
        for (double v : loo) lm += v;
        lm /= Md;
        double s2 = 0.0;
        for (double v : loo) s2 += (v - lm) * (v - lm);
        out_se = std::sqrt((Md - 1.0) / Md * s2);
    };
    phi_stat(r1_terms, psi1_pair, rep.phi1, rep.phi1_se);
    phi_stat(r2_terms, psi2_pair, rep.phi2, rep.phi2_se);
    return rep;
}

} // namespace spinglass
