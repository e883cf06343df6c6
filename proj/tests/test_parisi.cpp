#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <functional>

#include "spinglass/parisi.hpp"
#include "spinglass/rng.hpp"

using namespace spinglass;

namespace {

constexpr double kLog2 = 0.6931471805599453094;

// independent oracle: composite Simpson for E f(mean + sd z), z standard normal
double simpson_gauss(double mean, double sd, const std::function<double(double)>& f,
                     int intervals = 4000) {
    if (sd == 0.0) return f(mean);
    const double lo = -10.0, hi = 10.0;
    const double h = (hi - lo) / intervals;
    auto g = [&](double z) {
        return f(mean + sd * z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
    };
    double acc = g(lo) + g(hi);
    for (int i = 1; i < intervals; ++i) acc += g(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// closed-form RS value (the k+1 level is integrated exactly by the Gaussian
// cosh identity): P = log2 + E log cosh(h + z sqrt(xi'(c)))
//                    + (xi'(1) - xi'(c))/2 - (theta(1) - theta(c))/2
double rs_oracle(const MixtureSpec& spec, double mean, double stdv, double c) {
    const double sd = std::sqrt(stdv * stdv + spec.xi(c, 1));
    const double elc = simpson_gauss(mean, sd, [](double y) { return std::log(std::cosh(y)); });
    return kLog2 + elc + 0.5 * (spec.xi(1.0, 1) - spec.xi(c, 1)) -
           0.5 * (spec.theta(1.0) - spec.theta(c));
}

// nested Simpson oracle for k = 1 (top level via the exact Gaussian identity)
double k1_oracle(const MixtureSpec& spec, double mean, double stdv,
                 const OrderParameterTriplet& t) {
    const double m1 = t.m[1];
    const double q1 = t.q[1], q2 = t.q[2];
    auto a2 = [&](double x) {
        return std::log(std::cosh(x)) + 0.5 * (spec.xi(1.0, 1) - spec.xi(q2, 1));
    };
    const double s1 = std::sqrt(spec.xi(q2, 1) - spec.xi(q1, 1));
    auto a1 = [&](double x) {
        if (m1 == 0.0) return simpson_gauss(x, s1, a2, 2000);
        const double e =
            simpson_gauss(x, s1, [&](double y) { return std::exp(m1 * a2(y)); }, 2000);
        return std::log(e) / m1;
    };
    const double s0 = std::sqrt(stdv * stdv + spec.xi(q1, 1));
    const double x0 = simpson_gauss(mean, s0, a1, 800);
    const double corr = m1 * (spec.theta(q2) - spec.theta(q1)) + (spec.theta(1.0) - spec.theta(q2));
    return kLog2 + x0 - 0.5 * corr;
}

} // namespace

TEST_CASE("functional trivial and closed-form cases", "[parisi]") {
    OrderParameterTriplet rs = rs_triplet(0.0);

    SECTION("zero mixture gives log 2") {
        MixtureSpec zero({0.0});
        auto sol = evaluate_functional(zero, {0.0, 0.0}, rs);
        CHECK(sol.value == Catch::Approx(kLog2).margin(1e-12));
        auto sol2 = evaluate_functional(zero, {0.0, 0.0}, rs_triplet(0.4));
        CHECK(sol2.value == Catch::Approx(kLog2).margin(1e-12));
    }

    SECTION("SK at beta = 0.3, h = 0: log 2 + beta^2/2") {
        MixtureSpec sk({0.3});
        auto sol = evaluate_functional(sk, {0.0, 0.0}, rs);
        CHECK(sol.value == Catch::Approx(kLog2 + 0.045).margin(1e-10));
        CHECK(sol.x0 == Catch::Approx(0.09).margin(1e-10));
    }

    SECTION("SK at beta = 0.3, constant h = 0.5") {
        MixtureSpec sk({0.3});
        auto sol = evaluate_functional(sk, {0.5, 0.0}, rs);
        CHECK(sol.value ==
              Catch::Approx(kLog2 + std::log(std::cosh(0.5)) + 0.045).margin(1e-10));
    }

    SECTION("value reconstructs from x0 and the triplet") {
        MixtureSpec spec({0.5, 0.3});
        auto t = rs_triplet(0.35);
        auto sol = evaluate_functional(spec, {0.2, 0.4}, t);
        const double corr = spec.theta(1.0) - spec.theta(0.35);
        CHECK(sol.value == Catch::Approx(kLog2 + sol.x0 - 0.5 * corr).margin(1e-14));
    }
}

TEST_CASE("functional matches independent quadrature oracles", "[parisi]") {
    SECTION("RS triplets") {
        RandomStream rsr{11};
        for (int trial = 0; trial < 3; ++trial) {
            MixtureSpec spec({0.2 + 0.5 * rsr.next_double(), 0.4 * rsr.next_double()});
            const double mean = rsr.next_double() - 0.5;
            const double stdv = 0.5 * rsr.next_double();
            const double c = 0.1 + 0.8 * rsr.next_double();
            auto sol = evaluate_functional(spec, {mean, stdv}, rs_triplet(c));
            CHECK(sol.value == Catch::Approx(rs_oracle(spec, mean, stdv, c)).margin(2e-9));
        }
    }

    SECTION("k = 1 nested oracle") {
        MixtureSpec spec({0.5});
        OrderParameterTriplet t{1, {0.0, 0.4, 1.0}, {0.0, 0.3, 0.7, 1.0}};
        auto sol = evaluate_functional(spec, {0.3, 0.0}, t);
        CHECK(sol.value == Catch::Approx(k1_oracle(spec, 0.3, 0.0, t)).margin(1e-8));

        MixtureSpec mixed({0.4, 0.3});
        OrderParameterTriplet t2{1, {0.0, 0.7, 1.0}, {0.0, 0.2, 0.55, 1.0}};
        auto sol2 = evaluate_functional(mixed, {0.0, 0.4}, t2);
        CHECK(sol2.value == Catch::Approx(k1_oracle(mixed, 0.0, 0.4, t2)).margin(1e-8));
    }
}

TEST_CASE("relabeling invariance", "[parisi]") {
    MixtureSpec spec({0.5, 0.3});
    OrderParameterTriplet a{1, {0.0, 0.4, 1.0}, {0.0, 0.3, 0.7, 1.0}};
    // same measure with a zero-mass atom inserted
    OrderParameterTriplet b{2, {0.0, 0.4, 0.4, 1.0}, {0.0, 0.3, 0.5, 0.7, 1.0}};
    // and with a duplicated location
    OrderParameterTriplet c{2, {0.0, 0.2, 0.4, 1.0}, {0.0, 0.3, 0.3, 0.7, 1.0}};
    const FieldMarginal f{0.2, 0.3};
    const double va = evaluate_functional(spec, f, a).value;
    CHECK(evaluate_functional(spec, f, b).value == Catch::Approx(va).margin(1e-12));
    CHECK(evaluate_functional(spec, f, c).value == Catch::Approx(va).margin(1e-12));
}

TEST_CASE("Lipschitz continuity in the measure", "[parisi]") {
    MixtureSpec spec({0.5, 0.3});
    const double lip = 0.5 * spec.xi(1.0, 2);
    RandomStream rsr{23};
    const FieldMarginal f{0.1, 0.2};
    auto rand_triplet = [&](int k) {
        OrderParameterTriplet t;
        t.k = k;
        t.m.resize(k + 2);
        t.q.resize(k + 3);
        t.m.front() = 0.0;
        t.m.back() = 1.0;
        t.q.front() = 0.0;
        t.q.back() = 1.0;
        std::vector<double> ms(k), qs(k + 1);
        for (auto& v : ms) v = rsr.next_double();
        for (auto& v : qs) v = rsr.next_double();
        std::sort(ms.begin(), ms.end());
        std::sort(qs.begin(), qs.end());
        for (int i = 0; i < k; ++i) t.m[i + 1] = ms[i];
        for (int i = 0; i <= k; ++i) t.q[i + 1] = qs[i];
        return t;
    };
    for (int trial = 0; trial < 6; ++trial) {
        auto t1 = rand_triplet(2), t2 = rand_triplet(2);
        const double dp = std::fabs(evaluate_functional(spec, f, t1).value -
                                    evaluate_functional(spec, f, t2).value);
        CHECK(dp <= lip * measure_distance(t1, t2) + 1e-8);
    }
}

TEST_CASE("X0 is monotone in the exponents", "[parisi]") {
    // lowering m_1 toward 0 cannot increase X_0 (Jensen, level by level)
    MixtureSpec spec({0.6});
    const FieldMarginal f{0.3, 0.0};
    double prev = -1e300;
    for (double m1 : {0.1, 0.4, 0.8}) {
        OrderParameterTriplet t{1, {0.0, m1, 1.0}, {0.0, 0.25, 0.6, 1.0}};
        const double x0 = evaluate_functional(spec, f, t).x0;
        CHECK(x0 >= prev - 1e-10);
        prev = x0;
    }
}

TEST_CASE("phi profile", "[parisi]") {
    MixtureSpec spec({0.5, 0.3});

    SECTION("terminal condition at q = 1") {
        auto gf = phi_profile(spec, rs_triplet(0.3), 1.0);
        for (int i = 0; i < gf.grid.n; i += 97)
            CHECK(gf.d0[i] == Catch::Approx(log_cosh(gf.grid.at(i))).margin(1e-13));
    }

    SECTION("RS band: phi = log cosh + (xi'(1) - xi'(q))/2, dphi = tanh") {
        const double c = 0.3, q = 0.55;
        auto gf = phi_profile(spec, rs_triplet(c), q);
        const double shift = 0.5 * (spec.xi(1.0, 1) - spec.xi(q, 1));
        for (int i = 0; i < gf.grid.n; i += 53) {
            const double x = gf.grid.at(i);
            CHECK(gf.d0[i] == Catch::Approx(log_cosh(x) + shift).margin(1e-10));
            CHECK(gf.d1[i] == Catch::Approx(std::tanh(x)).margin(2e-5));
        }
    }

    SECTION("odd symmetry of the x-derivative") {
        OrderParameterTriplet t{1, {0.0, 0.5, 1.0}, {0.0, 0.2, 0.6, 1.0}};
        auto gf = phi_profile(spec, t, 0.4);
        const int n = gf.grid.n;
        CHECK(std::fabs(gf.d1[n / 2]) < 1e-12);
        for (int i = 0; i < n; i += 101)
            CHECK(gf.d1[i] == Catch::Approx(-gf.d1[n - 1 - i]).margin(1e-10));
    }

    SECTION("derivative bounds on the grid") {
        OrderParameterTriplet t{1, {0.0, 0.5, 1.0}, {0.0, 0.2, 0.6, 1.0}};
        for (double q : {0.0, 0.35, 0.8}) {
            auto gf = phi_profile(spec, t, q);
            double min_d2 = 1e300, max_d2 = -1e300, max_d1 = 0.0, max_d3 = 0.0;
            for (int i = 0; i < gf.grid.n; ++i) {
                max_d1 = std::max(max_d1, std::fabs(gf.d1[i]));
                min_d2 = std::min(min_d2, gf.d2[i]);
                max_d2 = std::max(max_d2, gf.d2[i]);
                max_d3 = std::max(max_d3, std::fabs(gf.d3[i]));
            }
            CHECK(max_d1 <= 1.0 + 1e-8);
            CHECK(min_d2 >= -1e-8);
            CHECK(max_d2 <= 1.0 + 1e-8);
            CHECK(max_d3 <= 4.0 + 1e-6);
        }
    }
}

TEST_CASE("measure distance", "[parisi]") {
    auto d0 = rs_triplet(0.0), d1 = rs_triplet(1.0);
    CHECK(measure_distance(d0, d0) == 0.0);
    CHECK(measure_distance(d0, d1) == Catch::Approx(1.0).margin(1e-15));
    CHECK(measure_distance(rs_triplet(0.25), rs_triplet(0.75)) ==
          Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("pde solver cross-checks", "[parisi]") {
    SECTION("zero mixture: phi stays log cosh") {
        MixtureSpec zero({0.0});
        const UniformGrid g = UniformGrid::symmetric(8.0, 1025);
        auto out = phi_pde_solve(zero, StepCdf{{0.0}, {1.0}}, g, 0, {0.0});
        for (int i = 0; i < g.n; i += 37)
            CHECK(out[0].d0[i] == Catch::Approx(log_cosh(g.at(i))).margin(1e-12));
    }

    SECTION("RS measure agrees with the representation formula") {
        MixtureSpec spec({0.5, 0.3});
        const double c = 0.4;
        EvalSettings st;
        st.grid_points = 2049;
        auto prof = phi_profile(spec, rs_triplet(c), c, st);
        auto out = phi_pde_solve(spec, cdf_of(rs_triplet(c)), prof.grid, 0, {c});
        double max_diff = 0.0;
        for (int i = 0; i < prof.grid.n; ++i)
            max_diff = std::max(max_diff, std::fabs(out[0].d0[i] - prof.d0[i]));
        CHECK(max_diff <= 1e-6);
    }

    SECTION("three-atom measure matches at each atom") {
        MixtureSpec spec({0.3});
        OrderParameterTriplet t{2, {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}, {0.0, 0.2, 0.5, 0.8, 1.0}};
        EvalSettings st;
        st.grid_points = 2049;
        auto grid = phi_profile(spec, t, 0.0, st).grid;
        auto out = phi_pde_solve(spec, cdf_of(t), grid, 0, {0.2, 0.5, 0.8});
        const double qs[] = {0.2, 0.5, 0.8};
        for (int a = 0; a < 3; ++a) {
            auto prof = phi_profile(spec, t, qs[a], st);
            double max_diff = 0.0;
            for (int i = 0; i < grid.n; ++i)
                max_diff = std::max(max_diff, std::fabs(out[a].d0[i] - prof.d0[i]));
            CHECK(max_diff <= 1e-6);
        }
    }

    SECTION("stability guard") {
        MixtureSpec spec({0.5});
        const UniformGrid g = UniformGrid::symmetric(8.0, 1025);
        CHECK_THROWS_AS(phi_pde_solve(spec, cdf_of(rs_triplet(0.3)), g, 5, {0.0}),
                        numerical_error);
    }
}

TEST_CASE("stationarity residuals", "[parisi]") {
    SECTION("RS minimizer at h = 0 has no eligible atom") {
        MixtureSpec sk({0.3});
        auto res = stationarity_residuals(sk, {0.0, 0.0}, rs_triplet(0.0));
        CHECK(res.empty());
    }

    SECTION("RS consistency point zeroes the single residual") {
        MixtureSpec sk({0.3});
        const FieldMarginal f{0.5, 0.0};
        // solve c = E tanh^2(h + z sqrt(xi'(c))) with the Simpson oracle
        auto g = [&](double c) {
            const double sd = std::sqrt(sk.xi(c, 1));
            return simpson_gauss(f.mean, sd,
                                 [](double y) {
                                     const double t = std::tanh(y);
                                     return t * t;
                                 }) -
                   c;
        };
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) > 0.0 ? lo : hi) = mid;
        }
        const double c = 0.5 * (lo + hi);
        auto res = stationarity_residuals(sk, f, rs_triplet(c));
        REQUIRE(res.size() == 1);
        CHECK(std::fabs(res[0]) <= 1e-8);
    }

    SECTION("residuals match finite differences of the functional") {
        MixtureSpec spec({0.5});
        const FieldMarginal f{0.4, 0.0};
        OrderParameterTriplet t{1, {0.0, 0.45, 1.0}, {0.0, 0.25, 0.6, 1.0}};
        auto res = stationarity_residuals(spec, f, t);
        REQUIRE(res.size() == 2);
        // dP/dq_r = (m_r - m_{r-1}) xi''(q_r) (q_r - E W A'^2) / 2
        for (int r = 1; r <= 2; ++r) {
            const double dq = 1e-4;
            auto tp = t, tm = t;
            tp.q[r] += dq;
            tm.q[r] -= dq;
            const double fd = (evaluate_functional(spec, f, tp).value -
                               evaluate_functional(spec, f, tm).value) /
                              (2.0 * dq);
            const double pred = -0.5 * (t.m[r] - t.m[r - 1]) * spec.xi(t.q[r], 2) * res[r - 1];
            CHECK(fd == Catch::Approx(pred).margin(1e-5));
        }
    }
}
