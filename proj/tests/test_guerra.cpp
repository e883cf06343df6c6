#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spinglass/guerra.hpp"
#include "spinglass/rng.hpp"
#include "spinglass/sim.hpp"

using namespace spinglass;

namespace {

constexpr double kTwoLog2 = 2.0 * 0.6931471805599453094;

CoupledModelSpec coupled_of(std::vector<double> b1, std::vector<double> b2, std::vector<double> t,
                            FieldLaw f = {}) {
    return CoupledModelSpec(MixtureSpec(std::move(b1)), MixtureSpec(std::move(b2)), std::move(t),
                            f);
}

// full-path decoupled schedule mirroring the two triplets (cross path zero)
CoupledBoundParams decoupled_schedule(const OrderParameterTriplet& t1,
                                      const OrderParameterTriplet& t2) {
    CoupledBoundParams p;
    p.kappa = t1.k + 1;
    p.n.assign(1, 0.0);
    for (int i = 1; i <= t1.k + 1; ++i) p.n.push_back(t1.m[i]);
    p.rho11 = t1.q;
    p.rho22 = t2.q;
    p.rho12.assign(t1.q.size(), 0.0);
    p.rho21.assign(t1.q.size(), 0.0);
    return p;
}

} // namespace

TEST_CASE("y0 recursion degenerate cases", "[guerra]") {
    SECTION("zero mixtures, zero fields, lambda = 0") {
        auto c = coupled_of({0.0}, {0.0}, {1.0});
        CoupledBoundParams p;
        p.kappa = 1;
        p.n = {0.0, 1.0};
        p.rho11 = p.rho22 = {0.0, 0.5, 1.0};
        p.rho12 = p.rho21 = {0.0, 0.0, 0.0};
        CHECK(y0_recursion(c, p, 0.0) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("zero mixtures, zero fields, general lambda -> log cosh lambda") {
        auto c = coupled_of({0.0}, {0.0}, {1.0});
        CoupledBoundParams p;
        p.kappa = 1;
        p.n = {0.0, 1.0};
        p.rho11 = p.rho22 = {0.0, 0.5, 1.0};
        p.rho12 = p.rho21 = {0.0, 0.0, 0.0};
        for (double l : {-1.5, -0.3, 0.7, 2.0})
            CHECK(y0_recursion(c, p, l) == Catch::Approx(log_cosh(l)).margin(1e-9));
    }
}

TEST_CASE("y0 decoupling identity", "[guerra]") {
    FieldLaw fl;
    fl.mean1 = 0.3;
    fl.mean2 = 0.2;
    fl.std1 = 0.25;
    fl.std2 = 0.3;
    fl.corr = 0.0; // independent fields keep the recursion separable
    auto c = coupled_of({0.5}, {0.4, 0.2}, {0.0, 0.0}, fl);

    OrderParameterTriplet t1{1, {0.0, 0.4, 1.0}, {0.0, 0.25, 0.6, 1.0}};
    OrderParameterTriplet t2{1, {0.0, 0.4, 1.0}, {0.0, 0.2, 0.5, 1.0}};
    auto params = decoupled_schedule(t1, t2);

    const auto sol1 = evaluate_functional(c.spec1(), c.field1(), t1);
    const auto sol2 = evaluate_functional(c.spec2(), c.field2(), t2);

    SECTION("Y_0(0) equals the sum of the single-system recursions") {
        CHECK(y0_recursion(c, params, 0.0) ==
              Catch::Approx(sol1.x0 + sol2.x0).margin(1e-9));
    }

    SECTION("the dense two-dimensional path agrees with the exact split") {
        GuerraSettings st;
        st.force_dense = true;
        st.grid_points = 257;
        st.quad_n = 14;
        CHECK(y0_recursion(c, params, 0.0, st) ==
              Catch::Approx(sol1.x0 + sol2.x0).margin(5e-6));
    }

    SECTION("coupled bound at lambda = 0 equals P1 + P2") {
        auto res = coupled_rsb_bound(c, params, 0.0, false, 0.0);
        CHECK(res.value == Catch::Approx(sol1.value + sol2.value).margin(1e-9));
    }
}

TEST_CASE("coupled bound closed forms for zero mixtures", "[guerra]") {
    auto c = coupled_of({0.0}, {0.0}, {1.0});
    CoupledBoundParams p;
    p.kappa = 1;
    p.n = {0.0, 1.0};
    p.rho11 = p.rho22 = {0.0, 0.5, 1.0};

    SECTION("u = 0: optimum at lambda = 0 gives 2 log 2") {
        p.rho12 = p.rho21 = {0.0, 0.0, 0.0};
        auto res = coupled_rsb_bound(c, p, 0.0, true);
        CHECK(res.value == Catch::Approx(kTwoLog2).margin(1e-6));
        CHECK(res.lambda == Catch::Approx(0.0).margin(1e-3));
    }

    SECTION("u = 0.5: lambda* = artanh(u), binary entropy defect") {
        p.rho12 = p.rho21 = {0.0, 0.5, 0.5};
        const double u = 0.5;
        auto res = coupled_rsb_bound(c, p, u, true);
        const double lstar = std::atanh(u);
        const double expect = kTwoLog2 + log_cosh(lstar) - u * lstar;
        CHECK(res.value == Catch::Approx(expect).margin(1e-6));
        CHECK(res.lambda == Catch::Approx(lstar).margin(1e-3));
    }
}

TEST_CASE("schedule validation", "[guerra]") {
    auto c = coupled_of({0.5}, {0.5}, {1.0});

    SECTION("PSD violation is rejected") {
        CoupledBoundParams p;
        p.kappa = 1;
        p.n = {0.0, 1.0};
        p.rho11 = p.rho22 = {0.0, 0.1, 1.0};
        p.rho12 = p.rho21 = {0.0, 0.8, 0.8};
        CHECK_THROWS_AS(p.validate(c), numerical_error);
    }

    SECTION("inconsistent cross paths are rejected") {
        CoupledBoundParams p;
        p.kappa = 1;
        p.n = {0.0, 1.0};
        p.rho11 = p.rho22 = {0.0, 0.5, 1.0};
        p.rho12 = {0.0, 0.2, 0.2};
        p.rho21 = {0.0, 0.0, 0.2};
        CHECK_THROWS_AS(p.validate(c), numerical_error);
    }

    SECTION("the manageable schedule is admissible") {
        OrderParameterTriplet t1{1, {0.0, 0.4, 1.0}, {0.0, 0.3, 0.6, 1.0}};
        OrderParameterTriplet t2{1, {0.0, 0.4, 1.0}, {0.0, 0.25, 0.55, 1.0}};
        const double u = 0.8 * std::sqrt(0.3 * 0.25);
        auto p = CoupledBoundParams::manageable_schedule(t1, t2, 1, u);
        CHECK(p.kappa == 2);
        CHECK_NOTHROW(p.validate(c));
        CHECK(p.u() == Catch::Approx(u));
    }
}

TEST_CASE("y0 convexity in lambda", "[guerra]") {
    FieldLaw fl;
    fl.mean1 = 0.2;
    fl.mean2 = 0.1;
    fl.std1 = 0.3;
    fl.std2 = 0.2;
    fl.corr = 0.5;
    auto c = coupled_of({0.5}, {0.45}, {0.7}, fl);
    OrderParameterTriplet t1{1, {0.0, 0.5, 1.0}, {0.0, 0.3, 0.6, 1.0}};
    OrderParameterTriplet t2{1, {0.0, 0.5, 1.0}, {0.0, 0.25, 0.5, 1.0}};
    auto p = CoupledBoundParams::manageable_schedule(t1, t2, 1, 0.15);
    GuerraSettings st;
    st.grid_points = 193;
    st.quad_n = 10;
    const double d = 0.05;
    for (double l : {-2.0, 0.0, 1.5}) {
        const double y0 = y0_recursion(c, p, l, st);
        const double yp = y0_recursion(c, p, l + d, st);
        const double ym = y0_recursion(c, p, l - d, st);
        const double second = (yp - 2.0 * y0 + ym) / (d * d);
        CHECK(second >= -1e-6);
        CHECK(second <= 1.0 + 1e-6);
    }
}

TEST_CASE("manageable bound", "[guerra]") {
    SECTION("penalty vanishes at the map's fixed point (identical systems)") {
        FieldLaw fl;
        fl.mean1 = fl.mean2 = 0.3;
        fl.std1 = fl.std2 = 0.4;
        fl.corr = 1.0;
        auto c = coupled_of({0.4}, {0.4}, {1.0}, fl);
        const double cc = rs_fixed_point(c.spec1(), c.field1());
        ManageableBound mb(c, rs_triplet(cc), rs_triplet(cc), 1);
        CHECK(mb(cc) == Catch::Approx(mb.p1() + mb.p2()).margin(1e-9));
        CHECK(mb.phi_tilde(cc) == Catch::Approx(cc).margin(1e-5));
    }

    SECTION("with empty prefix sums the bound never exceeds P1 + P2") {
        FieldLaw fl;
        fl.mean1 = 0.25;
        fl.mean2 = 0.2;
        fl.std1 = 0.3;
        fl.std2 = 0.35;
        fl.corr = 0.4;
        auto c = coupled_of({0.4}, {0.5}, {0.6}, fl);
        const double v1 = rs_fixed_point(c.spec1(), c.field1());
        const double v2 = rs_fixed_point(c.spec2(), c.field2());
        ManageableBound mb(c, rs_triplet(v1), rs_triplet(v2), 1);
        const double B = std::sqrt(v1 * v2);
        for (int i = 0; i <= 20; ++i) {
            const double u = -B + 2.0 * B * i / 20;
            CHECK(mb(u) <= mb.p1() + mb.p2() + 1e-9);
        }
    }

    SECTION("triplets must share m") {
        auto c = coupled_of({0.4}, {0.5}, {0.6});
        OrderParameterTriplet t1{1, {0.0, 0.4, 1.0}, {0.0, 0.3, 0.6, 1.0}};
        OrderParameterTriplet t2{1, {0.0, 0.5, 1.0}, {0.0, 0.3, 0.6, 1.0}};
        CHECK_THROWS_AS(ManageableBound(c, t1, t2, 1), domain_error);
    }
}

TEST_CASE("chaos band bound", "[guerra]") {
    FieldLaw fl;
    fl.mean1 = 0.3;
    fl.mean2 = 0.25;
    fl.std1 = 0.3;
    fl.std2 = 0.35;
    fl.corr = 0.6;
    auto c = coupled_of({0.4}, {0.5}, {1.0}, fl);
    const double c1 = rs_fixed_point(c.spec1(), c.field1());
    const double c2 = rs_fixed_point(c.spec2(), c.field2());
    auto sol1 = evaluate_functional(c.spec1(), c.field1(), rs_triplet(c1));
    auto sol2 = evaluate_functional(c.spec2(), c.field2(), rs_triplet(c2));

    SECTION("collapses to P1 + P2 at (c1, c2, u_f)") {
        auto fp = find_uf(c, sol1, sol2, c1, c2, 1e-10);
        ChaosBandBound band(c, sol1, sol2, c1, c2, c1, c2);
        CHECK(band.positive_parts() == 0.0);
        CHECK(band(fp.u_f) == Catch::Approx(sol1.value + sol2.value).margin(1e-12));
    }

    SECTION("positive parts are nonnegative for v above c") {
        ChaosBandBound band(c, sol1, sol2, c1, c2, std::min(0.95, c1 + 0.1),
                            std::min(0.95, c2 + 0.1));
        CHECK(band.positive_parts() >= 0.0);
        CHECK(band.positive_parts() > 0.0);
    }
}

TEST_CASE("recursion route never exceeds the closed-form manageable bound", "[guerra]") {
    // with the manageable schedule, the coupled bound evaluated at the
    // majorant minimizer lambda* = u - Y0'(0) is at least as tight as the
    // closed-form bound (the quadratic majorant bounds Y0 from above)
    FieldLaw fl;
    fl.mean1 = 0.3;
    fl.mean2 = 0.25;
    fl.std1 = 0.3;
    fl.std2 = 0.35;
    fl.corr = 0.5;
    auto c = coupled_of({0.5}, {0.45}, {0.6}, fl);
    const double v1 = rs_fixed_point(c.spec1(), c.field1());
    const double v2 = rs_fixed_point(c.spec2(), c.field2());
    ManageableBound mb(c, rs_triplet(v1), rs_triplet(v2), 1);
    GuerraSettings st;
    st.grid_points = 257;
    st.quad_n = 12;
    for (double frac : {-0.7, 0.0, 0.5, 0.95}) {
        const double u = frac * std::sqrt(v1 * v2);
        auto params = CoupledBoundParams::manageable_schedule(rs_triplet(v1), rs_triplet(v2), 1, u);
        auto res = coupled_rsb_bound(c, params, u, true, 0.0, st);
        CHECK(res.value <= mb(u) + 1e-6);
    }
}

TEST_CASE("coupled bound dominates the enumerated shell free energy", "[guerra]") {
    FieldLaw fl;
    fl.mean1 = 0.25;
    fl.mean2 = 0.3;
    fl.std1 = 0.3;
    fl.std2 = 0.25;
    fl.corr = 0.5;
    auto c = coupled_of({0.5}, {0.45}, {0.6}, fl);
    const double v1 = rs_fixed_point(c.spec1(), c.field1());
    const double v2 = rs_fixed_point(c.spec2(), c.field2());
    const double B = std::sqrt(v1 * v2);
    const int N = 8;
    auto rep = overlap_statistics(c, N, 100, 21, DisorderScheme::tensor);

    GuerraSettings st;
    st.grid_points = 193;
    st.quad_n = 10;
    for (int d = 0; d <= N; ++d) {
        const double u = rep.u[d];
        if (std::fabs(u) > B) continue;
        auto params = CoupledBoundParams::manageable_schedule(rs_triplet(v1), rs_triplet(v2), 1, u);
        // any lambda yields a valid upper bound; use the majorant minimizer
        auto res = coupled_rsb_bound(c, params, u, true, 0.0, st);
        CHECK(rep.p_shell[d] <= res.value + 3.0 * rep.p_shell_se[d]);
    }
}

TEST_CASE("manageable bound dominates for an SK + 4-spin pair", "[guerra]") {
    FieldLaw fl;
    fl.mean1 = 0.3;
    fl.mean2 = 0.2;
    fl.std1 = 0.3;
    fl.std2 = 0.35;
    fl.corr = 0.4;
    auto c = coupled_of({0.4, 0.0}, {0.2, 0.3}, {0.7, 0.5}, fl);
    // k = 2 triplets sharing m, iota = 2: the prefix theta sums are exercised
    OrderParameterTriplet t1{2, {0.0, 0.3, 0.6, 1.0}, {0.0, 0.1, 0.3, 0.6, 1.0}};
    OrderParameterTriplet t2{2, {0.0, 0.3, 0.6, 1.0}, {0.0, 0.08, 0.25, 0.55, 1.0}};
    ManageableBound mb(c, t1, t2, 2);
    const double B = std::sqrt(mb.v1() * mb.v2());
    const int N = 8;
    auto rep = overlap_statistics(c, N, 150, 31, DisorderScheme::tensor);
    int tested = 0;
    for (int d = 0; d <= N; ++d) {
        const double u = rep.u[d];
        if (std::fabs(u) > B) continue;
        ++tested;
        CHECK(rep.p_shell[d] <= mb(u) + 3.0 * rep.p_shell_se[d]);
    }
    CHECK(tested > 0);
}

TEST_CASE("identical-system band integrand", "[guerra]") {
    SECTION("common field: the u > 0 integrand vanishes") {
        FieldLaw fl;
        fl.mean1 = fl.mean2 = 0.4;
        fl.std1 = fl.std2 = 0.5;
        fl.corr = 1.0;
        auto c = coupled_of({0.5}, {0.5}, {1.0}, fl);
        CHECK(identical_band_integrand(c, 0.2, 0.6, +1) == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("opposite field: the u < 0 integrand vanishes") {
        FieldLaw fl;
        fl.mean1 = 0.4;
        fl.mean2 = -0.4;
        fl.std1 = fl.std2 = 0.5;
        fl.corr = -1.0;
        auto c = coupled_of({0.5}, {0.5}, {1.0}, fl);
        CHECK(identical_band_integrand(c, 0.2, 0.6, -1) == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("independent standard Gaussian fields against a flat MC oracle") {
        FieldLaw fl;
        fl.std1 = fl.std2 = 1.0;
        auto c = coupled_of({0.5}, {0.5}, {1.0}, fl);
        const double c_lo = 0.2, c_hi = 0.6;
        const double got = identical_band_integrand(c, c_lo, c_hi, +1);
        CHECK(got > 0.0);

        RandomStream rs{2024};
        const int n_mc = 2000000;
        double acc = 0.0, acc2 = 0.0;
        const MixtureSpec& spec = c.spec1();
        for (int i = 0; i < n_mc; ++i) {
            const double q = c_lo + (c_hi - c_lo) * rs.next_double();
            const double w = std::sqrt(spec.xi(q, 1));
            const double x1 = rs.next_gauss(), x2 = rs.next_gauss(), z = rs.next_gauss();
            const double dlt = std::tanh(x1 + z * w) - std::tanh(x2 + z * w);
            const double v = spec.xi(q, 2) * dlt * dlt * (c_hi - c_lo);
            acc += v;
            acc2 += v * v;
        }
        const double mean = acc / n_mc;
        const double sem = std::sqrt((acc2 / n_mc - mean * mean) / n_mc);
        CHECK(std::fabs(got - mean) <= 3.0 * sem);
    }

    SECTION("different mixtures are rejected") {
        auto c = coupled_of({0.5}, {0.4}, {1.0});
        CHECK_THROWS_AS(identical_band_integrand(c, 0.2, 0.6, 1), domain_error);
    }
}
