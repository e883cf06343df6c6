#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "spinglass/chaos.hpp"
#include "spinglass/rng.hpp"

using namespace spinglass;

namespace {

// 1e-6-step scan oracle for the smallest root of g on [0,1]
double scan_root(const std::function<double(double)>& g, double step = 1e-6) {
    double prev = g(0.0);
    if (prev <= 0.0) return 0.0;
    for (double c = step; c <= 1.0; c += step) {
        const double v = g(c);
        if (v <= 0.0) return c - 0.5 * step;
        prev = v;
    }
    return 1.0;
}

CoupledModelSpec coupled_of(std::vector<double> b1, std::vector<double> b2, std::vector<double> t,
                            FieldLaw f) {
    return CoupledModelSpec(MixtureSpec(std::move(b1)), MixtureSpec(std::move(b2)), std::move(t),
                            f);
}

} // namespace

TEST_CASE("rs fixed point", "[chaos]") {
    SECTION("degenerate field gives zero") {
        CHECK(rs_fixed_point(MixtureSpec({0.3}), {0.0, 0.0}) == 0.0);
        CHECK(rs_fixed_point(MixtureSpec({1.2}), {0.0, 0.0}) == 0.0);
    }

    SECTION("constant field root matches the scan oracle") {
        MixtureSpec sk({0.3});
        const FieldMarginal f{0.5, 0.0};
        const double c = rs_fixed_point(sk, f);
        auto quad = hermite_rule(96);
        auto g = [&](double cc) {
            const double sd = std::sqrt(sk.xi(cc, 1));
            return gauss_expect(quad, f.mean, sd,
                                [](double y) {
                                    const double t = std::tanh(y);
                                    return t * t;
                                }) -
                   cc;
        };
        CHECK(std::fabs(c - scan_root(g)) < 1e-6);
        CHECK(g(c) == Catch::Approx(0.0).margin(1e-11));
    }

    SECTION("nonzero root of the h = 0 equation is visible to a sign-change scan") {
        // beta = 1.2 is above the AT line; the equation has a nontrivial root
        // even though rs_fixed_point returns the smallest (c = 0)
        MixtureSpec sk({1.2});
        auto quad = hermite_rule(96);
        auto g = [&](double cc) {
            const double sd = std::sqrt(sk.xi(cc, 1));
            return gauss_expect(quad, 0.0, sd,
                                [](double y) {
                                    const double t = std::tanh(y);
                                    return t * t;
                                }) -
                   cc;
        };
        bool found = false;
        for (double c = 0.05; c < 1.0 && !found; c += 0.01)
            if (g(c) > 0.0 && g(c + 0.01) <= 0.0) found = true;
        CHECK(found);
    }
}

TEST_CASE("at index", "[chaos]") {
    CHECK(at_index(MixtureSpec({0.7}), {0.0, 0.0}, 0.0) == Catch::Approx(2 * 0.49).margin(1e-13));
    CHECK(at_index(MixtureSpec({0.5}), {0.0, 0.0}, 0.0) == Catch::Approx(0.5).margin(1e-13));

    MixtureSpec sk({0.3});
    const FieldMarginal f{0.5, 0.0};
    const double c = rs_fixed_point(sk, f);
    CHECK(at_index(sk, f, c) < 1.0);
    CHECK_THROWS_AS(at_index(sk, f, 1.0), domain_error);

    SECTION("no jumps on a fine grid") {
        MixtureSpec spec({0.6, 0.2});
        const FieldMarginal ff{0.2, 0.3};
        double prev = at_index(spec, ff, 0.0);
        for (int i = 1; i <= 990; ++i) {
            const double cur = at_index(spec, ff, i * 1e-3);
            CHECK(std::fabs(cur - prev) <= 1e-3 * 10.0 * (spec.xi(1.0, 2) + 1.0));
            prev = cur;
        }
    }
}

TEST_CASE("support min", "[chaos]") {
    CHECK(support_min(rs_triplet(0.0)) == 0.0);
    OrderParameterTriplet two{1, {0.0, 0.4, 1.0}, {0.0, 0.3, 0.7, 1.0}};
    CHECK(support_min(two, 0.01) == Catch::Approx(0.3));
    // atoms below the mass tolerance are skipped
    OrderParameterTriplet tiny{1, {0.0, 0.005, 1.0}, {0.0, 0.1, 0.7, 1.0}};
    CHECK(support_min(tiny, 0.01) == Catch::Approx(0.7));
}

TEST_CASE("phi coupling identities", "[chaos]") {
    SECTION("independent symmetric fields vanish at u = 0") {
        FieldLaw fl;
        fl.std1 = 0.5;
        fl.std2 = 0.6;
        auto coupled = coupled_of({0.4}, {0.5}, {0.5}, fl);
        auto sol1 = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(0.3));
        auto sol2 = evaluate_functional(coupled.spec2(), coupled.field2(), rs_triplet(0.35));
        CHECK(std::fabs(phi_coupling(coupled, sol1, sol2, 0.3, 0.35, 0.0)) < 1e-12);
    }

    SECTION("identical systems with a common field: phi(c) = c") {
        FieldLaw fl;
        fl.mean1 = fl.mean2 = 0.3;
        fl.std1 = fl.std2 = 0.4;
        fl.corr = 1.0;
        auto coupled = coupled_of({0.4}, {0.4}, {1.0}, fl);
        const double c = rs_fixed_point(coupled.spec1(), coupled.field1());
        REQUIRE(c > 0.0);
        auto sol = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(c));
        CHECK(phi_coupling(coupled, sol, sol, c, c, c) == Catch::Approx(c).margin(1e-5));
    }

    SECTION("RS profiles against a Monte-Carlo oracle") {
        FieldLaw fl;
        fl.mean1 = 0.2;
        fl.mean2 = -0.1;
        fl.std1 = 0.4;
        fl.std2 = 0.3;
        fl.corr = 0.5;
        auto coupled = coupled_of({0.45}, {0.55}, {0.7}, fl);
        const double v1 = 0.5, v2 = 0.45, u = 0.3;
        auto sol1 = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(v1));
        auto sol2 = evaluate_functional(coupled.spec2(), coupled.field2(), rs_triplet(v2));
        const double got = phi_coupling(coupled, sol1, sol2, v1, v2, u);

        // MC: (h1 + chi1, h2 + chi2) with the composed covariance; RS profiles
        // at q = v are tanh up to a constant shift in the value only
        RandomStream rs{99};
        const double V1 = fl.std1 * fl.std1 + coupled.spec1().xi(v1, 1);
        const double V2 = fl.std2 * fl.std2 + coupled.spec2().xi(v2, 1);
        const double C = fl.std1 * fl.std2 * fl.corr + coupled.cross_xi(u, 1);
        const double l11 = std::sqrt(V1), l21 = C / l11, l22 = std::sqrt(V2 - l21 * l21);
        const int n_mc = 10000000;
        double acc = 0.0, acc2 = 0.0;
        for (int i = 0; i < n_mc; ++i) {
            const double a = rs.next_gauss(), b = rs.next_gauss();
            const double y1 = fl.mean1 + l11 * a;
            const double y2 = fl.mean2 + l21 * a + l22 * b;
            const double v = std::tanh(y1) * std::tanh(y2);
            acc += v;
            acc2 += v * v;
        }
        const double mean = acc / n_mc;
        const double sem = std::sqrt((acc2 / n_mc - mean * mean) / n_mc);
        CHECK(std::fabs(got - mean) < 3.0 * sem + 1e-5);
    }
}

TEST_CASE("fixed point of the coupled map", "[chaos]") {
    SECTION("independent symmetric fields: u_f = 0") {
        FieldLaw fl;
        fl.std1 = 0.5;
        fl.std2 = 0.6;
        auto coupled = coupled_of({0.4}, {0.5}, {0.5}, fl);
        const double c1 = rs_fixed_point(coupled.spec1(), coupled.field1());
        const double c2 = rs_fixed_point(coupled.spec2(), coupled.field2());
        auto sol1 = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(c1));
        auto sol2 = evaluate_functional(coupled.spec2(), coupled.field2(), rs_triplet(c2));
        auto res = find_uf(coupled, sol1, sol2, c1, c2, 1e-10);
        CHECK(std::fabs(res.u_f) <= 1e-8);
        CHECK(res.residual <= 1e-10);
        CHECK(res.contraction_ok);
    }

    SECTION("identical systems with a common nondegenerate field: u_f = c") {
        FieldLaw fl;
        fl.mean1 = fl.mean2 = 0.3;
        fl.std1 = fl.std2 = 0.4;
        fl.corr = 1.0;
        auto coupled = coupled_of({0.4}, {0.4}, {1.0}, fl);
        const double c = rs_fixed_point(coupled.spec1(), coupled.field1());
        auto sol = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(c));
        auto res = find_uf(coupled, sol, sol, c, c, 1e-9);
        CHECK(std::fabs(res.u_f - c) <= 1e-4);
    }

    SECTION("generic asymmetric pair: bracketing, residual, uniqueness") {
        FieldLaw fl;
        fl.mean1 = 0.25;
        fl.mean2 = 0.1;
        fl.std1 = 0.35;
        fl.std2 = 0.45;
        fl.corr = 0.4;
        auto coupled = coupled_of({0.45}, {0.55, 0.2}, {0.6, 0.3}, fl);
        const double c1 = rs_fixed_point(coupled.spec1(), coupled.field1());
        const double c2 = rs_fixed_point(coupled.spec2(), coupled.field2());
        auto sol1 = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(c1));
        auto sol2 = evaluate_functional(coupled.spec2(), coupled.field2(), rs_triplet(c2));
        auto res = find_uf(coupled, sol1, sol2, c1, c2, 1e-9);
        CHECK(res.residual <= 1e-8);
        CHECK(std::fabs(res.u_f) <= std::sqrt(c1 * c2) + 1e-12);
        CHECK(res.max_abs_derivative < 1.0 - 1e-4);

        // dense sign-change scan confirms a single fixed point
        CouplingKernel kernel(coupled, sol1.phi_at(c1), sol2.phi_at(c2), c1, c2);
        const double B = std::sqrt(c1 * c2);
        int sign_changes = 0;
        double prev = kernel(-B) + B;
        for (int i = 1; i <= 200; ++i) {
            const double u = -B + 2.0 * B * i / 200;
            const double cur = kernel(u) - u;
            if (prev != 0.0 && cur * prev < 0.0) ++sign_changes;
            prev = cur;
        }
        CHECK(sign_changes == 1);
    }
}

TEST_CASE("coupled map invariants", "[chaos]") {
    FieldLaw fl;
    fl.mean1 = 0.2;
    fl.mean2 = 0.15;
    fl.std1 = 0.3;
    fl.std2 = 0.35;
    fl.corr = 0.3;
    auto coupled = coupled_of({0.5}, {0.45, 0.15}, {0.8, 0.5}, fl);
    const double c1 = rs_fixed_point(coupled.spec1(), coupled.field1());
    const double c2 = rs_fixed_point(coupled.spec2(), coupled.field2());
    auto sol1 = evaluate_functional(coupled.spec1(), coupled.field1(), rs_triplet(c1));
    auto sol2 = evaluate_functional(coupled.spec2(), coupled.field2(), rs_triplet(c2));
    CouplingKernel kernel(coupled, sol1.phi_at(c1), sol2.phi_at(c2), c1, c2);
    const double B = std::sqrt(c1 * c2);

    SECTION("self-mapping") {
        for (int i = 0; i <= 40; ++i) {
            const double u = -B + 2.0 * B * i / 40;
            CHECK(std::fabs(kernel(u)) <= B + 1e-10);
        }
    }

    SECTION("Gaussian integration by parts for the derivative") {
        // phi'(u) = xi''_{1,2}(u) E d2Phi1 d2Phi2
        auto quad = hermite_rule(48);
        auto p1 = sol1.phi_at(c1);
        auto p2 = sol2.phi_at(c2);
        const FieldLaw& f = coupled.field_law();
        for (double u : {-0.5 * B, 0.1 * B, 0.6 * B}) {
            const double du = 1e-4;
            const double fd = (kernel(u + du) - kernel(u - du)) / (2.0 * du);
            PairGauss pg(f.std1 * f.std1 + coupled.spec1().xi(c1, 1),
                         f.std2 * f.std2 + coupled.spec2().xi(c2, 1),
                         f.std1 * f.std2 * f.corr + coupled.cross_xi(u, 1));
            const double e2 = pg.expect_product(
                quad, f.mean1, f.mean2, [&](double x) { return p1.eval_d2(x); },
                [&](double x) { return p2.eval_d2(x); });
            CHECK(fd == Catch::Approx(coupled.cross_xi(u, 2) * e2).margin(1e-5));
        }
    }

    SECTION("oddness with zero fields") {
        auto nf = coupled_of({0.5}, {0.45, 0.15}, {0.8, 0.5}, FieldLaw{});
        auto s1 = evaluate_functional(nf.spec1(), nf.field1(), rs_triplet(0.3));
        auto s2 = evaluate_functional(nf.spec2(), nf.field2(), rs_triplet(0.35));
        CouplingKernel k0(nf, s1.phi_at(0.5), s2.phi_at(0.45), 0.5, 0.45);
        for (double u : {0.1, 0.25, 0.4}) CHECK(k0(-u) == Catch::Approx(-k0(u)).margin(1e-10));
    }
}
