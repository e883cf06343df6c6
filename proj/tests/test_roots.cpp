#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spinglass/quadrature.hpp"
#include "spinglass/roots.hpp"

using namespace spinglass;

TEST_CASE("find_root basics", "[roots]") {
    CHECK(find_root([](double x) { return x - 0.5; }, 0.0, 1.0, 1e-12) ==
          Catch::Approx(0.5).margin(1e-11));
    CHECK(find_root([](double x) { return x * x - 2.0; }, 1.0, 2.0, 1e-12) ==
          Catch::Approx(std::sqrt(2.0)).margin(1e-10));
    CHECK_THROWS_AS(find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12),
                    domain_error);
}

TEST_CASE("find_root matches a grid-scan oracle on a consistency residual", "[roots]") {
    // g(c) = E tanh^2(z sqrt(2c)) - c + 0.2, a fixed-point style residual
    auto quad = hermite_rule(64);
    auto g = [&](double c) {
        const double s = std::sqrt(2.0 * c);
        double e = 0.0;
        for (int i = 0; i < quad.size(); ++i) {
            const double t = std::tanh(s * quad.nodes[i]);
            e += quad.weights[i] * t * t;
        }
        return e - c + 0.2;
    };
    // 1e-6-step scan for the bracketing interval, then midpoint refinement
    double lo = 0.0, hi = 1.0;
    for (int i = 1; i <= 1000000; ++i) {
        const double c = i * 1e-6;
        if (g(c) <= 0.0) {
            lo = c - 1e-6;
            hi = c;
            break;
        }
    }
    const double oracle = 0.5 * (lo + hi);
    const double root = find_root(g, 0.0, 1.0, 1e-12);
    CHECK(std::fabs(root - oracle) < 1e-6);
}

TEST_CASE("find_root is deterministic", "[roots]") {
    auto f = [](double x) { return std::cos(3.0 * x) - 0.3 * x; };
    const double a = find_root(f, 0.0, 1.0, 1e-13);
    const double b = find_root(f, 0.0, 1.0, 1e-13);
    CHECK(a == b);
}

TEST_CASE("golden_minimize finds unimodal minimum", "[roots]") {
    const double x = golden_minimize([](double t) { return (t - 0.3) * (t - 0.3); }, -1.0, 1.0,
                                     1e-10);
    CHECK(x == Catch::Approx(0.3).margin(1e-8));
}
