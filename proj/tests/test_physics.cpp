#include "pipeflow/physics.hpp"

#include "pipeflow/errors.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pipeflow;

namespace {

IdealGasClosure paper_closure() { return IdealGasClosure(test::paper_gas(), test::paper_pipe()); }

// Independent route to the flow: solve the friction balance
//   cs2 * u * v = -(lambda / (2 D S^2)) * phi * |phi|
// for phi by bisection, without touching the closure's own formula.
double friction_balance_flow(double u, double v) {
    auto gas = test::paper_gas();
    auto pipe = test::paper_pipe();
    double target = -gas.cs2() * u * v * 2.0 * pipe.diameter * pipe.area * pipe.area / pipe.friction;
    // phi |phi| = target -> phi = sign(target) sqrt(|target|), but recover it
    // by bisection to stay independent of the algebra.
    double lo = -1e6, hi = 1e6;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid * std::abs(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("ideal gas closure: zero gradient gives zero flow, odd in v") {
    auto m = paper_closure();
    CHECK(flow_from_gradient(m, 0.0, 50.0, 0.0) == 0.0);
    double fp = flow_from_gradient(m, 0.0, 50.0, 0.01);
    double fm = flow_from_gradient(m, 0.0, 50.0, -0.01);
    CHECK(fp == doctest::Approx(-fm).epsilon(1e-14));
    CHECK(fm > 0.0); // density falling along the pipe pushes flow forward
    CHECK_THROWS_AS(flow_from_gradient(m, 0.0, -1.0, 0.01), Error);
}

TEST_CASE("ideal gas closure satisfies the friction balance") {
    auto m = paper_closure();
    double u = 50.0, v = -0.01;
    double phi = flow_from_gradient(m, 0.0, u, v);
    double oracle = friction_balance_flow(u, v);
    CHECK(phi > 0.0);
    CHECK(phi == doctest::Approx(oracle).epsilon(1e-10));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u_d(5.0, 100.0), v_d(-0.05, 0.05);
    for (int i = 0; i < 100; ++i) {
        double uu = u_d(rng), vv = v_d(rng);
        CHECK(flow_from_gradient(m, 0.0, uu, vv) ==
              doctest::Approx(friction_balance_flow(uu, vv)).epsilon(1e-10));
    }
}

TEST_CASE("analytic derivatives match finite differences away from the kink") {
    auto m = paper_closure();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u_d(5.0, 100.0), v_d(1e-4, 0.05);
    for (int i = 0; i < 50; ++i) {
        double u = u_d(rng);
        double v = v_d(rng) * (i % 2 ? 1.0 : -1.0);
        double su = 1e-6 * u;
        double fd_u = (m.eval(0, u + su, v) - m.eval(0, u - su, v)) / (2 * su);
        CHECK(m.d_du(0, u, v) == doctest::Approx(fd_u).epsilon(1e-6));
        double sv = 1e-6 * std::abs(v);
        double fd_v = (m.eval(0, u, v + sv) - m.eval(0, u, v - sv)) / (2 * sv);
        CHECK(m.d_dv(0, u, v) == doctest::Approx(fd_v).epsilon(1e-6));
    }
}

TEST_CASE("potential structure reproduces the closure and the steady identity") {
    auto m = paper_closure();
    const PotentialForm& pf = *m.potential();

    SUBCASE("f(u, v) equals g(h'(u) v)") {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u_d(5.0, 100.0), v_d(-0.05, 0.05);
        for (int i = 0; i < 100; ++i) {
            double u = u_d(rng), v = v_d(rng);
            CHECK(m.eval(0, u, v) == doctest::Approx(pf.g(pf.h_prime(u) * v)).epsilon(1e-12));
        }
    }

    SUBCASE("g and g_inverse invert each other") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> phi_d(-800.0, 800.0);
        for (int i = 0; i < 100; ++i) {
            double phi = phi_d(rng);
            CHECK(pf.g(pf.g_inverse(phi)) == doctest::Approx(phi).epsilon(1e-12));
        }
    }

    SUBCASE("steady-edge identity h(rho(0)) - h(rho(L)) = g_inverse(phi) L") {
        std::mt19937_64 rng(19);
        std::uniform_real_distribution<double> rho_d(30.0, 80.0), phi_d(-400.0, 400.0);
        const double L = 20000.0;
        int accepted = 0;
        for (int i = 0; i < 400 && accepted < 200; ++i) {
            double rho_in = rho_d(rng), phi = phi_d(rng);
            if (pf.h(rho_in) - pf.g_inverse(phi) * L <= 0.0) continue; // outside the valid region
            ++accepted;
            SteadyEdgeProfile prof(pf, phi, rho_in, L);
            double lhs = pf.h(prof(0.0)) - pf.h(prof(L));
            double rhs = pf.g_inverse(phi) * L;
            // 1e-10 relative in potential units; the drop itself may be tiny.
            CHECK(std::abs(lhs - rhs) <= 1e-10 * pf.h(rho_in));
        }
        CHECK(accepted == 200);
    }
}

TEST_CASE("steady edge profile endpoints and cavitation") {
    auto m = paper_closure();
    const PotentialForm& pf = *m.potential();

    SUBCASE("zero flow keeps the profile constant") {
        SteadyEdgeProfile prof(pf, 0.0, 55.0, 20000.0);
        CHECK(prof(0.0) == doctest::Approx(55.0));
        CHECK(prof(12345.0) == doctest::Approx(55.0));
        CHECK(prof(20000.0) == doctest::Approx(55.0));
    }
    SUBCASE("flow built from the potential drop lands on the target outlet density") {
        double L = 20000.0;
        double phi = pf.g((pf.h(55.0) - pf.h(45.0)) / L);
        SteadyEdgeProfile prof(pf, phi, 55.0, L);
        CHECK(prof(L) == doctest::Approx(45.0).epsilon(1e-10));
    }
    SUBCASE("flow beyond the cavitation bound is rejected") {
        double L = 20000.0;
        double phi_too_big = pf.g(pf.h(55.0) / L) * 1.01;
        try {
            SteadyEdgeProfile prof(pf, phi_too_big, 55.0, L);
            FAIL("expected DensityCavitation");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::density_cavitation);
        }
    }
}

TEST_CASE("check_monotone_v") {
    auto m = paper_closure();

    SUBCASE("ideal gas passes on a grid") {
        std::vector<MonotoneSample> samples;
        for (double u = 10.0; u <= 100.0; u += 10.0)
            for (double v = -1.0; v <= 1.0; v += 0.125)
                if (v != 0.0) samples.push_back({0.0, u, v});
        auto verdict = check_monotone_v(m, samples);
        CHECK(verdict.ok);
    }

    SUBCASE("decreasing custom closure fails") {
        CustomDissipation bad([](double, double, double v) { return -v; },
                              [](double, double, double) { return 0.0; },
                              [](double, double, double) { return -1.0; });
        auto verdict = check_monotone_v(bad, {{0.0, 50.0, 0.5}, {0.0, 50.0, -0.5}});
        CHECK_FALSE(verdict.ok);
        CHECK(verdict.failures.size() == 2);
    }

    SUBCASE("potential-form custom closure passes") {
        // f(u, v) = g(h'(u) v) with h = u^2, g = cube root-ish increasing law.
        CustomDissipation pot(
            [](double, double u, double v) { return std::cbrt(2.0 * u * v); },
            [](double, double u, double v) {
                double w = 2.0 * u * v;
                return std::abs(w) < 1e-12 ? 0.0 : (2.0 * v) / (3.0 * std::cbrt(w * w));
            },
            [](double, double u, double v) {
                double w = 2.0 * u * v;
                return std::abs(w) < 1e-12 ? 1e6 : (2.0 * u) / (3.0 * std::cbrt(w * w));
            });
        std::vector<MonotoneSample> samples;
        for (double u = 10.0; u <= 50.0; u += 10.0)
            for (double v : {-0.8, -0.1, 0.1, 0.8}) samples.push_back({0.0, u, v});
        auto verdict = check_monotone_v(pot, samples, 1e-5);
        CHECK(verdict.ok);
    }
}
