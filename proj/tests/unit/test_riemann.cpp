#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pipeobs/riemann.hpp"

using namespace pipeobs;

TEST_SUITE("riemann") {

TEST_CASE("to_riemann and from_riemann examples") {
    auto law = PressureLaw::isothermal(1.0);
    const double e = std::numbers::e;
    RiemannPair rest = to_riemann(law, 1.0, 0.0);
    CHECK(rest.plus == 0.0);
    CHECK(rest.minus == 0.0);

    double pt = testutil::simpson([](double s) { return 1.0 / s; }, 1.0, e);
    RiemannPair s = to_riemann(law, e, 0.5);
    CHECK(s.plus == doctest::Approx(pt + 0.5).epsilon(1e-12));
    CHECK(s.minus == doctest::Approx(pt - 0.5).epsilon(1e-12));

    PhysicalState u = from_riemann(law, {1.5, 0.5});
    double rho_oracle = testutil::bisect([](double r) { return std::log(r) - 1.0; }, 1.0, 4.0);
    CHECK(u.rho == doctest::Approx(rho_oracle).epsilon(1e-12));
    CHECK(u.v == doctest::Approx(0.5).epsilon(1e-15));

    PhysicalState r0 = from_riemann(law, {0.0, 0.0});
    CHECK(r0.rho == 1.0);
    CHECK(r0.v == 0.0);

    PhysicalState back = from_riemann(law, to_riemann(law, 1.0, 0.07));
    CHECK(back.rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(back.v == doctest::Approx(0.07).epsilon(1e-12));

    PhysicalState same = from_riemann(law, {0.2, 0.2});
    CHECK(same.v == 0.0);
    CHECK(same.rho == doctest::Approx(law.ptilde_inv(0.2)));
}

TEST_CASE("eigenvalues") {
    auto law = PressureLaw::isothermal(1.0);
    Eigenvalues l = eigenvalues(law, 1.0, 0.1);
    CHECK(l.plus == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(l.minus == doctest::Approx(-0.9).epsilon(1e-15));
    auto law2 = PressureLaw::isothermal(3.0);
    Eigenvalues r = eigenvalues(law2, 1.0, 0.0);
    CHECK(r.plus == doctest::Approx(3.0));
    CHECK(r.minus == doctest::Approx(-3.0));
}

TEST_CASE("enthalpy") {
    auto law = PressureLaw::isothermal(1.0);
    CHECK(enthalpy(law, 1.0, 0.0) == law.dP(1.0));
    CHECK(enthalpy(law, std::numbers::e, 1.0) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(enthalpy(law, 1.3, 0.2) == enthalpy(law, 1.3, -0.2));
    // P' from integrating P'' = 1/s starting at P'(1) = 1
    double dP_oracle = 1.0 + testutil::simpson([](double s) { return 1.0 / s; }, 1.0, 1.7);
    CHECK(law.dP(1.7) == doctest::Approx(dP_oracle).epsilon(1e-12));
    RiemannPair s = to_riemann(law, 1.3, 0.2);
    CHECK(enthalpy(law, s) == doctest::Approx(enthalpy(law, 1.3, 0.2)).epsilon(1e-12));
}

TEST_CASE("friction sigma") {
    CHECK(friction_sigma({0.1, 0.1}, 1.0, 1.0) == 0.0);
    CHECK(friction_sigma({0.2, 0.0}, 1.0, 1.0) == doctest::Approx(0.01).epsilon(1e-15));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    auto law = PressureLaw::isothermal(1.7);
    for (int i = 0; i < 200; ++i) {
        RiemannPair s{u(rng), u(rng)};
        CHECK(friction_sigma(s, 0.4, 1.7) == -friction_sigma({s.minus, s.plus}, 0.4, 1.7));
        double v = velocity_of(law, s);
        CHECK(std::abs(friction_sigma(s, 0.4, 1.7) - 0.4 / 1.7 * std::abs(v) * v) <= 1e-12);
    }
}

TEST_CASE("eigen bounds") {
    auto law = PressureLaw::isothermal(1.0);
    BoundConstants b = bound_constants(law, 0.5, 2.0, 0.1);
    EigenBounds eb = eigen_bounds(0.1, b, 1.0);
    CHECK(eb.lambda_lo == doctest::Approx(0.5));
    CHECK(eb.lambda_hi == doctest::Approx(1.5));
    CHECK(eb.lipschitz == doctest::Approx(0.5));
    CHECK_THROWS_AS(eigen_bounds(0.6, b, 1.0), DomainError);
}

TEST_CASE("sampled eigenvalue bounds and Lipschitz constant") {
    for (auto law : {PressureLaw::isothermal(1.0), PressureLaw::power(1.0, 1.4)}) {
        BoundConstants b = bound_constants(law, law.band_lo(), law.band_hi(), 0.1);
        const double s_max = 0.1;
        EigenBounds eb = eigen_bounds(s_max, b, law.c());
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-s_max, s_max);
        double worst_ratio = 0.0;
        for (int i = 0; i < 1000; ++i) {
            RiemannPair s{u(rng), u(rng)}, q{u(rng), u(rng)};
            Eigenvalues ls = eigenvalues(law, s), lq = eigenvalues(law, q);
            CHECK(ls.plus >= eb.lambda_lo);
            CHECK(ls.plus <= eb.lambda_hi);
            CHECK(-ls.minus >= eb.lambda_lo);
            CHECK(-ls.minus <= eb.lambda_hi);
            double d = std::abs(s.plus - q.plus) + std::abs(s.minus - q.minus);
            double dl = std::max(std::abs(ls.plus - lq.plus), std::abs(ls.minus - lq.minus));
            worst_ratio = std::max(worst_ratio, dl / d);
        }
        CHECK(worst_ratio <= eb.lipschitz * (1 + 1e-12));
    }
}

TEST_CASE("subsonic separation of characteristic speeds") {
    auto law = PressureLaw::isothermal(1.0);
    BoundConstants b = bound_constants(law, 0.5, 2.0, 0.3);
    REQUIRE(b.subsonic);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ur(0.5, 2.0), uv(-0.3, 0.3);
    for (int i = 0; i < 1000; ++i) {
        Eigenvalues l = eigenvalues(law, ur(rng), uv(rng));
        CHECK(l.plus > 0.0);
        CHECK(l.minus < 0.0);
    }
}

TEST_CASE("physical to invariant round trip") {
    std::mt19937_64 rng(1);
    for (auto law : {PressureLaw::isothermal(1.0), PressureLaw::power(4.905, 2.0)}) {
        std::uniform_real_distribution<double> ur(0.6, 1.8), uv(-0.2, 0.2);
        for (int i = 0; i < 500; ++i) {
            double rho = ur(rng), v = uv(rng);
            PhysicalState u = from_riemann(law, to_riemann(law, rho, v));
            CHECK(std::abs(u.rho - rho) <= 1e-10 * rho);
            CHECK(std::abs(u.v - v) <= 1e-10);
        }
    }
}

}  // TEST_SUITE
