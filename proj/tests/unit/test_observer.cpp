#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pipeobs/observer.hpp"

using namespace pipeobs;

TEST_SUITE("observer") {

TEST_CASE("synchronized states give zero sources") {
    auto law = PressureLaw::isothermal(1.0);
    for (Mode m : {Mode::velocity, Mode::density, Mode::massflow}) {
        PhysicalNudging n = nudging_physical(law, m, 3.0, {1.2, 0.1}, {1.2, 0.1});
        CHECK(n.l_rho == 0.0);
        CHECK(n.l_v == 0.0);
        RiemannPair r = nudging_riemann(law, m, 3.0, {0.1, -0.05}, {0.1, -0.05});
        CHECK(r.plus == 0.0);
        CHECK(r.minus == 0.0);
    }
}

TEST_CASE("velocity mode is linear") {
    auto law = PressureLaw::isothermal(1.0);
    PhysicalNudging n = nudging_physical(law, Mode::velocity, 2.0, {1.0, 0.3}, {1.1, 0.2});
    CHECK(n.l_v == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(n.l_rho == 0.0);
    auto arr = nudging_physical(law, Mode::velocity, 2.0, {1.0, 1.0}, {0.3, 0.5}, {1.0, 1.0},
                                {0.2, 0.4});
    CHECK(arr.l_v[0] == doctest::Approx(0.2));
    CHECK(arr.l_v[1] == doctest::Approx(0.2));
}

TEST_CASE("density mode at rho = e") {
    auto law = PressureLaw::isothermal(1.0);
    double pt = testutil::simpson([](double s) { return 1.0 / s; }, 1.0, std::numbers::e);
    PhysicalNudging n =
        nudging_physical(law, Mode::density, 1.0, {std::numbers::e, 0.0}, {1.0, 0.0});
    CHECK(n.l_rho == doctest::Approx(pt).epsilon(1e-12));
    CHECK(n.l_v == 0.0);
}

TEST_CASE("nonpositive density is a domain error") {
    auto law = PressureLaw::isothermal(1.0);
    CHECK_THROWS_AS(nudging_physical(law, Mode::density, 1.0, {1.0, 0.0}, {-1.0, 0.0}),
                    DomainError);
}

TEST_CASE("invariant sources equal projected physical sources") {
    std::mt19937_64 rng(21);
    for (auto law : {PressureLaw::isothermal(1.0), PressureLaw::power(1.0, 1.4)}) {
        std::uniform_real_distribution<double> u(-0.1, 0.1);
        const double c = law.c(), mu = 1.7;
        for (int i = 0; i < 1000; ++i) {
            RiemannPair R{u(rng), u(rng)}, S{u(rng), u(rng)};
            PhysicalState t = from_riemann(law, R), o = from_riemann(law, S);
            for (Mode m : {Mode::velocity, Mode::density, Mode::massflow}) {
                PhysicalNudging phys = nudging_physical(law, m, mu, t, o);
                RiemannPair ri = nudging_riemann(law, m, mu, R, S);
                double w = std::sqrt(law.dp(o.rho)) / (c * o.rho);
                double plus = w * phys.l_rho + phys.l_v / c;
                double minus = w * phys.l_rho - phys.l_v / c;
                CHECK(std::abs(ri.plus - plus) <= 1e-12);
                CHECK(std::abs(ri.minus - minus) <= 1e-12);
                RiemannPair proj = project_sources(law, o.rho, phys);
                CHECK(std::abs(proj.plus - plus) <= 1e-12);

                NudgingSplit sp = split_nudging(law, m, mu, R, S);
                CHECK(std::abs(sp.forcing_plus - sp.decay * S.plus - ri.plus) <= 1e-12);
                CHECK(std::abs(sp.forcing_minus - sp.decay * S.minus - ri.minus) <= 1e-12);
            }
        }
    }
}

TEST_CASE("contraction sign and density bracketing") {
    auto law = PressureLaw::isothermal(1.3);
    BoundConstants b = bound_constants(law, 0.5, 2.0, 0.1);
    const double mu = 0.8;
    const double lo = (b.rho_lo / b.rho_hi) * std::sqrt(b.dp_lo / b.dp_hi) * mu;
    const double hi = (b.rho_hi / b.rho_lo) * std::sqrt(b.dp_hi / b.dp_lo) * mu;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ur(0.5, 2.0), uv(-0.1, 0.1);
    for (int i = 0; i < 1000; ++i) {
        PhysicalState t{ur(rng), uv(rng)}, o{ur(rng), uv(rng)};
        CHECK((t.v - o.v) * nudging_physical(law, Mode::velocity, mu, t, o).l_v >= 0.0);
        double lr = nudging_physical(law, Mode::density, mu, t, o).l_rho;
        CHECK((t.rho - o.rho) * lr >= 0.0);
        CHECK((t.rho * t.v - o.rho * o.v) * nudging_physical(law, Mode::massflow, mu, t, o).l_v >=
              0.0);
        double q = lr / (t.rho - o.rho);
        CHECK(q >= lo * (1 - 1e-12));
        CHECK(q <= hi * (1 + 1e-12));
    }
}

}  // TEST_SUITE
