#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pipeobs/energy.hpp"
#include "pipeobs/solver.hpp"

using namespace pipeobs;

namespace {

FieldState uniform(int cells, double length, double rho, double v, double t = 0.0) {
    FieldState s;
    s.t = t;
    EdgeField e;
    e.length = length;
    e.rho.assign(cells, rho);
    e.v.assign(cells, v);
    s.edges.push_back(e);
    return s;
}

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("energy of simple states") {
    auto law = PressureLaw::isothermal(1.0);
    CHECK(energy(law, uniform(10, 3.0, 1.0, 0.0)) == 0.0);
    CHECK(energy(law, uniform(10, 1.0, 1.0, 0.2)) == doctest::Approx(0.02).epsilon(1e-14));
}

TEST_CASE("energy quadrature converges at second order") {
    auto law = PressureLaw::isothermal(1.0);
    auto at = [](int n) {
        FieldState s = uniform(n, 1.0, 1.0, 0.0);
        for (int j = 0; j < n; ++j) {
            double x = s.edges[0].x(j);
            s.edges[0].rho[j] = 1.0 + 0.3 * std::sin(3.0 * x);
            s.edges[0].v[j] = 0.1 * std::cos(2.0 * x);
        }
        return s;
    };
    double ref = energy(law, at(20000));
    double e1 = std::abs(energy(law, at(50)) - ref);
    double e2 = std::abs(energy(law, at(100)) - ref);
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("relative energy examples") {
    auto law = PressureLaw::isothermal(1.0);
    FieldState u = uniform(8, 1.0, 1.0, 0.0), uh = uniform(8, 1.0, 1.0, 0.1);
    CHECK(relative_energy(law, u, u) == 0.0);
    CHECK(relative_energy(law, uh, u) == doctest::Approx(0.005).epsilon(1e-14));
}

TEST_CASE("relative energy identity and norm equivalence sandwich") {
    auto law = PressureLaw::isothermal(1.0);
    BoundConstants b = bound_constants(law, 0.5, 2.0, 0.1);
    NormEquivalence ne = norm_equiv_constants(b);
    REQUIRE(ne.c0 > 0.0);
    REQUIRE(ne.C0 >= ne.c0);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ur(0.5, 2.0), uv(-0.1, 0.1);
    for (int i = 0; i < 10000; ++i) {
        double r = ur(rng), v = uv(rng), rh = ur(rng), vh = uv(rng);
        FieldState u = uniform(1, 1.0, r, v), uh = uniform(1, 1.0, rh, vh);
        double H = relative_energy(law, uh, u);
        double P_rel = law.P(rh) - law.P(r) - law.dP(r) * (rh - r);
        double identity = P_rel + 0.5 * rh * (vh - v) * (vh - v) + v * (rh - r) * (vh - v);
        CHECK(std::abs(H - identity) <= 1e-12);
        double d2 = l2_error_sq(uh, u);
        CHECK(H >= 0.0);
        CHECK(H >= ne.c0 * d2 * (1 - 1e-12));
        CHECK(H <= ne.C0 * d2 * (1 + 1e-12));
    }
    FieldState same = uniform(1, 1.0, 1.3, 0.05);
    CHECK(relative_energy(law, same, same) == 0.0);
    CHECK(l2_error_sq(same, same) == 0.0);
}

TEST_CASE("relative energy is invariant under affine shifts of P") {
    // P -> P + a + b rho shifts h by b and leaves H(.|.) unchanged; two laws with
    // different reference densities differ by exactly such a shift.
    auto l1 = PressureLaw::isothermal(1.0, 1.0), l2 = PressureLaw::isothermal(1.0, 1.4);
    FieldState u = uniform(4, 1.0, 1.2, 0.03), uh = uniform(4, 1.0, 0.9, -0.02);
    CHECK(relative_energy(l1, uh, u) ==
          doctest::Approx(relative_energy(l2, uh, u)).epsilon(1e-12));
}

TEST_CASE("c0 does not decrease as v_bar shrinks") {
    auto law = PressureLaw::isothermal(1.0);
    double prev = 0.0;
    for (double vb : {0.3, 0.2, 0.1, 0.05, 0.01, 0.0}) {
        double c0 = norm_equiv_constants(bound_constants(law, 0.5, 2.0, vb)).c0;
        CHECK(c0 >= prev);
        prev = c0;
    }
}

TEST_CASE("non-subsonic window is rejected") {
    auto law = PressureLaw::isothermal(1.0);
    CHECK_THROWS_AS(norm_equiv_constants(bound_constants(law, 0.5, 2.0, 0.9)), DomainError);
}

TEST_CASE("mass difference") {
    FieldState a = uniform(5, 1.0, 1.0, 0.0), b = uniform(5, 1.0, 1.01, 0.0);
    CHECK(mass_difference(a, a) == 0.0);
    CHECK(mass_difference(b, a) == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(total_mass(b) == doctest::Approx(1.01));
}

TEST_CASE("F1 single-step hand case") {
    Scenario sc = testutil::rest_scenario();  // m prescribed at x = 0
    const double eps = 0.02, kappa = 0.05, dt = 0.1;
    FieldState obs = uniform(40, 1.0, 1.0, 0.1);
    FieldState truth = uniform(40, 1.0, 1.0 + kappa, (0.1 + eps) / (1.0 + kappa));
    const double delta = truth.edges[0].v[0] - obs.edges[0].v[0];
    AntiderivativeTracker tr(sc, truth, obs, Functional::f1);
    CHECK(f1(tr, obs, truth) == doctest::Approx(-delta * kappa / 2).epsilon(1e-12));
    tr.advance(truth, obs, dt);
    truth.t = obs.t = dt;
    CHECK(f1(tr, obs, truth) == doctest::Approx(delta * (eps * dt - kappa / 2)).epsilon(1e-12));
    CHECK(f1(tr, obs, obs) == 0.0);
}

TEST_CASE("F1 is bounded through the Poincare inequality") {
    Scenario sc = testutil::rest_scenario();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        FieldState truth = uniform(100, 1.0, 1.0, 0.0), obs = truth;
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        for (int j = 0; j < 100; ++j) {
            double x = truth.edges[0].x(j);
            obs.edges[0].rho[j] += 0.05 * (a * std::sin(3 * x) + b * std::cos(5 * x));
            obs.edges[0].v[j] += 0.05 * (c * std::cos(2 * x) + d * x);
        }
        AntiderivativeTracker tr(sc, truth, obs, Functional::f1);
        double bound = 0.5 * kPoincare * 1.0 * l2_error_sq(obs, truth);
        CHECK(std::abs(f1(tr, obs, truth)) <= bound);
    }
}

TEST_CASE("F2 hand case and anchoring") {
    Scenario sc = testutil::rest_scenario();  // h prescribed at x = 1
    const double delta = 0.03, dt = 0.2;
    FieldState obs = uniform(30, 1.0, 1.0, 0.0), truth = uniform(30, 1.0, 1.0 + delta, 0.0);
    const double eps = sc.law.dP(1.0 + delta) - sc.law.dP(1.0);
    AntiderivativeTracker tr(sc, truth, obs, Functional::f2);
    CHECK(f2(tr, obs, truth) == 0.0);
    tr.advance(truth, obs, dt);
    truth.t = obs.t = dt;
    CHECK(f2(tr, obs, truth) == doctest::Approx(eps * delta * dt * 1.0).epsilon(1e-12));
    CHECK(f2(tr, truth, truth) == 0.0);
}

TEST_CASE("functionals refuse desynchronized states") {
    Scenario sc = testutil::rest_scenario();
    FieldState s = uniform(10, 1.0, 1.0, 0.0);
    AntiderivativeTracker tr(sc, s, s, Functional::f1);
    tr.advance(s, s, 0.1);
    CHECK_THROWS_WITH_AS(f1(tr, s, s), doctest::Contains("desynchronization"), Error);
}

TEST_CASE("anchored differences vanish during a density-mode twin run") {
    Scenario sc = testutil::rest_scenario();
    sc.mode = Mode::density;
    sc.mu = 1.0;
    sc.gamma = 0.1;
    sc.cells = 100;
    sc.perturbation.assign(1, EdgePerturbation{});
    sc.perturbation[0].rho = Profile::sine(0.01, 1.0);
    sc.perturbation[0].v = Profile::sine(0.01, 2.0);
    TwinState tw = make_twin(sc, StepperKind::moc);
    AntiderivativeTracker n2(sc, tw.truth, tw.observer, Functional::f2);
    AntiderivativeTracker m1(sc, tw.truth, tw.observer, Functional::f1);
    double worst_n = 0.0, worst_m = 0.0, scale = 0.0;
    for (int k = 0; k < 100; ++k) {
        double dt = twin_dt(tw);
        n2.advance(tw.truth, tw.observer, dt);
        m1.advance(tw.truth, tw.observer, dt);
        step_twin(tw, dt);
        worst_n = std::max(worst_n, n2.anchor_difference());
        worst_m = std::max(worst_m, m1.anchor_difference());
        auto nt = n2.N(false), no = n2.N(true);
        for (std::size_t j = 0; j < nt[0].size(); ++j)
            scale = std::max(scale, std::abs(nt[0][j] - no[0][j]));
    }
    REQUIRE(scale > 0.0);
    CHECK(worst_n <= 0.05 * scale);
    CHECK(worst_m <= 1e-4);
}

TEST_CASE("fit_decay on synthetic series") {
    std::vector<double> t, e, ep, ec;
    for (int i = 0; i <= 400; ++i) {
        double ti = 10.0 * i / 400;
        t.push_back(ti);
        e.push_back(std::exp(-3.0 * ti));
        ep.push_back(std::exp(-3.0 * ti) + 1e-4);
        ec.push_back(0.5);
    }
    DecayFit f = fit_decay(t, e);
    CHECK(f.c2 == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(f.c1 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.status == DecayStatus::decaying);
    CHECK_FALSE(f.plateau);

    DecayFit p = fit_decay(t, ep);
    CHECK(p.plateau);
    CHECK(p.plateau_level == doctest::Approx(1e-4).epsilon(1e-3));
    CHECK(p.c2 == doctest::Approx(3.0).epsilon(0.05));

    DecayFit c = fit_decay(t, ec);
    CHECK(std::abs(c.c2) < 1e-12);
    CHECK(c.status == DecayStatus::non_decaying);

    DecayFit z = fit_decay(t, std::vector<double>(t.size(), 0.0));
    CHECK(z.status == DecayStatus::synchronized);
    CHECK(to_string(z.status) == "already_synchronized");

    CHECK_THROWS(fit_decay(std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)));
}

TEST_CASE("audit flags the first velocity excursion") {
    auto law = PressureLaw::isothermal(1.0);
    BoundConstants b = bound_constants(law, 0.5, 2.0, 0.1);
    DiagnosticsSeries s;
    for (int i = 0; i < 10; ++i) {
        Sample x;
        x.t = 0.1 * i;
        x.rho_min = x.rho_max = 1.0;
        x.max_v = i >= 3 ? 0.15 : 0.05;
        s.samples.push_back(x);
    }
    AuditReport r = audit_assumptions(s, b);
    CHECK_FALSE(r.all_pass());
    for (const auto& c : r.checks) {
        if (c.name == "velocity_bound") {
            CHECK_FALSE(c.pass);
            CHECK(c.first_failure == doctest::Approx(0.3));
            CHECK(c.margin == doctest::Approx(-0.05));
        } else {
            CHECK(c.pass);
        }
    }
}

TEST_CASE("rest-state run passes the audit with full margins") {
    Scenario sc = testutil::rest_scenario();
    RunOptions opt;
    opt.truth_only = true;
    RunResult r = run_twin(sc, opt);
    REQUIRE(r.audit.checks.size() == 4);
    CHECK(r.audit.all_pass());
    for (const auto& c : r.audit.checks) {
        if (c.name == "density_band") CHECK(c.margin == doctest::Approx(0.5));
        if (c.name == "velocity_bound") CHECK(c.margin == doctest::Approx(sc.v_bar));
        if (c.name == "time_derivative_bound") CHECK(c.margin == doctest::Approx(1.0));
    }
}

}  // TEST_SUITE
