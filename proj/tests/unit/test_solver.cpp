#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pipeobs/riemann.hpp"
#include "pipeobs/solver.hpp"

using namespace pipeobs;

namespace {

double max_diff(const FieldState& a, const FieldState& b) {
    double m = 0.0;
    for (std::size_t e = 0; e < a.edges.size(); ++e)
        for (int j = 0; j < a.edges[e].cells(); ++j) {
            m = std::max(m, std::abs(a.edges[e].rho[j] - b.edges[e].rho[j]));
            m = std::max(m, std::abs(a.edges[e].v[j] - b.edges[e].v[j]));
        }
    return m;
}

double velocity_l2(const FieldState& a, const FieldState& b) {
    double s = 0.0;
    for (std::size_t e = 0; e < a.edges.size(); ++e)
        for (int j = 0; j < a.edges[e].cells(); ++j) {
            double d = a.edges[e].v[j] - b.edges[e].v[j];
            s += d * d * a.edges[e].dx();
        }
    return std::sqrt(s);
}

Scenario pulse_star(StepperKind stepper) {
    Scenario sc = load_scenario(testutil::kStarConfig);
    sc.stepper = stepper;
    sc.mode = Mode::none;
    sc.mu = 0.0;
    sc.initial[0].riemann = true;
    sc.initial[0].first = Profile::bump(0.5, 0.5, 0.05);
    sc.initial[0].second = Profile::constant(0.0);
    sc.cells = 50;
    return sc;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("cfl_dt examples") {
    auto law = PressureLaw::isothermal(1.0);
    FieldState rest;
    rest.edges.push_back(EdgeField{1.0, std::vector<double>(100, 1.0), std::vector<double>(100, 0.0)});
    CHECK(cfl_dt(law, rest, 0.01, 0.9) == doctest::Approx(0.009).epsilon(1e-15));
    CHECK(cfl_dt(law, rest, 0.9) == doctest::Approx(0.009).epsilon(1e-15));
    auto law2 = PressureLaw::isothermal(2.0);
    CHECK(cfl_dt(law2, rest, 0.01, 0.9) == doctest::Approx(0.0045).epsilon(1e-15));

    BoundConstants b = bound_constants(law, 0.5, 2.0, 0.1);
    EigenBounds eb = eigen_bounds(0.1, b, 1.0);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (int trial = 0; trial < 50; ++trial) {
        FieldState s = rest;
        for (int j = 0; j < 100; ++j) {
            PhysicalState p = from_riemann(law, {u(rng), u(rng)});
            s.edges[0].rho[j] = p.rho;
            s.edges[0].v[j] = p.v;
        }
        CHECK(cfl_dt(law, s, 0.01, 0.5) >= 0.5 * 0.01 / eb.lambda_hi);
    }
}

TEST_CASE("conservative conversions") {
    FieldState s;
    s.edges.push_back(EdgeField{1.0, {1.0, 2.0}, {0.0, 0.5}});
    ConservativeState c = convert_conservative(s);
    CHECK(c.edges[0].m[0] == 0.0);
    CHECK(c.edges[0].m[1] == 1.0);
    FieldState back = convert_primitive(c);
    CHECK(back.edges[0].rho == s.edges[0].rho);
    CHECK(back.edges[0].v == s.edges[0].v);

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ur(0.5, 2.0), uv(-0.3, 0.3);
    FieldState r;
    r.edges.push_back(EdgeField{1.0, {}, {}});
    for (int i = 0; i < 1000; ++i) {
        r.edges[0].rho.push_back(ur(rng));
        r.edges[0].v.push_back(uv(rng));
    }
    FieldState rb = convert_primitive(convert_conservative(r));
    for (int i = 0; i < 1000; ++i) {
        CHECK(rb.edges[0].rho[i] == r.edges[0].rho[i]);
        CHECK(std::abs(rb.edges[0].v[i] - r.edges[0].v[i]) <= 1e-14);
    }
    s.edges[0].rho[0] = 0.0;
    CHECK_THROWS_AS(convert_conservative(s), DomainError);
}

TEST_CASE("rest state is stationary for both steppers") {
    for (StepperKind k : {StepperKind::moc, StepperKind::fv}) {
        for (double gamma : {0.0, 0.5}) {
            Scenario sc = testutil::rest_scenario();
            sc.gamma = gamma;
            TwinState tw = make_twin(sc, k);
            FieldState start = tw.truth;
            for (int i = 0; i < 50; ++i) step_twin(tw, twin_dt(tw));
            CHECK(max_diff(tw.truth, start) == 0.0);
            CHECK(max_diff(tw.observer, start) == 0.0);
        }
    }
}

TEST_CASE("identical twin stays synchronized") {
    Scenario sc = testutil::rest_scenario();
    sc.initial[0].riemann = true;
    sc.initial[0].first = Profile::bump(0.5, 0.5, 0.05);
    sc.initial[0].second = Profile::constant(0.0);
    sc.observer_initial = sc.initial;
    sc.gamma = 0.1;
    sc.T = 2.0;
    RunResult r = run_twin(sc);
    for (const auto& s : r.series.samples) CHECK(s.l2_err_sq <= 1e-12 * std::max<long>(r.steps, 1));
}

TEST_CASE("one velocity-mode step shrinks the velocity error on a 4-cell grid") {
    Scenario sc = testutil::rest_scenario();
    sc.cells = 4;
    sc.mode = Mode::velocity;
    sc.mu = 2.0;
    sc.perturbation.assign(1, EdgePerturbation{});
    sc.perturbation[0].v = Profile::constant(0.01);
    for (StepperKind k : {StepperKind::moc, StepperKind::fv}) {
        TwinState tw = make_twin(sc, k);
        double before = velocity_l2(tw.observer, tw.truth);
        step_twin(tw, twin_dt(tw));
        CHECK(velocity_l2(tw.observer, tw.truth) < before);
    }
}

TEST_CASE("small pulses travel at the sound speed") {
    Scenario sc = testutil::rest_scenario();
    sc.cells = 400;
    sc.initial[0].riemann = true;
    const double eps = 1e-4;
    sc.initial[0].first = Profile::bump(0.3, 0.2, eps);
    sc.initial[0].second = Profile::constant(0.0);
    TwinState tw = make_twin(sc, StepperKind::moc, true);
    const double t_end = 0.3;
    while (tw.truth.t < t_end - 1e-12) step_twin(tw, std::min(twin_dt(tw), t_end - tw.truth.t));
    const auto& re = tw.truth_ri.edges[0];
    auto peak = std::max_element(re.sp.begin(), re.sp.end()) - re.sp.begin();
    double x_peak = (peak + 0.5) * re.dx();
    CHECK(std::abs(x_peak - 0.6) <= 2 * re.dx() + eps);
    double smax = 0.0;
    for (double v : re.sm) smax = std::max(smax, std::abs(v));
    CHECK(smax <= 10 * eps * eps + 1e-14);
    CHECK(*std::max_element(re.sp.begin(), re.sp.end()) == doctest::Approx(eps).epsilon(0.05));
}

TEST_CASE("finite volumes conserve mass up to boundary fluxes") {
    Scenario sc = pulse_star(StepperKind::fv);
    TwinState tw = make_twin(sc, StepperKind::fv, true);
    double mass = total_mass(tw.truth);
    for (int i = 0; i < 200; ++i) {
        double dt = twin_dt(tw);
        step_twin(tw, dt);
        double inflow = 0.0;
        const auto& topo = sc.topology;
        for (std::size_t e = 0; e < topo.edges().size(); ++e) {
            const auto& edge = topo.edges()[e];
            if (topo.nodes()[edge.from].kind == NodeKind::boundary)
                inflow += tw.truth_fluxes.at_start[e];
            if (topo.nodes()[edge.to].kind == NodeKind::boundary)
                inflow -= tw.truth_fluxes.at_end[e];
        }
        mass += dt * inflow;
        CHECK(std::abs(total_mass(tw.truth) - mass) <= 1e-13);
    }
}

TEST_CASE("junction mass balance") {
    for (StepperKind k : {StepperKind::fv, StepperKind::moc}) {
        Scenario sc = pulse_star(k);
        TwinState tw = make_twin(sc, k, true);
        const auto& topo = sc.topology;
        const int hub = topo.star_center();
        double worst = 0.0;
        for (int i = 0; i < 150; ++i) {
            step_twin(tw, twin_dt(tw));
            double net = 0.0, scale = 0.0;
            for (const auto& inc : topo.incident(hub)) {
                double m;
                if (k == StepperKind::fv) {
                    m = inc.sign > 0 ? tw.truth_fluxes.at_end[inc.edge]
                                     : tw.truth_fluxes.at_start[inc.edge];
                } else {
                    const auto& re = tw.truth_ri.edges[inc.edge];
                    RiemannPair s = inc.sign > 0 ? RiemannPair{re.spL, re.smL}
                                                 : RiemannPair{re.sp0, re.sm0};
                    PhysicalState p = from_riemann(sc.law, s);
                    m = p.rho * p.v;
                }
                net += inc.sign * m;
                scale = std::max(scale, std::abs(m));
            }
            worst = std::max(worst, std::abs(net));
        }
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("halving cfl does not increase the per-step change") {
    for (StepperKind k : {StepperKind::moc, StepperKind::fv}) {
        Scenario sc = pulse_star(k);
        TwinState tw = make_twin(sc, k, true);
        for (int i = 0; i < 20; ++i) step_twin(tw, twin_dt(tw));
        TwinState a = tw, b = tw;
        double dt = twin_dt(tw);
        step_twin(a, dt);
        step_twin(b, 0.5 * dt);
        CHECK(velocity_l2(b.truth, tw.truth) <= velocity_l2(a.truth, tw.truth));
    }
}

TEST_CASE("small-data runs stay in the subsonic window") {
    Scenario sc = testutil::rest_scenario();
    sc.initial[0].riemann = true;
    sc.initial[0].first = Profile::bump(0.5, 0.5, 0.05);
    sc.initial[0].second = Profile::constant(0.0);
    sc.gamma = 0.1;
    sc.T = 3.0;
    sc.mode = Mode::velocity;
    sc.mu = 1.0;
    sc.perturbation.assign(1, EdgePerturbation{});
    sc.perturbation[0].v = Profile::sine(0.01, 1.0);
    RunResult r = run_twin(sc);
    BoundConstants b = sc.bounds();
    for (const auto& s : r.series.samples) {
        CHECK(s.max_v <= b.v_bar);
        CHECK(s.rho_min >= b.rho_lo);
        CHECK(s.rho_max <= b.rho_hi);
    }
}

TEST_CASE("non-finite data aborts with context") {
    Scenario sc = testutil::rest_scenario();
    sc.initial[0].first = Profile::constant(1.0);
    sc.initial[0].second = Profile::constant(5.0);  // far outside the subsonic range
    CHECK_THROWS(run_twin(sc));
}

}  // TEST_SUITE
