#include "pipeobs/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "pipeobs/junction.hpp"
#include "pipeobs/observer.hpp"

namespace pipeobs {

ConservativeState convert_conservative(const FieldState& s) {
    ConservativeState out;
    out.t = s.t;
    out.edges.reserve(s.edges.size());
    for (const auto& e : s.edges) {
        ConservativeEdge c{e.length, e.rho, std::vector<double>(e.rho.size())};
        for (std::size_t j = 0; j < e.rho.size(); ++j) {
            if (!(e.rho[j] > 0.0)) throw DomainError("density not positive");
            c.m[j] = e.rho[j] * e.v[j];
        }
        out.edges.push_back(std::move(c));
    }
    return out;
}

FieldState convert_primitive(const ConservativeState& s) {
    FieldState out;
    out.t = s.t;
    out.edges.reserve(s.edges.size());
    for (const auto& c : s.edges) {
        EdgeField e{c.length, c.rho, std::vector<double>(c.rho.size())};
        for (std::size_t j = 0; j < c.rho.size(); ++j) {
            if (!(c.rho[j] > 0.0)) throw DomainError("density not positive");
            e.v[j] = c.m[j] / c.rho[j];
        }
        out.edges.push_back(std::move(e));
    }
    return out;
}

double cfl_dt(const PressureLaw& law, const FieldState& s, double dx, double cfl) {
    double speed = 0.0;
    for (const auto& e : s.edges)
        for (int j = 0; j < e.cells(); ++j) {
            const auto lam = eigenvalues(law, e.rho[j], e.v[j]);
            speed = std::max({speed, std::abs(lam.plus), std::abs(lam.minus)});
        }
    if (!(speed > 0.0) || !std::isfinite(speed))
        throw SolverError("degenerate wave speeds in cfl_dt");
    return cfl * dx / speed;
}

double cfl_dt(const PressureLaw& law, const FieldState& s, double cfl) {
    double dt = std::numeric_limits<double>::infinity();
    for (const auto& e : s.edges) {
        FieldState one;
        one.edges.push_back(e);
        dt = std::min(dt, cfl_dt(law, one, e.dx(), cfl));
    }
    return dt;
}

namespace {

void add_warnings(std::vector<std::string>& into, const std::vector<std::string>& from) {
    for (const auto& w : from) {
        if (into.size() >= 64) return;
        if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
    }
}

RiemannField to_riemann_field(const Scenario& sc, const FieldState& f, bool observer) {
    RiemannField out;
    out.t = f.t;
    for (std::size_t e = 0; e < f.edges.size(); ++e) {
        const auto& ef = f.edges[e];
        RiemannEdge r;
        r.length = ef.length;
        r.sp.resize(ef.cells());
        r.sm.resize(ef.cells());
        for (int j = 0; j < ef.cells(); ++j) {
            const auto s = to_riemann(sc.law, ef.rho[j], ef.v[j]);
            r.sp[j] = s.plus;
            r.sm[j] = s.minus;
        }
        const auto [r0, v0] = initial_point(sc, static_cast<int>(e), 0.0, observer);
        const auto [rl, vl] = initial_point(sc, static_cast<int>(e), ef.length, observer);
        const auto a = to_riemann(sc.law, r0, v0);
        const auto b = to_riemann(sc.law, rl, vl);
        r.sp0 = a.plus;
        r.sm0 = a.minus;
        r.spL = b.plus;
        r.smL = b.minus;
        out.edges.push_back(std::move(r));
    }
    return out;
}

void refresh_physical(const PressureLaw& law, const RiemannField& r, FieldState& f) {
    f.t = r.t;
    for (std::size_t e = 0; e < r.edges.size(); ++e) {
        const auto& re = r.edges[e];
        auto& fe = f.edges[e];
        for (std::size_t j = 0; j < re.sp.size(); ++j) {
            const auto st = from_riemann(law, {re.sp[j], re.sm[j]});
            fe.rho[j] = st.rho;
            fe.v[j] = st.v;
        }
    }
}

// Linear interpolation on [0, x_0, ..., x_{N-1}, l] with the end traces.
RiemannPair interp(const RiemannEdge& e, double x) {
    const int n = static_cast<int>(e.sp.size());
    const double dx = e.dx();
    const double half = 0.5 * dx;
    if (x <= half) {
        const double w = std::clamp(x / half, 0.0, 1.0);
        return {e.sp0 + w * (e.sp[0] - e.sp0), e.sm0 + w * (e.sm[0] - e.sm0)};
    }
    if (x >= e.length - half) {
        const double w = std::clamp((e.length - x) / half, 0.0, 1.0);
        return {e.spL + w * (e.sp[n - 1] - e.spL), e.smL + w * (e.sm[n - 1] - e.smL)};
    }
    int k = static_cast<int>(std::floor((x - half) / dx));
    k = std::clamp(k, 0, n - 2);
    const double w = (x - (k + 0.5) * dx) / dx;
    return {e.sp[k] + w * (e.sp[k + 1] - e.sp[k]), e.sm[k] + w * (e.sm[k + 1] - e.sm[k])};
}

struct Source {
    double decay = 0.0;
    double rhs = 0.0;
};

struct SourceModel {
    const PressureLaw* law;
    double gamma;
    Mode mode;  // none for the truth
    double mu;

    Source operator()(int family, RiemannPair S, RiemannPair R) const {
        const double sigma = friction_sigma(S, gamma, law->c());
        Source out{0.0, family > 0 ? -sigma : sigma};
        if (mode == Mode::none || mu == 0.0) return out;
        const auto split = split_nudging(*law, mode, mu, R, S);
        out.decay = split.decay;
        out.rhs += family > 0 ? split.forcing_plus : split.forcing_minus;
        return out;
    }
};

double advance_value(double s, const Source& src, double tau) {
    const double damp = std::exp(-src.decay * tau);
    return damp * s + tau * std::exp(-0.5 * src.decay * tau) * src.rhs;
}

// Solve every node of the network at time t. Arriving invariants and the
// leaving-trace setter use the node-local convention.
template <class Arriving, class Leaving, class Warm>
void solve_nodes(const Scenario& sc, double t, bool strict, Arriving arriving, Leaving leaving,
                 Warm warm, std::vector<std::string>& warnings) {
    const auto& topo = sc.topology;
    for (int v = 0; v < static_cast<int>(topo.nodes().size()); ++v) {
        const auto& inc = topo.incident(v);
        try {
            if (topo.nodes()[v].kind == NodeKind::boundary) {
                const auto& in = inc.front();
                const bool at_end = in.sign > 0;
                const auto* bc = sc.boundary_at(v);
                if (!bc) throw ConfigError("missing boundary condition");
                const double value = bc->schedule(t);
                BoundaryOptions opt;
                opt.warm = warm(in.edge, at_end);
                opt.has_warm = true;
                opt.strict = strict;
                const double rm = arriving(in.edge, at_end);
                const auto sol = bc->quantity == Quantity::m
                                     ? invert_boundary_m(sc.law, -in.sign * value, rm, opt)
                                     : invert_boundary_h(sc.law, value, rm, opt);
                add_warnings(warnings, sol.warnings);
                leaving(in.edge, at_end, sol.r_plus);
            } else {
                NodeProblem pb;
                pb.strict = strict;
                for (const auto& in : inc) {
                    pb.r_minus.push_back(arriving(in.edge, in.sign > 0));
                    pb.warm.push_back(warm(in.edge, in.sign > 0));
                }
                const auto sol = couple_node(sc.law, pb);
                add_warnings(warnings, sol.warnings);
                for (std::size_t k = 0; k < inc.size(); ++k)
                    leaving(inc[k].edge, inc[k].sign > 0, sol.r_plus[k]);
            }
        } catch (const SolverError& e) {
            throw SolverError(
                fmt::format("node '{}' at t={:.9g}: {}", topo.nodes()[v].id, t, e.what()));
        }
    }
}

// ---------------------------------------------------------------------------
// Method of characteristics

void moc_field(const Scenario& sc, const RiemannField& S, const RiemannField& R,
               const SourceModel& model, const std::vector<Eigenvalues>& lam0,
               const std::vector<Eigenvalues>& lamL,
               const std::vector<std::vector<Eigenvalues>>& lam, double dt, bool strict,
               RiemannField& out, std::vector<std::string>& warnings) {
    const auto ne = S.edges.size();
    out = S;
    out.t = S.t + dt;
    // Arriving traces at the new time level.
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& se = S.edges[e];
        const auto& re = R.edges[e];
        const double x0 = -lam0[e].minus * dt;
        const auto s0 = interp(se, x0);
        out.edges[e].sm0 = advance_value(s0.minus, model(-1, s0, interp(re, x0)), dt);
        const double xl = se.length - lamL[e].plus * dt;
        const auto sl = interp(se, xl);
        out.edges[e].spL = advance_value(sl.plus, model(+1, sl, interp(re, xl)), dt);
    }
    solve_nodes(
        sc, out.t, strict,
        [&](int e, bool at_end) { return at_end ? out.edges[e].spL : out.edges[e].sm0; },
        [&](int e, bool at_end, double r) {
            if (at_end) out.edges[e].smL = r;
            else out.edges[e].sp0 = r;
        },
        [&](int e, bool at_end) { return at_end ? S.edges[e].smL : S.edges[e].sp0; }, warnings);
    // Interior cells.
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& se = S.edges[e];
        const auto& re = R.edges[e];
        auto& oe = out.edges[e];
        const int n = static_cast<int>(se.sp.size());
        const double dx = se.dx();
        for (int j = 0; j < n; ++j) {
            const double x = (j + 0.5) * dx;
            for (int family : {+1, -1}) {
                const double l = family > 0 ? lam[e][j].plus : lam[e][j].minus;
                const double foot = x - l * dt;
                double value;
                if (foot >= 0.0 && foot <= se.length) {
                    const auto sf = interp(se, foot);
                    value = advance_value(family > 0 ? sf.plus : sf.minus,
                                          model(family, sf, interp(re, foot)), dt);
                } else {
                    // The characteristic enters through an end during the step.
                    const bool at_start = foot < 0.0;
                    const double tau = (at_start ? x : se.length - x) / std::abs(l);
                    const double w = 1.0 - tau / dt;
                    const RiemannPair old_b = at_start ? RiemannPair{se.sp0, se.sm0}
                                                       : RiemannPair{se.spL, se.smL};
                    const RiemannPair new_b = at_start ? RiemannPair{oe.sp0, oe.sm0}
                                                       : RiemannPair{oe.spL, oe.smL};
                    const RiemannPair rb = at_start ? RiemannPair{re.sp0, re.sm0}
                                                    : RiemannPair{re.spL, re.smL};
                    const double ob = family > 0 ? old_b.plus : old_b.minus;
                    const double nb = family > 0 ? new_b.plus : new_b.minus;
                    value = advance_value(ob + w * (nb - ob), model(family, old_b, rb), tau);
                }
                if (family > 0) oe.sp[j] = value;
                else oe.sm[j] = value;
            }
        }
    }
}

void eigen_tables(const PressureLaw& law, const RiemannField& S, std::vector<Eigenvalues>& l0,
                  std::vector<Eigenvalues>& lL, std::vector<std::vector<Eigenvalues>>& lam) {
    const auto ne = S.edges.size();
    l0.resize(ne);
    lL.resize(ne);
    lam.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& se = S.edges[e];
        l0[e] = eigenvalues(law, RiemannPair{se.sp0, se.sm0});
        lL[e] = eigenvalues(law, RiemannPair{se.spL, se.smL});
        lam[e].resize(se.sp.size());
        for (std::size_t j = 0; j < se.sp.size(); ++j)
            lam[e][j] = eigenvalues(law, RiemannPair{se.sp[j], se.sm[j]});
    }
}

void step_moc(TwinState& tw, double dt) {
    const auto& sc = *tw.scenario;
    std::vector<Eigenvalues> l0, lL;
    std::vector<std::vector<Eigenvalues>> lam;
    eigen_tables(sc.law, tw.truth_ri, l0, lL, lam);
    RiemannField truth_new;
    const SourceModel truth_model{&sc.law, sc.gamma, Mode::none, 0.0};
    moc_field(sc, tw.truth_ri, tw.truth_ri, truth_model, l0, lL, lam, dt, tw.strict, truth_new,
              tw.warnings);
    if (!tw.truth_only) {
        eigen_tables(sc.law, tw.observer_ri, l0, lL, lam);
        RiemannField obs_new;
        const SourceModel obs_model{&sc.law, sc.gamma, sc.mode, sc.mu};
        moc_field(sc, tw.observer_ri, tw.truth_ri, obs_model, l0, lL, lam, dt, tw.strict, obs_new,
                  tw.warnings);
        tw.observer_ri = std::move(obs_new);
        refresh_physical(sc.law, tw.observer_ri, tw.observer);
    }
    tw.truth_ri = std::move(truth_new);
    refresh_physical(sc.law, tw.truth_ri, tw.truth);
    if (tw.truth_only) {
        tw.observer_ri = tw.truth_ri;
        tw.observer = tw.truth;
    }
}

// ---------------------------------------------------------------------------
// Finite volumes

struct Flux {
    double mass = 0.0;
    double mom = 0.0;
};

Flux physical_flux(const PressureLaw& law, double rho, double v) {
    return {rho * v, rho * v * v + law.p(rho)};
}

FieldState fv_field(const Scenario& sc, const FieldState& F, const FieldState* truth, Mode mode,
                    double dt, bool strict, FaceFluxes* fluxes,
                    std::vector<std::string>& warnings) {
    const auto& law = sc.law;
    const auto ne = F.edges.size();
    // Boundary and junction faces from node solves on the adjacent cells.
    std::vector<RiemannPair> face0(ne), faceL(ne);
    auto cell_ri = [&](int e, bool at_end) {
        const auto& f = F.edges[e];
        const int j = at_end ? f.cells() - 1 : 0;
        return to_riemann(law, f.rho[j], f.v[j]);
    };
    const double t_face = F.t + 0.5 * dt;
    solve_nodes(
        sc, t_face, strict,
        [&](int e, bool at_end) {
            const auto s = cell_ri(e, at_end);
            return at_end ? s.plus : s.minus;
        },
        [&](int e, bool at_end, double r) {
            const auto s = cell_ri(e, at_end);
            if (at_end) faceL[e] = {s.plus, r};
            else face0[e] = {r, s.minus};
        },
        [&](int e, bool at_end) {
            const auto s = cell_ri(e, at_end);
            return at_end ? s.plus : s.minus;
        },
        warnings);
    if (fluxes) {
        fluxes->at_start.assign(ne, 0.0);
        fluxes->at_end.assign(ne, 0.0);
    }
    FieldState out = F;
    out.t = F.t + dt;
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& f = F.edges[e];
        const int n = f.cells();
        const double dx = f.dx();
        std::vector<Flux> flux(n + 1);
        {
            const auto a = from_riemann(law, face0[e]);
            const auto b = from_riemann(law, faceL[e]);
            flux[0] = physical_flux(law, a.rho, a.v);
            flux[n] = physical_flux(law, b.rho, b.v);
        }
        for (int j = 1; j < n; ++j) {
            const double rl = f.rho[j - 1], vl = f.v[j - 1];
            const double rr = f.rho[j], vr = f.v[j];
            const auto fl = physical_flux(law, rl, vl);
            const auto fr = physical_flux(law, rr, vr);
            const double alpha = std::max(std::abs(vl) + std::sqrt(law.dp(rl)),
                                          std::abs(vr) + std::sqrt(law.dp(rr)));
            flux[j].mass = 0.5 * (fl.mass + fr.mass) - 0.5 * alpha * (rr - rl);
            flux[j].mom = 0.5 * (fl.mom + fr.mom) - 0.5 * alpha * (rr * vr - rl * vl);
        }
        if (fluxes) {
            fluxes->at_start[e] = flux[0].mass;
            fluxes->at_end[e] = flux[n].mass;
        }
        auto& o = out.edges[e];
        for (int j = 0; j < n; ++j) {
            const double rho = f.rho[j], v = f.v[j];
            const double m = rho * v;
            double src_mass = 0.0;
            double src_mom = -sc.gamma * std::abs(m) * m / rho;
            if (truth && mode != Mode::none) {
                const auto& te = truth->edges[e];
                const auto L =
                    nudging_physical(law, mode, sc.mu, {te.rho[j], te.v[j]}, {rho, v});
                src_mass += L.l_rho;
                src_mom += rho * L.l_v + v * L.l_rho;
            }
            const double rho_new = rho - dt / dx * (flux[j + 1].mass - flux[j].mass) + dt * src_mass;
            const double m_new = m - dt / dx * (flux[j + 1].mom - flux[j].mom) + dt * src_mom;
            if (!(rho_new > 0.0))
                throw SolverError(fmt::format("density not positive at t={:.9g}", out.t));
            o.rho[j] = rho_new;
            o.v[j] = m_new / rho_new;
        }
    }
    return out;
}

void step_fv(TwinState& tw, double dt) {
    const auto& sc = *tw.scenario;
    FieldState truth_new =
        fv_field(sc, tw.truth, nullptr, Mode::none, dt, tw.strict, &tw.truth_fluxes, tw.warnings);
    if (!tw.truth_only) {
        tw.observer = fv_field(sc, tw.observer, &tw.truth, sc.mode, dt, tw.strict, nullptr,
                               tw.warnings);
    }
    tw.truth = std::move(truth_new);
    if (tw.truth_only) tw.observer = tw.truth;
}

}  // namespace

TwinState make_twin(const Scenario& sc, StepperKind stepper, bool truth_only) {
    TwinState tw;
    tw.scenario = &sc;
    tw.stepper = stepper;
    tw.truth_only = truth_only;
    tw.truth = initial_field(sc, false);
    tw.observer = truth_only ? tw.truth : initial_field(sc, true);
    if (stepper == StepperKind::moc) {
        tw.truth_ri = to_riemann_field(sc, tw.truth, false);
        tw.observer_ri = truth_only ? tw.truth_ri : to_riemann_field(sc, tw.observer, true);
    }
    return tw;
}

double twin_dt(const TwinState& tw) {
    const auto& sc = *tw.scenario;
    double dt = cfl_dt(sc.law, tw.truth, sc.cfl);
    if (!tw.truth_only) dt = std::min(dt, cfl_dt(sc.law, tw.observer, sc.cfl));
    return dt;
}

void step_twin(TwinState& tw, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw SolverError("non-positive time step");
    if (tw.stepper == StepperKind::moc) step_moc(tw, dt);
    else step_fv(tw, dt);
    ++tw.step;
    tw.dt = dt;
}

// ---------------------------------------------------------------------------
// Driver

namespace {

bool finite_state(const FieldState& s) {
    for (const auto& e : s.edges)
        for (int j = 0; j < e.cells(); ++j)
            if (!std::isfinite(e.rho[j]) || !std::isfinite(e.v[j])) return false;
    return true;
}

}  // namespace

RunResult run_twin(const Scenario& sc, const RunOptions& opt) {
    const auto wall0 = std::chrono::steady_clock::now();
    validate_scenario(sc);
    RunResult res;
    const StepperKind stepper = opt.stepper.value_or(sc.stepper);
    TwinState tw = make_twin(sc, stepper, opt.truth_only);
    tw.strict = opt.strict;
    const Mode mode = opt.truth_only ? Mode::none : sc.mode;
    const auto bounds = sc.bounds();

    if (mode != Mode::none) {
        try {
            res.norms = norm_equiv_constants(bounds);
            res.delta = select_delta(bounds, res.norms.c0, sc.mu, sc.gamma,
                                     sc.topology.max_length());
        } catch (const DomainError& e) {
            res.warnings.push_back(e.what());
        }
    }
    std::optional<AntiderivativeTracker> tracker;
    const Functional kind = functional_for(mode);
    if (kind != Functional::none) {
        try {
            tracker.emplace(sc, tw.truth, tw.observer, kind);
        } catch (const ConfigError& e) {
            res.warnings.push_back(fmt::format("auxiliary functional disabled: {}", e.what()));
        }
    }

    FieldState prev = tw.truth;
    double prev_t = 0.0;
    auto record = [&]() {
        if (!finite_state(tw.truth) || !finite_state(tw.observer))
            throw SolverError(fmt::format("non-finite state at t={:.9g}", tw.truth.t));
        Sample s;
        s.t = tw.truth.t;
        s.l2_err_sq = l2_error_sq(tw.observer, tw.truth);
        s.h_rel = relative_energy(sc.law, tw.observer, tw.truth);
        if (tracker) {
            s.f_aux = kind == Functional::f1 ? f1(*tracker, tw.observer, tw.truth)
                                             : f2(*tracker, tw.observer, tw.truth);
        }
        s.lyapunov = s.h_rel + res.delta.delta * s.f_aux;
        s.delta_m = mass_difference(tw.observer, tw.truth);
        s.dt = tw.dt;
        s.step = tw.step;
        s.rho_min = 1e300;
        s.rho_max = -1e300;
        for (const FieldState* f : {&tw.truth, &tw.observer})
            for (const auto& e : f->edges)
                for (int j = 0; j < e.cells(); ++j) {
                    s.max_v = std::max(s.max_v, std::abs(e.v[j]));
                    s.rho_min = std::min(s.rho_min, e.rho[j]);
                    s.rho_max = std::max(s.rho_max, e.rho[j]);
                }
        if (s.t > prev_t) {
            double rate = 0.0;
            for (std::size_t e = 0; e < prev.edges.size(); ++e)
                for (int j = 0; j < prev.edges[e].cells(); ++j)
                    rate = std::max(rate, std::abs(tw.truth.edges[e].rho[j] - prev.edges[e].rho[j]) +
                                              std::abs(tw.truth.edges[e].v[j] - prev.edges[e].v[j]));
            s.dt_rate = rate / (s.t - prev_t);
        }
        prev = tw.truth;
        prev_t = s.t;
        res.series.samples.push_back(s);
        if (opt.on_sample) opt.on_sample(tw);
    };

    record();
    double t = 0.0;
    for (int k = 1; k <= sc.samples; ++k) {
        const double target = sc.T * static_cast<double>(k) / static_cast<double>(sc.samples);
        while (target - t > 1e-12 * sc.T) {
            double dt;
            try {
                dt = std::min(twin_dt(tw), target - t);
                if (tracker) tracker->advance(tw.truth, tw.observer, dt);
                step_twin(tw, dt);
            } catch (const Error& e) {
                throw SolverError(
                    fmt::format("step {} at t={:.9g}: {}", tw.step + 1, tw.truth.t, e.what()));
            }
            t = tw.truth.t;
        }
        record();
    }

    res.steps = tw.step;
    res.truth = tw.truth;
    res.observer = tw.observer;
    add_warnings(res.warnings, tw.warnings);
    res.delta_m0 = res.series.samples.front().delta_m;
    if (opt.truth_only) {
        res.fit_error = "truth-only run";
    } else {
        try {
            res.fit = fit_decay(res.series, opt.window);
        } catch (const Error& e) {
            res.fit_error = e.what();
        }
    }
    res.audit = audit_assumptions(res.series, bounds, opt.ct_max);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
}

}  // namespace pipeobs
