#include "pipeobs/picard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pipeobs/junction.hpp"

namespace pipeobs {

// ---------------------------------------------------------------------------
// Lattice

SpaceTimeField SpaceTimeField::zeros(const std::vector<double>& lengths, int nx, int nt,
                                     double T) {
    if (nx < 1 || nt < 1 || !(T > 0.0)) throw Error("space-time lattice needs nx, nt >= 1, T > 0");
    SpaceTimeField f;
    f.nx = nx;
    f.nt = nt;
    f.T = T;
    f.length = lengths;
    const auto n = static_cast<std::size_t>(nx + 1) * (nt + 1);
    f.sp.assign(lengths.size(), std::vector<double>(n, 0.0));
    f.sm = f.sp;
    return f;
}

RiemannPair SpaceTimeField::value(int e, double t, double x) const {
    const double ht = dt(), hx = dx(e);
    const double ut = std::clamp(t / ht, 0.0, static_cast<double>(nt));
    const double ux = std::clamp(x / hx, 0.0, static_cast<double>(nx));
    const int k = std::min(static_cast<int>(ut), nt - 1);
    const int i = std::min(static_cast<int>(ux), nx - 1);
    const double a = ut - k, b = ux - i;
    const auto& p = sp[e];
    const auto& m = sm[e];
    const auto i00 = index(k, i), i01 = index(k, i + 1), i10 = index(k + 1, i),
               i11 = index(k + 1, i + 1);
    auto mix = [&](const std::vector<double>& v) {
        return (1 - a) * ((1 - b) * v[i00] + b * v[i01]) + a * ((1 - b) * v[i10] + b * v[i11]);
    };
    return {mix(p), mix(m)};
}

double norm_M(const SpaceTimeField& f) {
    double out = 0.0;
    for (std::size_t e = 0; e < f.sp.size(); ++e)
        for (std::size_t j = 0; j < f.sp[e].size(); ++j)
            out = std::max(out, std::abs(f.sp[e][j]) + std::abs(f.sm[e][j]));
    return out;
}

double distance_M(const SpaceTimeField& a, const SpaceTimeField& b) {
    double out = 0.0;
    for (std::size_t e = 0; e < a.sp.size(); ++e)
        for (std::size_t j = 0; j < a.sp[e].size(); ++j)
            out = std::max(out, std::abs(a.sp[e][j] - b.sp[e][j]) +
                                    std::abs(a.sm[e][j] - b.sm[e][j]));
    return out;
}

LipschitzEstimate measure_lipschitz(const SpaceTimeField& f) {
    LipschitzEstimate est;
    for (std::size_t e = 0; e < f.sp.size(); ++e) {
        const double hx = f.dx(static_cast<int>(e));
        for (const auto* v : {&f.sp[e], &f.sm[e]}) {
            for (int k = 0; k <= f.nt; ++k)
                for (int i = 0; i <= f.nx; ++i) {
                    const double s = (*v)[f.index(k, i)];
                    est.sup = std::max(est.sup, std::abs(s));
                    if (i < f.nx)
                        est.l_x = std::max(est.l_x, std::abs((*v)[f.index(k, i + 1)] - s) / hx);
                }
        }
    }
    return est;
}

// ---------------------------------------------------------------------------
// Budget

SmallnessBudget derive_budget(const Scenario& sc, const PicardSettings& ps) {
    SmallnessBudget b;
    const auto& law = sc.law;
    const double c = law.c();
    b.s_max = ps.s_max;
    b.mu = sc.mu;
    const double rho_lo = law.ptilde_inv(-b.s_max);
    const double rho_hi = law.ptilde_inv(b.s_max);
    b.bounds = bound_constants(law, rho_lo, rho_hi, c * b.s_max);
    const auto eb = eigen_bounds(b.s_max, b.bounds, c);
    b.lambda_lo = eb.lambda_lo;
    b.lambda_hi = eb.lambda_hi;
    b.l_lambda = eb.lipschitz;
    b.l_sigma = sc.gamma * c * b.s_max;
    b.sigma_max = sc.gamma * c * b.s_max * b.s_max;

    // Data bound and Lipschitz constant from a fine sampling of both initials.
    const auto& topo = sc.topology;
    for (int obs = 0; obs < 2; ++obs)
        for (int e = 0; e < static_cast<int>(topo.edges().size()); ++e) {
            const double len = topo.edges()[e].length;
            const int n = 4 * std::max(ps.nx, 50);
            RiemannPair prev{};
            for (int i = 0; i <= n; ++i) {
                const double x = len * i / n;
                const auto [rho, v] = initial_point(sc, e, x, obs == 1);
                const auto s = to_riemann(law, rho, v);
                b.b_max = std::max({b.b_max, std::abs(s.plus), std::abs(s.minus)});
                if (i > 0)
                    b.l_i = std::max({b.l_i, std::abs(s.plus - prev.plus) / (len / n),
                                      std::abs(s.minus - prev.minus) / (len / n)});
                prev = s;
            }
        }
    for (const auto& bc : sc.boundary) b.l_i = std::max(b.l_i, bc.schedule.max_slope());
    b.l_r = ps.l_r > 0.0 ? ps.l_r : 2.0 * b.l_i + 0.1;

    int degree = 0;
    for (int v = 0; v < static_cast<int>(topo.nodes().size()); ++v)
        if (topo.nodes()[v].kind == NodeKind::inner)
            degree = std::max(degree, static_cast<int>(topo.incident(v).size()));
    b.c_n = degree > 0 ? estimate_junction_constant(law, degree, b.s_max, 2000, 7) : 0.0;

    double ell_min = std::numeric_limits<double>::infinity();
    for (const auto& e : topo.edges()) ell_min = std::min(ell_min, e.length);
    b.horizon_edge = ell_min / b.lambda_hi;
    const double cap = (1.0 / 12.0) *
                       std::min(1.0, 1.0 / (4.0 + b.c_n) * (4.0 / 9.0) * b.lambda_lo / b.lambda_hi);
    b.horizon_cert =
        b.mu > 0.0 ? -2.0 / b.mu * std::log1p(-cap) : std::numeric_limits<double>::infinity();
    const double t_max = std::min(b.horizon_cert, b.horizon_edge);
    b.T = ps.horizon > 0.0 ? ps.horizon : 0.95 * t_max;
    b.horizon_margin = cap + std::expm1(-0.5 * b.mu * b.T);

    if (!(b.T < b.horizon_edge))
        b.violations.push_back(fmt::format("horizon T={:.6g} not below l_min/Lambda={:.6g}", b.T,
                                           b.horizon_edge));
    if (b.horizon_margin < 0.0)
        b.violations.push_back(
            fmt::format("damping condition violated by {:.3e}", -b.horizon_margin));
    if (b.b_max > b.s_max)
        b.violations.push_back(
            fmt::format("data bound B_max={:.6g} exceeds S_max={:.6g}", b.b_max, b.s_max));
    return b;
}

PicardData picard_data(const Scenario& sc, int nx, bool observer, double mu) {
    PicardData d;
    d.scenario = &sc;
    d.mu = mu;
    const auto& edges = sc.topology.edges();
    d.y_plus.resize(edges.size());
    d.y_minus.resize(edges.size());
    for (int e = 0; e < static_cast<int>(edges.size()); ++e)
        for (int i = 0; i <= nx; ++i) {
            const auto [rho, v] = initial_point(sc, e, edges[e].length * i / nx, observer);
            const auto s = to_riemann(sc.law, rho, v);
            d.y_plus[e].push_back(s.plus);
            d.y_minus[e].push_back(s.minus);
        }
    return d;
}

// ---------------------------------------------------------------------------
// Characteristics

CharacteristicTrace trace_characteristic(const PressureLaw& law, const SpaceTimeField& f,
                                         int e, int family, double x, double t, double h) {
    CharacteristicTrace tr;
    const double len = f.length[e];
    tr.s.push_back(t);
    tr.x.push_back(x);
    if (t <= 0.0) {
        tr.t_foot = 0.0;
        tr.x_foot = x;
        return tr;
    }
    const int n = std::max(1, static_cast<int>(std::ceil(t / h - 1e-9)));
    const double hh = t / n;
    double s = t, xx = x;
    for (int k = 0; k < n; ++k) {
        const auto lam = eigenvalues(law, f.value(e, s, xx));
        const double l = family > 0 ? lam.plus : lam.minus;
        if (!std::isfinite(l)) throw SolverError("non-finite field along a characteristic");
        const double xn = xx - hh * l;
        if (xn < 0.0 || xn > len) {
            const double bound = xn < 0.0 ? 0.0 : len;
            const double theta = (xx - bound) / (xx - xn);
            tr.t_foot = s - theta * hh;
            tr.x_foot = bound;
            tr.hit = xn < 0.0 ? -1 : 1;
            tr.s.push_back(tr.t_foot);
            tr.x.push_back(bound);
            return tr;
        }
        s = (k + 1 == n) ? 0.0 : s - hh;
        xx = xn;
        tr.s.push_back(s);
        tr.x.push_back(xx);
    }
    tr.t_foot = 0.0;
    tr.x_foot = xx;
    return tr;
}

namespace {

struct PhiContext {
    const SpaceTimeField& S;
    const SpaceTimeField* R;
    const PicardData& data;
    const PressureLaw& law;
    double gamma;
    double mu;
    double h;

    double rhs(int e, int family, double s, double x) const {
        const auto si = S.value(e, s, x);
        const double sigma = friction_sigma(si, gamma, law.c());
        double out = family > 0 ? -sigma : sigma;
        if (R && mu > 0.0) {
            const auto r = R->value(e, s, x);
            out += family > 0 ? 0.5 * mu * (r.plus - r.minus + si.minus)
                              : 0.5 * mu * (si.plus - r.plus + r.minus);
        }
        return out;
    }

    double initial(int e, int family, double x) const {
        const auto& y = family > 0 ? data.y_plus[e] : data.y_minus[e];
        const int nx = static_cast<int>(y.size()) - 1;
        const double u = std::clamp(x / S.dx(e), 0.0, static_cast<double>(nx));
        const int i = std::min(static_cast<int>(u), nx - 1);
        const double w = u - i;
        return (1 - w) * y[i] + w * y[i + 1];
    }

    // Kernel-weighted path integral plus the trace itself.
    double integrate(int e, int family, const CharacteristicTrace& tr) const {
        const double t = tr.s.front();
        double sum = 0.0;
        double prev = std::exp(-0.5 * mu * (t - tr.s[0])) * rhs(e, family, tr.s[0], tr.x[0]);
        for (std::size_t j = 1; j < tr.s.size(); ++j) {
            const double cur =
                std::exp(-0.5 * mu * (t - tr.s[j])) * rhs(e, family, tr.s[j], tr.x[j]);
            sum += 0.5 * (prev + cur) * (tr.s[j - 1] - tr.s[j]);
            prev = cur;
        }
        return sum;
    }

    // Arriving invariant at an end of edge f at time tb, traced back to s = 0.
    double arriving(int f, bool at_end, double tb) const {
        const int family = at_end ? +1 : -1;
        const double x = at_end ? S.length[f] : 0.0;
        const auto tr = trace_characteristic(law, S, f, family, x, tb, h);
        if (tr.hit != 0)
            throw SolverError(fmt::format(
                "horizon violated: nested trace on edge {} hit a node at s={:.6g}", f, tr.t_foot));
        return initial(f, family, tr.x_foot) * std::exp(-0.5 * mu * tb) +
               integrate(f, family, tr);
    }

    double leaving(int node, int e, double tb) const {
        const auto& sc = *data.scenario;
        const auto& topo = sc.topology;
        const auto& inc = topo.incident(node);
        if (topo.nodes()[node].kind == NodeKind::boundary) {
            const auto& in = inc.front();
            const auto* bc = sc.boundary_at(node);
            if (!bc) throw ConfigError("missing boundary condition");
            const double rm = arriving(in.edge, in.sign > 0, tb);
            const double value = bc->schedule(data.t0 + tb);
            const auto sol = bc->quantity == Quantity::m
                                 ? invert_boundary_m(law, -in.sign * value, rm)
                                 : invert_boundary_h(law, value, rm);
            return sol.r_plus;
        }
        NodeProblem pb;
        int mine = -1;
        for (std::size_t k = 0; k < inc.size(); ++k) {
            pb.r_minus.push_back(arriving(inc[k].edge, inc[k].sign > 0, tb));
            if (inc[k].edge == e) mine = static_cast<int>(k);
        }
        const auto sol = couple_node(law, pb);
        return sol.r_plus[mine];
    }
};

}  // namespace

SpaceTimeField apply_phi(const SpaceTimeField& S, const SpaceTimeField* R, const PicardData& data,
                         const SmallnessBudget& budget, int substeps) {
    const auto& sc = *data.scenario;
    if (data.mu > 0.0 && !R) throw Error("apply_phi: truth field required for mu > 0");
    double hx_min = std::numeric_limits<double>::infinity();
    for (int e = 0; e < static_cast<int>(S.length.size()); ++e) hx_min = std::min(hx_min, S.dx(e));
    const double h = std::min(S.dt(), hx_min / budget.lambda_hi) / std::max(1, substeps);
    const PhiContext ctx{S, R, data, sc.law, sc.gamma, data.mu, h};
    SpaceTimeField out = SpaceTimeField::zeros(S.length, S.nx, S.nt, S.T);
    const auto& edges = sc.topology.edges();
    for (int e = 0; e < static_cast<int>(S.length.size()); ++e) {
        for (int i = 0; i <= S.nx; ++i) {
            out.sp[e][S.index(0, i)] = data.y_plus[e][i];
            out.sm[e][S.index(0, i)] = data.y_minus[e][i];
        }
        for (int k = 1; k <= S.nt; ++k) {
            const double t = k * S.dt();
            for (int i = 0; i <= S.nx; ++i) {
                const double x = i * S.dx(e);
                for (int family : {+1, -1}) {
                    const auto tr = trace_characteristic(sc.law, S, e, family, x, t, h);
                    double foot;
                    if (tr.hit == 0) {
                        foot = ctx.initial(e, family, tr.x_foot);
                    } else {
                        if (tr.hit != -family)
                            throw SolverError("characteristic left through the wrong end");
                        const int node = tr.hit < 0 ? edges[e].from : edges[e].to;
                        foot = ctx.leaving(node, e, tr.t_foot);
                    }
                    const double value = foot * std::exp(-0.5 * data.mu * (t - tr.t_foot)) +
                                         ctx.integrate(e, family, tr);
                    (family > 0 ? out.sp : out.sm)[e][S.index(k, i)] = value;
                }
            }
        }
    }
    return out;
}

PicardResult iterate_to_fixed_point(const PicardData& data, const SpaceTimeField* truth,
                                    const SmallnessBudget& budget, const PicardSettings& ps) {
    const auto& sc = *data.scenario;
    std::vector<double> lengths;
    for (const auto& e : sc.topology.edges()) lengths.push_back(e.length);
    PicardResult res;
    // Start from the initial data held constant in time.
    SpaceTimeField S = SpaceTimeField::zeros(lengths, ps.nx, budget.T > 0 ? ps.nt : 1, budget.T);
    for (std::size_t e = 0; e < lengths.size(); ++e)
        for (int k = 0; k <= S.nt; ++k)
            for (int i = 0; i <= S.nx; ++i) {
                S.sp[e][S.index(k, i)] = data.y_plus[e][i];
                S.sm[e][S.index(k, i)] = data.y_minus[e][i];
            }
    res.iterates.push_back(measure_lipschitz(S));
    int above_one = 0;
    auto note_iterate = [&](const LipschitzEstimate& est) {
        res.iterates.push_back(est);
        if (est.sup > budget.s_max && !res.left_ball) {
            res.left_ball = true;
            res.warnings.push_back(fmt::format("iterate left the S_max ball: sup {:.6g} > {:.6g}",
                                               est.sup, budget.s_max));
        }
        if (est.l_x > budget.l_r)
            res.warnings.push_back(fmt::format("iterate Lipschitz {:.6g} exceeds L_R {:.6g}",
                                               est.l_x, budget.l_r));
    };
    try {
        for (int it = 0; it < ps.max_iters; ++it) {
            SpaceTimeField next = apply_phi(S, truth, data, budget, ps.substeps);
            const double d = distance_M(next, S);
            if (!std::isfinite(d)) throw SolverError("non-finite iterate");
            if (!res.diffs.empty() && res.diffs.back() > 0.0) {
                const double q = d / res.diffs.back();
                res.ratios.push_back(q);
                res.max_ratio = std::max(res.max_ratio, q);
                above_one = q >= 1.0 ? above_one + 1 : 0;
            }
            res.diffs.push_back(d);
            res.iterations = it + 1;
            S = std::move(next);
            note_iterate(measure_lipschitz(S));
            if (d <= ps.tol) {
                res.converged = true;
                break;
            }
            if (above_one >= 3) {
                res.diverged = true;
                res.failure = fmt::format(
                    "contraction ratio >= 1 for 3 consecutive iterations (last q = {:.4g})",
                    res.ratios.back());
                break;
            }
            if (res.iterates.back().sup > 100.0 * budget.s_max) {
                res.diverged = true;
                res.failure = fmt::format("iterates blew up: sup {:.6g}", res.iterates.back().sup);
                break;
            }
        }
        if (res.converged) {
            const SpaceTimeField check = apply_phi(S, truth, data, budget, ps.substeps);
            res.residual = distance_M(check, S);
        } else if (!res.diverged) {
            res.failure = fmt::format("no convergence in {} iterations (last difference {:.3e})",
                                      ps.max_iters, res.diffs.empty() ? 0.0 : res.diffs.back());
            res.residual = res.diffs.empty() ? 0.0 : res.diffs.back();
        }
    } catch (const Error& e) {
        res.diverged = true;
        res.failure = e.what();
    }
    res.solution = std::move(S);
    return res;
}

ContinuationResult semi_global_continuation(const Scenario& sc, const SmallnessBudget& budget,
                                            const PicardSettings& ps, double T_total) {
    ContinuationResult out;
    const int windows = std::max(1, static_cast<int>(std::ceil(T_total / budget.T - 1e-9)));
    SmallnessBudget wb = budget;
    wb.T = T_total / windows;
    PicardData truth_data = picard_data(sc, ps.nx, false, 0.0);
    PicardData obs_data = picard_data(sc, ps.nx, true, sc.mu);
    for (int k = 0; k < windows; ++k) {
        truth_data.t0 = obs_data.t0 = k * wb.T;
        WindowReport rep;
        rep.index = k;
        rep.t0 = k * wb.T;
        rep.t1 = (k + 1) * wb.T;
        auto truth = iterate_to_fixed_point(truth_data, nullptr, wb, ps);
        auto obs = sc.mu > 0.0 ? iterate_to_fixed_point(obs_data, &truth.solution, wb, ps)
                               : iterate_to_fixed_point(obs_data, nullptr, wb, ps);
        for (const auto* r : {&truth, &obs})
            if (!r->converged) {
                out.ok = false;
                out.failure = fmt::format("window {}: {}", k, r->failure);
            }
        rep.iterations = obs.iterations;
        rep.max_ratio = std::max(truth.max_ratio, obs.max_ratio);
        rep.residual = std::max(truth.residual, obs.residual);
        rep.sup = measure_lipschitz(obs.solution).sup;
        for (std::size_t e = 0; e < obs.solution.sp.size(); ++e)
            for (std::size_t j = 0; j < obs.solution.sp[e].size(); ++j)
                rep.sup_error =
                    std::max({rep.sup_error, std::abs(obs.solution.sp[e][j] - truth.solution.sp[e][j]),
                              std::abs(obs.solution.sm[e][j] - truth.solution.sm[e][j])});
        out.windows.push_back(rep);
        out.c_T = std::max(out.c_T, rep.sup);
        if (!out.ok) break;
        // Terminal rows become the next initial data.
        for (std::size_t e = 0; e < obs.solution.sp.size(); ++e)
            for (int i = 0; i <= ps.nx; ++i) {
                const auto j = obs.solution.index(ps.nt, i);
                obs_data.y_plus[e][i] = obs.solution.sp[e][j];
                obs_data.y_minus[e][i] = obs.solution.sm[e][j];
                truth_data.y_plus[e][i] = truth.solution.sp[e][j];
                truth_data.y_minus[e][i] = truth.solution.sm[e][j];
            }
        out.last = std::move(obs.solution);
        out.last_truth = std::move(truth.solution);
    }
    if (!std::isfinite(out.c_T)) {
        out.ok = false;
        out.failure = "non-finite continuation bound";
    }
    return out;
}

}  // namespace pipeobs
