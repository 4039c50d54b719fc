#include "pipeobs/energy.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <fmt/format.h>

namespace pipeobs {

namespace {

void require_same_grid(const FieldState& a, const FieldState& b, const char* what) {
    if (!same_grid(a, b)) throw Error(fmt::format("{}: grid mismatch", what));
}

}  // namespace

double energy(const PressureLaw& law, const FieldState& s) {
    double sum = 0.0;
    for (const auto& e : s.edges) {
        double part = 0.0;
        for (int j = 0; j < e.cells(); ++j)
            part += 0.5 * e.rho[j] * e.v[j] * e.v[j] + law.P(e.rho[j]);
        sum += part * e.dx();
    }
    return sum;
}

double relative_energy(const PressureLaw& law, const FieldState& obs, const FieldState& truth) {
    require_same_grid(obs, truth, "relative_energy");
    double sum = 0.0;
    for (std::size_t k = 0; k < obs.edges.size(); ++k) {
        const auto& o = obs.edges[k];
        const auto& u = truth.edges[k];
        double part = 0.0;
        for (int j = 0; j < u.cells(); ++j) {
            const double rho = u.rho[j], v = u.v[j];
            const double rh = o.rho[j], vh = o.v[j];
            // H(u_hat) - H(u) - h (rho_hat - rho) - m (v_hat - v), h = v^2/2 + P'(rho),
            // grouped so that each bracket is small before the subtraction.
            const double potential = (law.P(rh) - law.P(rho)) - law.dP(rho) * (rh - rho);
            const double kinetic = (0.5 * rh * vh * vh - 0.5 * rho * v * v) -
                                   0.5 * v * v * (rh - rho) - rho * v * (vh - v);
            part += potential + kinetic;
        }
        sum += part * u.dx();
    }
    return sum;
}

double l2_error_sq(const FieldState& obs, const FieldState& truth) {
    require_same_grid(obs, truth, "l2_error_sq");
    double sum = 0.0;
    for (std::size_t k = 0; k < obs.edges.size(); ++k) {
        const auto& o = obs.edges[k];
        const auto& u = truth.edges[k];
        double part = 0.0;
        for (int j = 0; j < u.cells(); ++j) {
            const double a = o.rho[j] - u.rho[j], b = o.v[j] - u.v[j];
            part += a * a + b * b;
        }
        sum += part * u.dx();
    }
    return sum;
}

double total_mass(const FieldState& s) {
    double sum = 0.0;
    for (const auto& e : s.edges) {
        double part = 0.0;
        for (double r : e.rho) part += r;
        sum += part * e.dx();
    }
    return sum;
}

double mass_difference(const FieldState& obs, const FieldState& truth) {
    require_same_grid(obs, truth, "mass_difference");
    double sum = 0.0;
    for (std::size_t k = 0; k < obs.edges.size(); ++k) {
        double part = 0.0;
        for (int j = 0; j < obs.edges[k].cells(); ++j)
            part += truth.edges[k].rho[j] - obs.edges[k].rho[j];
        sum += part * obs.edges[k].dx();
    }
    return sum;
}

NormEquivalence norm_equiv_constants(const BoundConstants& b) {
    if (!b.subsonic)
        throw DomainError(fmt::format("subsonic-window failure: min rho P'' = {} < 4 v_bar^2 = {}",
                                      b.min_rho_d2P, 4.0 * b.v_bar * b.v_bar));
    auto form = [&](double C, double R, double sign) {
        return 0.5 * (0.5 * (C + R) + sign * std::sqrt(0.25 * (C - R) * (C - R) + b.v_bar * b.v_bar));
    };
    NormEquivalence out;
    out.c0 = form(b.d2P_lo, b.rho_lo, -1.0);
    out.C0 = form(b.d2P_hi, b.rho_hi, +1.0);
    if (!(out.c0 > 0.0))
        throw DomainError(fmt::format("subsonic-window failure: c0 = {} is not positive", out.c0));
    return out;
}

DeltaChoice select_delta(const BoundConstants& b, double c0, double mu, double gamma,
                         double ell_max) {
    DeltaChoice d;
    d.poincare_cap = c0 / (kPoincare * ell_max);
    const double cl = kPoincare * ell_max;
    const double denom =
        2.0 * b.rho_hi + cl * cl * mu * mu / b.d2P_lo + cl * cl * gamma * gamma * b.rho_lo;
    d.decay_cap = 0.25 * mu * b.rho_lo / denom;
    d.delta = std::min(d.poincare_cap, d.decay_cap);
    return d;
}

Functional functional_for(Mode mode) {
    switch (mode) {
    case Mode::velocity:
    case Mode::massflow: return Functional::f1;
    case Mode::density: return Functional::f2;
    case Mode::none: break;
    }
    return Functional::none;
}

// ---------------------------------------------------------------------------
// AntiderivativeTracker

AntiderivativeTracker::AntiderivativeTracker(const Scenario& sc, const FieldState& truth0,
                                             const FieldState& obs0, Functional kind)
    : sc_(&sc), kind_(kind) {
    require_same_grid(obs0, truth0, "AntiderivativeTracker");
    const auto& topo = sc.topology;
    const auto ne = topo.edges().size();
    const FieldState* st[2] = {&truth0, &obs0};
    auto zeros = [&]() {
        std::vector<std::vector<double>> z(ne);
        for (std::size_t e = 0; e < ne; ++e) z[e].assign(truth0.edges[e].cells(), 0.0);
        return z;
    };
    if (kind_ == Functional::f1) {
        auto has_m = [&](int node) {
            const auto* bc = sc.boundary_at(node);
            return bc && bc->quantity == Quantity::m;
        };
        anchor_at_end_.resize(ne);
        for (std::size_t e = 0; e < ne; ++e) {
            const auto& edge = topo.edges()[e];
            if (has_m(edge.from)) anchor_at_end_[e] = 0;
            else if (has_m(edge.to)) anchor_at_end_[e] = 1;
            else
                throw ConfigError(fmt::format(
                    "F1 needs a mass-flow boundary condition at an end of edge '{}'", edge.id));
        }
        for (int k = 0; k < 2; ++k) {
            im_[k] = zeros();
            a_[k] = zeros();
            for (std::size_t e = 0; e < ne; ++e) {
                const auto& f = st[k]->edges[e];
                const double dx = f.dx();
                const int n = f.cells();
                if (anchor_at_end_[e] == 0) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) {
                        a_[k][e][j] = acc + 0.5 * f.rho[j] * dx;
                        acc += f.rho[j] * dx;
                    }
                } else {
                    double acc = 0.0;
                    for (int j = n - 1; j >= 0; --j) {
                        a_[k][e][j] = -(acc + 0.5 * f.rho[j] * dx);
                        acc += f.rho[j] * dx;
                    }
                }
            }
        }
    } else if (kind_ == Functional::f2) {
        int root = -1;
        for (const auto& bc : sc.boundary)
            if (bc.quantity == Quantity::h) {
                if (root >= 0)
                    throw ConfigError("F2 needs exactly one enthalpy-anchored boundary node");
                root = bc.node;
            }
        if (root < 0) throw ConfigError("F2 needs an enthalpy-anchored boundary node");
        if (!topo.is_tree()) throw ConfigError("F2 path anchoring requires a tree network");
        root_ = root;
        std::vector<char> seen_edge(ne, 0), seen_node(topo.nodes().size(), 0);
        std::queue<int> q;
        q.push(root);
        seen_node[root] = 1;
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            for (const auto& inc : topo.incident(v)) {
                if (seen_edge[inc.edge]) continue;
                seen_edge[inc.edge] = 1;
                const auto& edge = topo.edges()[inc.edge];
                order_.push_back({inc.edge, inc.sign > 0, v});
                const int w = inc.sign > 0 ? edge.from : edge.to;
                if (!seen_node[w]) {
                    seen_node[w] = 1;
                    q.push(w);
                }
            }
        }
        for (int k = 0; k < 2; ++k) {
            ih_[k] = zeros();
            q_[k] = zeros();
            v0_[k].resize(ne);
            for (std::size_t e = 0; e < ne; ++e) v0_[k][e] = st[k]->edges[e].v;
        }
    }
}

void AntiderivativeTracker::advance(const FieldState& truth, const FieldState& obs, double dt) {
    const FieldState* st[2] = {&truth, &obs};
    const double gamma = sc_->gamma;
    for (int k = 0; k < 2; ++k) {
        for (std::size_t e = 0; e < st[k]->edges.size(); ++e) {
            const auto& f = st[k]->edges[e];
            for (int j = 0; j < f.cells(); ++j) {
                const double rho = f.rho[j], v = f.v[j];
                if (kind_ == Functional::f1) im_[k][e][j] += dt * rho * v;
                if (kind_ == Functional::f2) {
                    ih_[k][e][j] += dt * (0.5 * v * v + sc_->law.dP(rho));
                    q_[k][e][j] += dt * gamma * std::abs(v) * v;
                }
            }
        }
    }
    t_ += dt;
}

std::vector<std::vector<double>> AntiderivativeTracker::M(bool observer) const {
    if (kind_ != Functional::f1) throw Error("tracker does not hold M");
    const int k = observer ? 1 : 0;
    auto out = im_[k];
    for (std::size_t e = 0; e < out.size(); ++e)
        for (std::size_t j = 0; j < out[e].size(); ++j) out[e][j] -= a_[k][e][j];
    return out;
}

std::vector<std::vector<double>> AntiderivativeTracker::path_integral(bool observer) const {
    const int k = observer ? 1 : 0;
    const auto& topo = sc_->topology;
    std::vector<double> at_node(topo.nodes().size(), 0.0);
    std::vector<std::vector<double>> phi(topo.edges().size());
    for (const auto& pe : order_) {
        const auto& w0 = v0_[k][pe.edge];
        const auto& qe = q_[k][pe.edge];
        const int n = static_cast<int>(w0.size());
        const double dx = topo.edges()[pe.edge].length / n;
        auto& out = phi[pe.edge];
        out.resize(n);
        const double entry = at_node[pe.entry_node];
        double acc = 0.0;
        if (!pe.entry_at_end) {
            for (int j = 0; j < n; ++j) {
                const double w = w0[j] - qe[j];
                out[j] = entry + acc + 0.5 * w * dx;
                acc += w * dx;
            }
            at_node[topo.edges()[pe.edge].to] = entry + acc;
        } else {
            for (int j = n - 1; j >= 0; --j) {
                const double w = w0[j] - qe[j];
                out[j] = entry - (acc + 0.5 * w * dx);
                acc += w * dx;
            }
            at_node[topo.edges()[pe.edge].from] = entry - acc;
        }
    }
    return phi;
}

std::vector<std::vector<double>> AntiderivativeTracker::N(bool observer) const {
    if (kind_ != Functional::f2) throw Error("tracker does not hold N");
    const int k = observer ? 1 : 0;
    auto out = ih_[k];
    const auto phi = path_integral(observer);
    for (std::size_t e = 0; e < out.size(); ++e)
        for (std::size_t j = 0; j < out[e].size(); ++j) out[e][j] -= phi[e][j];
    return out;
}

double AntiderivativeTracker::anchor_difference() const {
    auto extrapolate = [](const std::vector<double>& d, bool at_end) {
        const std::size_t n = d.size();
        const double d0 = at_end ? d[n - 1] : d[0];
        const double d1 = at_end ? d[n - 2] : d[1];
        return 1.5 * d0 - 0.5 * d1;
    };
    double worst = 0.0;
    if (kind_ == Functional::f1) {
        const auto mt = M(false), mo = M(true);
        for (std::size_t e = 0; e < mt.size(); ++e) {
            std::vector<double> d(mt[e].size());
            for (std::size_t j = 0; j < d.size(); ++j) d[j] = mt[e][j] - mo[e][j];
            worst = std::max(worst, std::abs(extrapolate(d, anchor_at_end_[e] == 1)));
        }
    } else if (kind_ == Functional::f2) {
        const auto nt = N(false), no = N(true);
        for (const auto& inc : sc_->topology.incident(root_)) {
            const auto& a = nt[inc.edge];
            std::vector<double> d(a.size());
            for (std::size_t j = 0; j < d.size(); ++j) d[j] = a[j] - no[inc.edge][j];
            worst = std::max(worst, std::abs(extrapolate(d, inc.sign > 0)));
        }
    }
    return worst;
}

namespace {

void check_sync(const AntiderivativeTracker& tr, const FieldState& obs, const FieldState& truth) {
    const double tol = 1e-9 * std::max(1.0, std::abs(tr.time()));
    if (std::abs(tr.time() - obs.t) > tol || std::abs(tr.time() - truth.t) > tol)
        throw Error(fmt::format("time desynchronization: tracker at {}, states at {} / {}",
                                tr.time(), truth.t, obs.t));
    require_same_grid(obs, truth, "functional");
}

}  // namespace

double f1(const AntiderivativeTracker& tr, const FieldState& obs, const FieldState& truth) {
    check_sync(tr, obs, truth);
    const auto mt = tr.M(false), mo = tr.M(true);
    double sum = 0.0;
    for (std::size_t e = 0; e < truth.edges.size(); ++e) {
        const auto& u = truth.edges[e];
        const auto& o = obs.edges[e];
        double part = 0.0;
        for (int j = 0; j < u.cells(); ++j) part += (mt[e][j] - mo[e][j]) * (u.v[j] - o.v[j]);
        sum += part * u.dx();
    }
    return sum;
}

double f2(const AntiderivativeTracker& tr, const FieldState& obs, const FieldState& truth) {
    check_sync(tr, obs, truth);
    const auto nt = tr.N(false), no = tr.N(true);
    double sum = 0.0;
    for (std::size_t e = 0; e < truth.edges.size(); ++e) {
        const auto& u = truth.edges[e];
        const auto& o = obs.edges[e];
        double part = 0.0;
        for (int j = 0; j < u.cells(); ++j)
            part += (nt[e][j] - no[e][j]) * (u.rho[j] - o.rho[j]);
        sum += part * u.dx();
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Decay fitting

std::string to_string(DecayStatus s) {
    switch (s) {
    case DecayStatus::decaying: return "decaying";
    case DecayStatus::non_decaying: return "non_decaying";
    case DecayStatus::synchronized: return "already_synchronized";
    }
    return "non_decaying";
}

namespace {

struct Line {
    double slope = 0.0, intercept = 0.0, rms = 0.0;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo,
                   std::size_t hi) {
    const double n = static_cast<double>(hi - lo);
    double sx = 0, sy = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    Line l;
    l.slope = sxx > 0 ? sxy / sxx : 0.0;
    l.intercept = my - l.slope * mx;
    double ss = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double r = y[i] - (l.intercept + l.slope * x[i]);
        ss += r * r;
    }
    l.rms = std::sqrt(ss / n);
    return l;
}

}  // namespace

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& err,
                   const FitWindow& w) {
    if (t.size() != err.size()) throw Error("fit_decay: size mismatch");
    const std::size_t n = t.size();
    const auto lo = static_cast<std::size_t>(std::floor(w.skip_head * static_cast<double>(n)));
    const auto cut = static_cast<std::size_t>(std::floor(w.skip_tail * static_cast<double>(n)));
    const std::size_t hi = n > cut ? n - cut : 0;
    if (hi <= lo || hi - lo < 10)
        throw Error(fmt::format("fit_decay: degenerate window ({} samples, need >= 10)",
                                hi > lo ? hi - lo : 0));
    DecayFit fit;
    fit.t0 = t[lo];
    fit.t1 = t[hi - 1];
    const bool all_zero = std::all_of(err.begin() + static_cast<std::ptrdiff_t>(lo),
                                      err.begin() + static_cast<std::ptrdiff_t>(hi),
                                      [](double e) { return std::abs(e) <= kErrorFloor; });
    if (all_zero) {
        fit.status = DecayStatus::synchronized;
        fit.used = static_cast<int>(hi - lo);
        return fit;
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::log(std::max(std::abs(err[i]), kErrorFloor));

    // Plateau detection from the head and tail thirds of the window.
    const std::size_t third = (hi - lo) / 3;
    std::size_t fit_hi = hi;
    if (third >= 3) {
        const Line head = least_squares(t, y, lo, lo + third);
        const Line tail = least_squares(t, y, hi - third, hi);
        if (head.slope < 0.0 && std::abs(tail.slope) < 0.1 * std::abs(head.slope)) {
            std::vector<double> tail_err(err.begin() + static_cast<std::ptrdiff_t>(hi - third),
                                         err.begin() + static_cast<std::ptrdiff_t>(hi));
            std::nth_element(tail_err.begin(), tail_err.begin() + tail_err.size() / 2,
                             tail_err.end());
            fit.plateau = true;
            fit.plateau_level = std::abs(tail_err[tail_err.size() / 2]);
            for (double factor : {100.0, 10.0}) {
                std::size_t k = lo;
                while (k < hi && std::abs(err[k]) > factor * fit.plateau_level) ++k;
                fit_hi = k;
                if (fit_hi - lo >= 10) break;
            }
            if (fit_hi - lo < 10) fit_hi = lo + 10;
        }
    }
    const Line line = least_squares(t, y, lo, fit_hi);
    fit.c2 = -line.slope;
    fit.residual = line.rms;
    fit.t1 = t[fit_hi - 1];
    fit.used = static_cast<int>(fit_hi - lo);
    const double e0 = std::max(std::abs(err[0]), kErrorFloor);
    fit.c1 = std::exp(line.intercept) / e0;
    const double drop = fit.c2 * (fit.t1 - fit.t0);
    fit.status = (fit.c2 > 0.0 && drop > 1e-6) ? DecayStatus::decaying : DecayStatus::non_decaying;
    return fit;
}

DecayFit fit_decay(const DiagnosticsSeries& series, const FitWindow& w) {
    std::vector<double> t, e;
    t.reserve(series.samples.size());
    e.reserve(series.samples.size());
    for (const auto& s : series.samples) {
        t.push_back(s.t);
        e.push_back(std::sqrt(std::max(s.l2_err_sq, 0.0)));
    }
    return fit_decay(t, e, w);
}

// ---------------------------------------------------------------------------
// Audit

bool AuditReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

AuditReport audit_assumptions(const DiagnosticsSeries& series, const BoundConstants& b,
                              double ct_max) {
    AuditReport rep;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    AssumptionCheck band{"density_band", true, 1e300, nan};
    AssumptionCheck subsonic{"subsonic", true, b.min_rho_d2P - 4.0 * b.v_bar * b.v_bar, nan};
    AssumptionCheck vel{"velocity_bound", true, 1e300, nan};
    AssumptionCheck rate{"time_derivative_bound", true, 1e300, nan};
    subsonic.pass = subsonic.margin >= 0.0;
    for (const auto& s : series.samples) {
        const double mb = std::min(s.rho_min - b.rho_lo, b.rho_hi - s.rho_max);
        band.margin = std::min(band.margin, mb);
        if (mb < 0.0 && band.pass) {
            band.pass = false;
            band.first_failure = s.t;
        }
        const double mv = b.v_bar - s.max_v;
        vel.margin = std::min(vel.margin, mv);
        if (mv < 0.0 && vel.pass) {
            vel.pass = false;
            vel.first_failure = s.t;
        }
        const double mr = ct_max - s.dt_rate;
        rate.margin = std::min(rate.margin, mr);
        if (mr < 0.0 && rate.pass) {
            rate.pass = false;
            rate.first_failure = s.t;
        }
    }
    rep.checks = {band, subsonic, vel, rate};
    return rep;
}

}  // namespace pipeobs
