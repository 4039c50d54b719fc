#include "pipeobs/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <queue>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

namespace pipeobs {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// NetworkTopology

NetworkTopology::NetworkTopology(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    if (nodes_.empty()) throw ConfigError("topology has no nodes");
    if (edges_.empty()) throw ConfigError("topology has no edges");
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        for (std::size_t j = i + 1; j < nodes_.size(); ++j)
            if (nodes_[i].id == nodes_[j].id)
                throw ConfigError(fmt::format("duplicate node id '{}'", nodes_[i].id));
    incidence_.assign(nodes_.size(), {});
    const int n = static_cast<int>(nodes_.size());
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        const Edge& e = edges_[k];
        for (std::size_t j = k + 1; j < edges_.size(); ++j)
            if (edges_[j].id == e.id)
                throw ConfigError(fmt::format("duplicate edge id '{}'", e.id));
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw ConfigError(fmt::format("edge '{}' references an undeclared node", e.id));
        if (e.from == e.to) throw ConfigError(fmt::format("edge '{}' is a self loop", e.id));
        if (!(e.length > 0.0) || !std::isfinite(e.length))
            throw ConfigError(fmt::format("edge '{}' has nonpositive length", e.id));
        if (e.cells < 0) throw ConfigError(fmt::format("edge '{}' has negative cells", e.id));
        incidence_[e.from].push_back({static_cast<int>(k), -1});
        incidence_[e.to].push_back({static_cast<int>(k), +1});
    }
    for (int v = 0; v < n; ++v) {
        const auto deg = incidence_[v].size();
        if (nodes_[v].kind == NodeKind::boundary && deg != 1)
            throw ConfigError(fmt::format("boundary node '{}' must have degree 1", nodes_[v].id));
        if (nodes_[v].kind == NodeKind::inner && deg < 2)
            throw ConfigError(fmt::format("inner node '{}' must have degree >= 2", nodes_[v].id));
    }
    std::vector<char> seen(nodes_.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        for (const auto& inc : incidence_[v]) {
            const Edge& e = edges_[inc.edge];
            int w = inc.sign < 0 ? e.to : e.from;
            if (!seen[w]) {
                seen[w] = 1;
                q.push(w);
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw ConfigError("topology is not connected");
}

NetworkTopology NetworkTopology::single_pipe(double length) {
    return NetworkTopology({{"in", NodeKind::boundary}, {"out", NodeKind::boundary}},
                           {{"pipe", 0, 1, length, 0}});
}

int NetworkTopology::node_index(std::string_view id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == id) return static_cast<int>(i);
    throw ConfigError(fmt::format("unknown node '{}'", id));
}

int NetworkTopology::edge_index(std::string_view id) const {
    for (std::size_t i = 0; i < edges_.size(); ++i)
        if (edges_[i].id == id) return static_cast<int>(i);
    throw ConfigError(fmt::format("unknown edge '{}'", id));
}

int NetworkTopology::sign(int edge, int node) const {
    if (edges_[edge].from == node) return -1;
    if (edges_[edge].to == node) return +1;
    throw Error(fmt::format("edge '{}' is not incident to node '{}'", edges_[edge].id,
                            nodes_[node].id));
}

int NetworkTopology::star_center() const {
    int center = -1;
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
        if (nodes_[v].kind != NodeKind::inner) continue;
        if (center >= 0) return -1;
        center = static_cast<int>(v);
    }
    if (center < 0) return -1;
    if (incidence_[center].size() != edges_.size()) return -1;
    return center;
}

bool NetworkTopology::is_star() const { return star_center() >= 0; }

double NetworkTopology::max_length() const {
    double m = 0.0;
    for (const auto& e : edges_) m = std::max(m, e.length);
    return m;
}

double NetworkTopology::total_length() const {
    double s = 0.0;
    for (const auto& e : edges_) s += e.length;
    return s;
}

// ---------------------------------------------------------------------------
// PressureLaw

PressureLaw PressureLaw::isothermal(double a, double rho_ref) {
    if (!(a > 0.0) || !(rho_ref > 0.0))
        throw ConfigError("isothermal law needs c > 0 and rho_ref > 0");
    PressureLaw law;
    law.kind_ = LawKind::isothermal;
    law.a_ = a;
    law.rho_ref_ = rho_ref;
    law.c_ = a;
    law.band_lo_ = 0.5 * rho_ref;
    law.band_hi_ = 2.0 * rho_ref;
    return law;
}

PressureLaw PressureLaw::power(double kappa, double alpha, double rho_ref) {
    if (!(kappa > 0.0) || !(alpha > 1.0) || !(rho_ref > 0.0))
        throw ConfigError("power law needs kappa > 0, alpha > 1 and rho_ref > 0");
    PressureLaw law;
    law.kind_ = LawKind::power;
    law.kappa_ = kappa;
    law.alpha_ = alpha;
    law.rho_ref_ = rho_ref;
    law.c_ = std::sqrt(kappa * alpha * std::pow(rho_ref, alpha - 1.0));
    law.band_lo_ = 0.5 * rho_ref;
    law.band_hi_ = 2.0 * rho_ref;
    return law;
}

PressureLaw PressureLaw::with_band(double rho_lo, double rho_hi) const {
    if (!(rho_lo > 0.0) || !(rho_lo < rho_hi))
        throw ConfigError("density band must satisfy 0 < rho_lo < rho_hi");
    PressureLaw law = *this;
    law.band_lo_ = rho_lo;
    law.band_hi_ = rho_hi;
    return law;
}

PressureLaw PressureLaw::with_inversion_margin(double margin) const {
    if (!(margin >= 0.0)) throw ConfigError("inversion margin must be nonnegative");
    PressureLaw law = *this;
    law.margin_ = margin;
    return law;
}

void PressureLaw::check_rho(double rho) const {
    if (!(rho > 0.0)) throw DomainError(fmt::format("density not positive: {}", rho));
}

double PressureLaw::p(double rho) const {
    check_rho(rho);
    return kind_ == LawKind::isothermal ? a_ * a_ * rho : kappa_ * std::pow(rho, alpha_);
}

double PressureLaw::dp(double rho) const {
    check_rho(rho);
    return kind_ == LawKind::isothermal ? a_ * a_
                                        : kappa_ * alpha_ * std::pow(rho, alpha_ - 1.0);
}

double PressureLaw::d2p(double rho) const {
    check_rho(rho);
    return kind_ == LawKind::isothermal
               ? 0.0
               : kappa_ * alpha_ * (alpha_ - 1.0) * std::pow(rho, alpha_ - 2.0);
}

double PressureLaw::P(double rho) const {
    check_rho(rho);
    if (kind_ == LawKind::isothermal) return a_ * a_ * rho * std::log(rho / rho_ref_);
    return kappa_ / (alpha_ - 1.0) * (std::pow(rho, alpha_) - std::pow(rho_ref_, alpha_));
}

double PressureLaw::dP(double rho) const {
    check_rho(rho);
    if (kind_ == LawKind::isothermal) return a_ * a_ * (1.0 + std::log(rho / rho_ref_));
    return kappa_ * alpha_ / (alpha_ - 1.0) * std::pow(rho, alpha_ - 1.0);
}

double PressureLaw::d2P(double rho) const {
    check_rho(rho);
    if (kind_ == LawKind::isothermal) return a_ * a_ / rho;
    return kappa_ * alpha_ * std::pow(rho, alpha_ - 2.0);
}

double PressureLaw::d3P(double rho) const {
    check_rho(rho);
    if (kind_ == LawKind::isothermal) return -a_ * a_ / (rho * rho);
    return kappa_ * alpha_ * (alpha_ - 2.0) * std::pow(rho, alpha_ - 3.0);
}

double PressureLaw::ptilde(double rho) const {
    check_rho(rho);
    if (kind_ == LawKind::isothermal) return std::log(rho / rho_ref_);
    const double e = 0.5 * (alpha_ - 1.0);
    return (std::pow(rho / rho_ref_, e) - 1.0) / e;
}

double PressureLaw::dptilde(double rho) const { return std::sqrt(dp(rho)) / (c_ * rho); }

std::pair<double, double> PressureLaw::inversion_window() const {
    return {ptilde(band_lo_) - margin_, ptilde(band_hi_) + margin_};
}

double PressureLaw::ptilde_inv(double y) const {
    const auto [lo, hi] = inversion_window();
    if (!std::isfinite(y) || y < lo || y > hi)
        throw OutOfBandError(
            fmt::format("Ptilde inversion out of band: y = {} outside [{}, {}]", y, lo, hi));
    double rho;
    if (kind_ == LawKind::isothermal) {
        rho = rho_ref_ * std::exp(y);
    } else {
        const double e = 0.5 * (alpha_ - 1.0);
        const double base = 1.0 + e * y;
        if (!(base > 0.0))
            throw OutOfBandError(fmt::format("Ptilde inversion reaches vacuum at y = {}", y));
        rho = rho_ref_ * std::pow(base, 1.0 / e);
    }
    // Newton polish; the closed forms are already accurate, this guards the tolerance.
    double r = ptilde(rho) - y;
    if (std::abs(r) > 0.25 * kInversionTol) {
        rho -= r / dptilde(rho);
        r = ptilde(rho) - y;
    }
    if (!(rho > 0.0) || std::abs(r) > kInversionTol) return ptilde_inv_bisection(*this, y);
    return rho;
}

double PressureLaw::dptilde_inv(double y) const { return 1.0 / dptilde(ptilde_inv(y)); }

LawValues law_bundle(const PressureLaw& law, double rho) {
    return {law.p(rho), law.dp(rho), law.P(rho), law.dP(rho), law.d2P(rho), law.ptilde(rho)};
}

double ptilde_inv(const PressureLaw& law, double y) { return law.ptilde_inv(y); }

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double ptilde_quadrature(const PressureLaw& law, double rho, double tol) {
    if (!(rho > 0.0)) throw DomainError(fmt::format("density not positive: {}", rho));
    const double a = law.rho_ref(), b = rho;
    if (a == b) return 0.0;
    auto f = [&](double s) { return std::sqrt(law.dp(s)) / (law.c() * s); };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, b, fa, fm, fb, whole, tol, 50);
}

double ptilde_inv_bisection(const PressureLaw& law, double y, double tol) {
    const auto [ylo, yhi] = law.inversion_window();
    if (!std::isfinite(y) || y < ylo || y > yhi)
        throw OutOfBandError(
            fmt::format("Ptilde inversion out of band: y = {} outside [{}, {}]", y, ylo, yhi));
    double lo = law.band_lo(), hi = law.band_hi();
    for (int k = 0; k < 200 && law.ptilde(lo) > y; ++k) lo *= 0.5;
    for (int k = 0; k < 200 && law.ptilde(hi) < y; ++k) hi *= 2.0;
    if (law.ptilde(lo) > y || law.ptilde(hi) < y)
        throw OutOfBandError(fmt::format("Ptilde inversion cannot bracket y = {}", y));
    for (int k = 0; k < 200 && hi - lo > 1e-9 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (law.ptilde(mid) < y ? lo : hi) = mid;
    }
    double rho = 0.5 * (lo + hi);
    for (int k = 0; k < 8; ++k) {
        const double r = law.ptilde(rho) - y;
        if (std::abs(r) <= 0.1 * tol) break;
        rho -= r / law.dptilde(rho);
    }
    if (std::abs(law.ptilde(rho) - y) > tol)
        throw SolverError(fmt::format("Ptilde inversion did not reach tolerance at y = {}", y));
    return rho;
}

// ---------------------------------------------------------------------------
// BoundConstants

BoundConstants bound_constants(const PressureLaw& law, double rho_lo, double rho_hi,
                               double v_bar) {
    if (!(rho_lo > 0.0) || !(rho_lo < rho_hi))
        throw DomainError("bound constants need 0 < rho_lo < rho_hi");
    BoundConstants b;
    b.rho_lo = rho_lo;
    b.rho_hi = rho_hi;
    b.v_bar = v_bar;
    // Every quantity below is a power of rho per law kind, hence monotone:
    // extrema sit at the band ends.
    auto ext = [&](auto f, double& lo, double& hi) {
        const double f1 = f(rho_lo), f2 = f(rho_hi);
        lo = std::min(f1, f2);
        hi = std::max(f1, f2);
    };
    ext([&](double r) { return law.dp(r); }, b.dp_lo, b.dp_hi);
    ext([&](double r) { return law.d2P(r); }, b.d2P_lo, b.d2P_hi);
    b.d3P_max = std::max(std::abs(law.d3P(rho_lo)), std::abs(law.d3P(rho_hi)));
    b.d2p_max = std::max(std::abs(law.d2p(rho_lo)), std::abs(law.d2p(rho_hi)));
    b.min_rho_d2P = b.dp_lo;
    b.subsonic = b.min_rho_d2P >= 4.0 * v_bar * v_bar;
    return b;
}

// ---------------------------------------------------------------------------
// Profiles and schedules

double Profile::operator()(double x, double length) const {
    const double xi = std::clamp(x / length, 0.0, 1.0);
    double sum = 0.0;
    for (const auto& t : terms) {
        switch (t.kind) {
        case Kind::constant:
            sum += t.a[0];
            break;
        case Kind::linear:
            sum += t.a[0] + (t.a[1] - t.a[0]) * xi;
            break;
        case Kind::samples: {
            const auto n = t.a.size();
            if (n == 1) {
                sum += t.a[0];
                break;
            }
            const double s = xi * static_cast<double>(n - 1);
            const auto k = std::min<std::size_t>(static_cast<std::size_t>(s), n - 2);
            const double w = s - static_cast<double>(k);
            sum += (1.0 - w) * t.a[k] + w * t.a[k + 1];
            break;
        }
        case Kind::bump: {
            const double z = (xi - t.a[0]) / t.a[1];
            if (std::abs(z) < 0.5) {
                const double cz = std::cos(std::numbers::pi * z);
                sum += t.a[2] * cz * cz;
            }
            break;
        }
        case Kind::sine:
            sum += t.a[0] * std::sin(t.a[1] * std::numbers::pi * xi);
            break;
        }
    }
    return sum;
}

Profile Profile::constant(double value) { return {{{Kind::constant, {value}}}}; }
Profile Profile::linear(double a, double b) { return {{{Kind::linear, {a, b}}}}; }
Profile Profile::samples(std::vector<double> values) {
    if (values.empty()) throw ConfigError("samples profile is empty");
    return {{{Kind::samples, std::move(values)}}};
}
Profile Profile::bump(double center, double width, double amplitude) {
    if (!(width > 0.0)) throw ConfigError("bump width must be positive");
    return {{{Kind::bump, {center, width, amplitude}}}};
}
Profile Profile::sine(double amplitude, double modes) {
    return {{{Kind::sine, {amplitude, modes}}}};
}
Profile& Profile::operator+=(const Profile& other) {
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    return *this;
}

Profile Profile::scaled(double factor) const {
    Profile out = *this;
    for (auto& term : out.terms) {
        switch (term.kind) {
        case Kind::constant:
        case Kind::linear:
        case Kind::samples:
            for (double& a : term.a) a *= factor;
            break;
        case Kind::bump: term.a[2] *= factor; break;
        case Kind::sine: term.a[0] *= factor; break;
        }
    }
    return out;
}

Schedule Schedule::constant(double value) {
    Schedule s;
    s.points_ = {{0.0, value}};
    return s;
}

Schedule Schedule::piecewise_linear(std::vector<std::pair<double, double>> points) {
    if (points.empty()) throw ConfigError("piecewise-linear schedule is empty");
    for (std::size_t k = 1; k < points.size(); ++k)
        if (!(points[k].first > points[k - 1].first))
            throw ConfigError("schedule times must be strictly increasing");
    Schedule s;
    s.points_ = std::move(points);
    return s;
}

double Schedule::operator()(double t) const {
    if (t <= points_.front().first) return points_.front().second;
    if (t >= points_.back().first) return points_.back().second;
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double tt, const auto& p) { return tt < p.first; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double w = (t - a.first) / (b.first - a.first);
    return (1.0 - w) * a.second + w * b.second;
}

double Schedule::max_slope() const {
    double s = 0.0;
    for (std::size_t k = 1; k < points_.size(); ++k)
        s = std::max(s, std::abs((points_[k].second - points_[k - 1].second) /
                                 (points_[k].first - points_[k - 1].first)));
    return s;
}

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::none: return "none";
    case Mode::velocity: return "velocity";
    case Mode::density: return "density";
    case Mode::massflow: return "massflow";
    }
    return "none";
}

Mode parse_mode(std::string_view text) {
    if (text == "none") return Mode::none;
    if (text == "velocity") return Mode::velocity;
    if (text == "density") return Mode::density;
    if (text == "massflow") return Mode::massflow;
    throw ConfigError(fmt::format("unknown measurement mode '{}'", text));
}

// ---------------------------------------------------------------------------
// Scenario

const BoundarySpec* Scenario::boundary_at(int node) const {
    for (const auto& b : boundary)
        if (b.node == node) return &b;
    return nullptr;
}

int Scenario::cells_on(int edge) const {
    const int n = topology.edges()[edge].cells;
    return n > 0 ? n : cells;
}

BoundConstants Scenario::bounds() const {
    return bound_constants(law, law.band_lo(), law.band_hi(), v_bar);
}

std::pair<double, double> initial_point(const Scenario& sc, int edge, double x, bool observer) {
    const double len = sc.topology.edges()[edge].length;
    const EdgeInitial& spec = observer ? sc.observer_initial[edge] : sc.initial[edge];
    double rho, v;
    if (spec.riemann) {
        const double sp = spec.first(x, len), sm = spec.second(x, len);
        rho = sc.law.ptilde_inv(0.5 * (sp + sm));
        v = 0.5 * sc.law.c() * (sp - sm);
    } else {
        rho = spec.first(x, len);
        v = spec.second(x, len);
    }
    if (observer && !sc.perturbation.empty()) {
        const auto& pert = sc.perturbation[edge];
        if (!pert.rho.empty()) rho += pert.rho(x, len);
        if (!pert.v.empty()) v += pert.v(x, len);
    }
    return {rho, v};
}

FieldState initial_field(const Scenario& sc, bool observer) {
    FieldState f;
    f.t = 0.0;
    const auto& edges = sc.topology.edges();
    f.edges.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        EdgeField& ef = f.edges[e];
        const int n = sc.cells_on(static_cast<int>(e));
        ef.length = edges[e].length;
        ef.rho.resize(n);
        ef.v.resize(n);
        for (int j = 0; j < n; ++j) {
            auto [r, v] = initial_point(sc, static_cast<int>(e), ef.x(j), observer);
            ef.rho[j] = r;
            ef.v[j] = v;
        }
    }
    return f;
}

bool same_grid(const FieldState& a, const FieldState& b) {
    if (a.edges.size() != b.edges.size()) return false;
    for (std::size_t e = 0; e < a.edges.size(); ++e)
        if (a.edges[e].cells() != b.edges[e].cells() || a.edges[e].length != b.edges[e].length)
            return false;
    return true;
}

namespace {

constexpr double kCompatTol = 1e-8;

void check_data(const Scenario& sc, bool observer) {
    const char* who = observer ? "observer initial" : "initial";
    const auto& edges = sc.topology.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const int n = 4 * sc.cells_on(static_cast<int>(e));
        for (int k = 0; k <= n; ++k) {
            const double x = edges[e].length * k / n;
            double rho, v;
            try {
                std::tie(rho, v) = initial_point(sc, static_cast<int>(e), x, observer);
            } catch (const OutOfBandError& ex) {
                throw ConfigError(fmt::format("{} data on edge '{}': {}", who, edges[e].id,
                                              ex.what()));
            }
            if (!std::isfinite(rho) || !std::isfinite(v))
                throw ConfigError(fmt::format("{} data on edge '{}' not finite", who, edges[e].id));
            if (!(rho > 0.0))
                throw ConfigError(fmt::format("density not positive ({} data on edge '{}' at x={})",
                                              who, edges[e].id, x));
            if (rho < sc.law.band_lo() || rho > sc.law.band_hi())
                throw ConfigError(fmt::format(
                    "{} density {} outside band [{}, {}] on edge '{}'", who, rho,
                    sc.law.band_lo(), sc.law.band_hi(), edges[e].id));
            if (!(std::abs(v) < std::sqrt(sc.law.dp(rho))))
                throw ConfigError(fmt::format("supersonic {} data on edge '{}' at x={}", who,
                                              edges[e].id, x));
        }
    }
    // C0-compatibility at nodes.
    const auto& nodes = sc.topology.nodes();
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        const auto& inc = sc.topology.incident(static_cast<int>(v));
        if (nodes[v].kind == NodeKind::boundary) {
            const BoundarySpec* bc = sc.boundary_at(static_cast<int>(v));
            const int e = inc[0].edge;
            const double x = inc[0].sign < 0 ? 0.0 : edges[e].length;
            auto [rho, vel] = initial_point(sc, e, x, observer);
            const double value = bc->quantity == Quantity::m
                                     ? rho * vel
                                     : 0.5 * vel * vel + sc.law.dP(rho);
            if (std::abs(value - bc->schedule(0.0)) > kCompatTol)
                throw ConfigError(fmt::format(
                    "{} data incompatible with boundary condition at node '{}' ({} = {} vs {})",
                    who, nodes[v].id, bc->quantity == Quantity::m ? "m" : "h", value,
                    bc->schedule(0.0)));
        } else {
            double flux = 0.0, hmin = 1e300, hmax = -1e300;
            for (const auto& i : inc) {
                const double x = i.sign < 0 ? 0.0 : edges[i.edge].length;
                auto [rho, vel] = initial_point(sc, i.edge, x, observer);
                flux += i.sign * rho * vel;
                const double h = 0.5 * vel * vel + sc.law.dP(rho);
                hmin = std::min(hmin, h);
                hmax = std::max(hmax, h);
            }
            if (std::abs(flux) > kCompatTol || hmax - hmin > kCompatTol)
                throw ConfigError(fmt::format(
                    "{} data incompatible with coupling conditions at node '{}'", who,
                    nodes[v].id));
        }
    }
}

}  // namespace

void validate_scenario(const Scenario& sc) {
    const std::size_t ne = sc.topology.edges().size();
    if (ne == 0) throw ConfigError("scenario has no edges");
    if (!(sc.gamma >= 0.0) || !std::isfinite(sc.gamma)) throw ConfigError("gamma must be >= 0");
    if (!(sc.mu >= 0.0) || !std::isfinite(sc.mu)) throw ConfigError("mu must be >= 0");
    if (!(sc.v_bar > 0.0)) throw ConfigError("v_bar must be positive");
    if (sc.cells < 2) throw ConfigError("grid cells must be >= 2");
    for (std::size_t e = 0; e < ne; ++e)
        if (sc.cells_on(static_cast<int>(e)) < 2) throw ConfigError("edge cells must be >= 2");
    if (!(sc.cfl > 0.0 && sc.cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
    if (!(sc.T > 0.0) || !std::isfinite(sc.T)) throw ConfigError("final time T must be positive");
    if (sc.samples < 1) throw ConfigError("samples must be >= 1");
    if (sc.initial.size() != ne || sc.observer_initial.size() != ne)
        throw ConfigError("initial data missing for some edge");
    if (!sc.perturbation.empty() && sc.perturbation.size() != ne)
        throw ConfigError("perturbation size mismatch");
    const auto& nodes = sc.topology.nodes();
    for (const auto& b : sc.boundary) {
        if (b.node < 0 || b.node >= static_cast<int>(nodes.size()))
            throw ConfigError("boundary condition references unknown node");
        if (nodes[b.node].kind != NodeKind::boundary)
            throw ConfigError(fmt::format("boundary condition on inner node '{}'",
                                          nodes[b.node].id));
    }
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (nodes[v].kind != NodeKind::boundary) continue;
        int count = 0;
        for (const auto& b : sc.boundary) count += b.node == static_cast<int>(v);
        if (count != 1)
            throw ConfigError(fmt::format("boundary node '{}' needs exactly one boundary condition",
                                          nodes[v].id));
    }
    const auto b = sc.bounds();
    if (!b.subsonic)
        throw ConfigError(fmt::format("subsonic condition fails on the band: min rho P'' = {} < "
                                      "4 v_bar^2 = {}",
                                      b.min_rho_d2P, 4.0 * sc.v_bar * sc.v_bar));
    check_data(sc, false);
    check_data(sc, true);
}

// ---------------------------------------------------------------------------
// JSON loading

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
    if (!obj.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(fmt::format("unknown key '{}' in '{}'", key, where));
    }
}

const json& require(const json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(fmt::format("missing key '{}' in '{}'", key, where));
    return *it;
}

double number(const json& v, std::string_view where) {
    if (!v.is_number()) throw ConfigError(fmt::format("'{}' must be a number", where));
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return number(*it, fmt::format("{}.{}", where, key));
}

int integer_or(const json& obj, const char* key, int fallback, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer())
        throw ConfigError(fmt::format("'{}.{}' must be an integer", where, key));
    return it->get<int>();
}

std::string string_of(const json& v, std::string_view where) {
    if (!v.is_string()) throw ConfigError(fmt::format("'{}' must be a string", where));
    return v.get<std::string>();
}

Profile parse_profile(const json& j, std::string_view where) {
    if (j.is_number()) return Profile::constant(j.get<double>());
    if (j.is_array()) {
        Profile sum;
        for (const auto& t : j) sum += parse_profile(t, where);
        if (sum.empty()) throw ConfigError(fmt::format("'{}' is an empty profile sum", where));
        return sum;
    }
    if (!j.is_object() || j.size() != 1)
        throw ConfigError(fmt::format("'{}' must be a profile (constant, linear, samples, bump, sine)",
                                      where));
    const auto& [kind, body] = *j.items().begin();
    const std::string w = fmt::format("{}.{}", where, kind);
    if (kind == "constant") return Profile::constant(number(body, w));
    if (kind == "linear") {
        if (!body.is_array() || body.size() != 2)
            throw ConfigError(fmt::format("'{}' needs [start, end]", w));
        return Profile::linear(number(body[0], w), number(body[1], w));
    }
    if (kind == "samples") {
        if (!body.is_array() || body.empty())
            throw ConfigError(fmt::format("'{}' needs a nonempty array", w));
        std::vector<double> values;
        for (const auto& x : body) values.push_back(number(x, w));
        return Profile::samples(std::move(values));
    }
    if (kind == "bump") {
        check_keys(body, {"center", "width", "amplitude"}, w);
        return Profile::bump(number(require(body, "center", w), w),
                             number(require(body, "width", w), w),
                             number(require(body, "amplitude", w), w));
    }
    if (kind == "sine") {
        check_keys(body, {"amplitude", "modes"}, w);
        return Profile::sine(number(require(body, "amplitude", w), w),
                             number_or(body, "modes", 1.0, w));
    }
    throw ConfigError(fmt::format("unknown profile kind '{}' in '{}'", kind, where));
}

EdgeInitial parse_edge_initial(const json& j, std::string_view where) {
    check_keys(j, {"rho", "v", "s_plus", "s_minus"}, where);
    EdgeInitial init;
    const bool phys = j.contains("rho") || j.contains("v");
    const bool ri = j.contains("s_plus") || j.contains("s_minus");
    if (phys == ri)
        throw ConfigError(fmt::format("'{}' needs either (rho, v) or (s_plus, s_minus)", where));
    init.riemann = ri;
    const char* k1 = ri ? "s_plus" : "rho";
    const char* k2 = ri ? "s_minus" : "v";
    init.first = parse_profile(require(j, k1, where), fmt::format("{}.{}", where, k1));
    init.second = parse_profile(require(j, k2, where), fmt::format("{}.{}", where, k2));
    return init;
}

// Per-edge table keyed by edge id; "*" supplies a default for unlisted edges.
template <class T, class F>
std::vector<T> per_edge(const json& j, const NetworkTopology& topo, std::string_view where,
                        F parse, bool required) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
    const auto ne = topo.edges().size();
    std::vector<T> out(ne);
    std::vector<char> have(ne, 0);
    for (const auto& [key, body] : j.items())
        if (key != "*") {
            const int e = topo.edge_index(key);
            out[e] = parse(body, fmt::format("{}.{}", where, key));
            have[e] = 1;
        }
    if (j.contains("*")) {
        T def = parse(j["*"], fmt::format("{}.*", where));
        for (std::size_t e = 0; e < ne; ++e)
            if (!have[e]) {
                out[e] = def;
                have[e] = 1;
            }
    }
    if (required)
        for (std::size_t e = 0; e < ne; ++e)
            if (!have[e])
                throw ConfigError(fmt::format("'{}' has no entry for edge '{}'", where,
                                              topo.edges()[e].id));
    return out;
}

Schedule parse_schedule(const json& j, std::string_view where) {
    if (j.is_number()) return Schedule::constant(j.get<double>());
    if (!j.is_object() || j.size() != 1)
        throw ConfigError(fmt::format("'{}' must be a schedule (constant or piecewise_linear)",
                                      where));
    const auto& [kind, body] = *j.items().begin();
    const std::string w = fmt::format("{}.{}", where, kind);
    if (kind == "constant") return Schedule::constant(number(body, w));
    if (kind == "piecewise_linear") {
        if (!body.is_array()) throw ConfigError(fmt::format("'{}' needs [[t, value], ...]", w));
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : body) {
            if (!p.is_array() || p.size() != 2)
                throw ConfigError(fmt::format("'{}' entries must be [t, value]", w));
            pts.emplace_back(number(p[0], w), number(p[1], w));
        }
        return Schedule::piecewise_linear(std::move(pts));
    }
    throw ConfigError(fmt::format("unknown schedule kind '{}' in '{}'", kind, where));
}

}  // namespace

Scenario load_scenario(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw ConfigError(ex.what());
    }
    check_keys(root,
               {"name", "topology", "law", "physics", "initial", "observer_initial",
                "perturbation", "boundary", "grid", "time", "picard"},
               "scenario");
    Scenario sc;
    sc.canonical_source = root.dump();
    if (root.contains("name")) sc.name = string_of(root["name"], "name");

    // topology
    const json& jt = require(root, "topology", "scenario");
    check_keys(jt, {"nodes", "edges"}, "topology");
    std::vector<Node> nodes;
    for (const auto& jn : require(jt, "nodes", "topology")) {
        check_keys(jn, {"id", "kind"}, "topology.nodes[]");
        Node n;
        n.id = string_of(require(jn, "id", "topology.nodes[]"), "topology.nodes[].id");
        const auto kind = string_of(require(jn, "kind", "topology.nodes[]"), "kind");
        if (kind == "boundary") n.kind = NodeKind::boundary;
        else if (kind == "inner") n.kind = NodeKind::inner;
        else throw ConfigError(fmt::format("node '{}' has unknown kind '{}'", n.id, kind));
        nodes.push_back(std::move(n));
    }
    auto node_id = [&](const std::string& id) {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].id == id) return static_cast<int>(i);
        throw ConfigError(fmt::format("edge endpoint '{}' is not a declared node", id));
    };
    std::vector<Edge> edges;
    for (const auto& je : require(jt, "edges", "topology")) {
        check_keys(je, {"id", "from", "to", "length", "cells"}, "topology.edges[]");
        Edge e;
        e.id = string_of(require(je, "id", "topology.edges[]"), "topology.edges[].id");
        e.from = node_id(string_of(require(je, "from", e.id), "from"));
        e.to = node_id(string_of(require(je, "to", e.id), "to"));
        e.length = number(require(je, "length", e.id), "length");
        e.cells = integer_or(je, "cells", 0, e.id);
        edges.push_back(std::move(e));
    }
    sc.topology = NetworkTopology(std::move(nodes), std::move(edges));

    // law
    const json& jl = require(root, "law", "scenario");
    check_keys(jl, {"kind", "params", "rho_ref", "band", "inversion_margin"}, "law");
    const auto kind = string_of(require(jl, "kind", "law"), "law.kind");
    const double rho_ref = number_or(jl, "rho_ref", 1.0, "law");
    const json params = jl.value("params", json::object());
    if (kind == "isothermal") {
        check_keys(params, {"c"}, "law.params");
        sc.law = PressureLaw::isothermal(number_or(params, "c", 1.0, "law.params"), rho_ref);
    } else if (kind == "power") {
        check_keys(params, {"kappa", "alpha"}, "law.params");
        sc.law = PressureLaw::power(number(require(params, "kappa", "law.params"), "kappa"),
                                    number(require(params, "alpha", "law.params"), "alpha"),
                                    rho_ref);
    } else {
        throw ConfigError(fmt::format("unknown pressure law kind '{}'", kind));
    }
    if (jl.contains("band")) {
        const json& b = jl["band"];
        if (!b.is_array() || b.size() != 2) throw ConfigError("'law.band' needs [rho_lo, rho_hi]");
        sc.law = sc.law.with_band(number(b[0], "law.band"), number(b[1], "law.band"));
    }
    if (jl.contains("inversion_margin"))
        sc.law = sc.law.with_inversion_margin(number(jl["inversion_margin"], "law.inversion_margin"));

    // physics
    const json& jp = require(root, "physics", "scenario");
    check_keys(jp, {"gamma", "mu", "mode", "v_bar"}, "physics");
    sc.gamma = number_or(jp, "gamma", 0.0, "physics");
    sc.mu = number_or(jp, "mu", 0.0, "physics");
    sc.mode = jp.contains("mode") ? parse_mode(string_of(jp["mode"], "physics.mode")) : Mode::none;
    sc.v_bar = number_or(jp, "v_bar", 0.1 * sc.law.c(), "physics");

    // data
    sc.initial = per_edge<EdgeInitial>(require(root, "initial", "scenario"), sc.topology,
                                       "initial", parse_edge_initial, true);
    sc.observer_initial =
        root.contains("observer_initial")
            ? per_edge<EdgeInitial>(root["observer_initial"], sc.topology, "observer_initial",
                                    parse_edge_initial, true)
            : sc.initial;
    if (root.contains("perturbation")) {
        sc.perturbation = per_edge<EdgePerturbation>(
            root["perturbation"], sc.topology, "perturbation",
            [](const json& j, const std::string& w) {
                check_keys(j, {"rho", "v"}, w);
                EdgePerturbation p;
                if (j.contains("rho")) p.rho = parse_profile(j["rho"], w + ".rho");
                if (j.contains("v")) p.v = parse_profile(j["v"], w + ".v");
                return p;
            },
            false);
    }

    const json& jb = require(root, "boundary", "scenario");
    if (!jb.is_array()) throw ConfigError("'boundary' must be an array");
    for (const auto& b : jb) {
        check_keys(b, {"node", "quantity", "schedule"}, "boundary[]");
        BoundarySpec spec;
        spec.node = sc.topology.node_index(string_of(require(b, "node", "boundary[]"), "node"));
        const auto q = string_of(require(b, "quantity", "boundary[]"), "quantity");
        if (q == "m") spec.quantity = Quantity::m;
        else if (q == "h") spec.quantity = Quantity::h;
        else throw ConfigError(fmt::format("boundary quantity must be \"m\" or \"h\", got '{}'", q));
        spec.schedule = parse_schedule(require(b, "schedule", "boundary[]"), "boundary[].schedule");
        sc.boundary.push_back(std::move(spec));
    }

    const json& jg = require(root, "grid", "scenario");
    check_keys(jg, {"cells", "cfl", "stepper"}, "grid");
    sc.cells = integer_or(jg, "cells", 100, "grid");
    sc.cfl = number_or(jg, "cfl", 0.5, "grid");
    if (jg.contains("stepper")) {
        const auto s = string_of(jg["stepper"], "grid.stepper");
        if (s == "moc") sc.stepper = StepperKind::moc;
        else if (s == "fv") sc.stepper = StepperKind::fv;
        else throw ConfigError(fmt::format("unknown stepper '{}'", s));
    }

    const json& jtime = require(root, "time", "scenario");
    check_keys(jtime, {"T", "samples"}, "time");
    sc.T = number(require(jtime, "T", "time"), "time.T");
    sc.samples = integer_or(jtime, "samples", 200, "time");

    if (root.contains("picard")) {
        const json& jq = root["picard"];
        check_keys(jq, {"s_max", "nx", "nt", "max_iters", "tol", "horizon", "l_r", "substeps"},
                   "picard");
        auto& q = sc.picard;
        q.s_max = number_or(jq, "s_max", q.s_max, "picard");
        q.nx = integer_or(jq, "nx", q.nx, "picard");
        q.nt = integer_or(jq, "nt", q.nt, "picard");
        q.max_iters = integer_or(jq, "max_iters", q.max_iters, "picard");
        q.tol = number_or(jq, "tol", q.tol, "picard");
        q.horizon = number_or(jq, "horizon", q.horizon, "picard");
        q.l_r = number_or(jq, "l_r", q.l_r, "picard");
        q.substeps = integer_or(jq, "substeps", q.substeps, "picard");
        if (q.nx < 2 || q.nt < 1 || q.max_iters < 1 || q.substeps < 1 || !(q.s_max > 0.0))
            throw ConfigError("invalid picard settings");
    }

    validate_scenario(sc);
    return sc;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    Scenario sc = load_scenario(ss.str());
    return sc;
}

}  // namespace pipeobs
