#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pipeobs/errors.hpp"

namespace pipeobs {

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

enum class NodeKind { boundary, inner };

struct Node {
    std::string id;
    NodeKind kind = NodeKind::inner;
};

struct Edge {
    std::string id;
    int from = 0;
    int to = 0;
    double length = 1.0;
    /// Grid cells on this edge; 0 means the scenario default.
    int cells = 0;
};

/// One (edge, node) incidence. sign is -1 when the edge starts at the node
/// and +1 when it ends there.
struct Incidence {
    int edge = 0;
    int sign = -1;
};

/**
 * Directed, connected graph of pipes.
 *
 * The constructor validates connectivity, endpoint references, positive
 * lengths and that declared node kinds agree with node degrees (boundary
 * nodes have degree one, inner nodes degree two or more).
 */
class NetworkTopology {
public:
    NetworkTopology() = default;
    NetworkTopology(std::vector<Node> nodes, std::vector<Edge> edges);

    /// Single pipe of the given length from node "in" to node "out".
    static NetworkTopology single_pipe(double length);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Incidence>& incident(int node) const { return incidence_[node]; }

    int node_index(std::string_view id) const;
    int edge_index(std::string_view id) const;

    /// Orientation sign of edge e at node v; throws if not incident.
    int sign(int edge, int node) const;

    bool is_star() const;
    /// Index of the unique inner node of a star, or -1.
    int star_center() const;
    bool is_tree() const { return edges_.size() + 1 == nodes_.size(); }

    double max_length() const;
    double total_length() const;

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<Incidence>> incidence_;
};

// ---------------------------------------------------------------------------
// Pressure law
// ---------------------------------------------------------------------------

enum class LawKind { isothermal, power };

/**
 * Barotropic pressure law p(rho) with its potential P and the scaled
 * potential Ptilde used by the Riemann invariants.
 *
 * Conventions: c = sqrt(p'(rho_ref)); Ptilde(rho_ref) = 0; P(rho_ref) = 0 and
 * P' is the closed-form antiderivative of P'' = p'/rho (isothermal:
 * P' = a^2 (1 + ln(rho/rho_ref)); power: P' = kappa alpha rho^(alpha-1)/(alpha-1)).
 */
class PressureLaw {
public:
    PressureLaw() = default;

    /// p = a^2 rho.
    static PressureLaw isothermal(double a, double rho_ref = 1.0);
    /// p = kappa rho^alpha, alpha > 1.
    static PressureLaw power(double kappa, double alpha, double rho_ref = 1.0);

    /// Copy with a different admissible band (default [rho_ref/2, 2 rho_ref]).
    PressureLaw with_band(double rho_lo, double rho_hi) const;
    /// Copy with a different inversion margin (in Ptilde units, default 2).
    PressureLaw with_inversion_margin(double margin) const;

    LawKind kind() const { return kind_; }
    double rho_ref() const { return rho_ref_; }
    double c() const { return c_; }
    double param_a() const { return a_; }
    double kappa() const { return kappa_; }
    double alpha() const { return alpha_; }
    double band_lo() const { return band_lo_; }
    double band_hi() const { return band_hi_; }
    double inversion_margin() const { return margin_; }

    double p(double rho) const;
    double dp(double rho) const;
    double d2p(double rho) const;
    double P(double rho) const;
    double dP(double rho) const;
    double d2P(double rho) const;
    double d3P(double rho) const;
    double ptilde(double rho) const;
    /// dPtilde/drho = sqrt(p')/(c rho).
    double dptilde(double rho) const;

    /// Inverse of Ptilde, |Ptilde(rho) - y| <= 1e-12.
    double ptilde_inv(double y) const;
    /// d/dy Ptilde^{-1}(y) = c rho / sqrt(p'(rho)) at rho = Ptilde^{-1}(y).
    double dptilde_inv(double y) const;

    /// Admissible y-window for ptilde_inv.
    std::pair<double, double> inversion_window() const;

private:
    void check_rho(double rho) const;

    LawKind kind_ = LawKind::isothermal;
    double rho_ref_ = 1.0;
    double a_ = 1.0;
    double kappa_ = 1.0;
    double alpha_ = 2.0;
    double c_ = 1.0;
    double band_lo_ = 0.5;
    double band_hi_ = 2.0;
    double margin_ = 2.0;
};

struct LawValues {
    double p, dp, P, dP, d2P, ptilde;
};

LawValues law_bundle(const PressureLaw& law, double rho);
double ptilde_inv(const PressureLaw& law, double y);

/// Ptilde by adaptive Simpson quadrature of sqrt(p'(s))/(c s).
double ptilde_quadrature(const PressureLaw& law, double rho, double tol = 1e-13);
/// Ptilde^{-1} by bracketing bisection plus Newton polish, independent of
/// any closed form.
double ptilde_inv_bisection(const PressureLaw& law, double y, double tol = 1e-12);

inline constexpr double kInversionTol = 1e-12;

// ---------------------------------------------------------------------------
// Bound constants
// ---------------------------------------------------------------------------

struct BoundConstants {
    double rho_lo = 0.0, rho_hi = 0.0;
    double v_bar = 0.0;
    double dp_lo = 0.0, dp_hi = 0.0;     // extrema of p'
    double d2P_lo = 0.0, d2P_hi = 0.0;   // extrema of P''
    double d3P_max = 0.0;                // max |P'''|
    double d2p_max = 0.0;                // max |p''|
    double min_rho_d2P = 0.0;            // min of rho P''(rho) = min p'
    bool subsonic = false;               // min rho P'' >= 4 v_bar^2
};

BoundConstants bound_constants(const PressureLaw& law, double rho_lo, double rho_hi,
                               double v_bar);

// ---------------------------------------------------------------------------
// Scenario data
// ---------------------------------------------------------------------------

/// Sum of simple profile terms over an edge, evaluated in the scaled
/// coordinate xi = x/length in [0, 1].
struct Profile {
    enum class Kind { constant, linear, samples, bump, sine };
    struct Term {
        Kind kind = Kind::constant;
        std::vector<double> a;
    };
    std::vector<Term> terms;

    double operator()(double x, double length) const;
    bool empty() const { return terms.empty(); }

    static Profile constant(double value);
    static Profile linear(double at_start, double at_end);
    static Profile samples(std::vector<double> values);
    /// amplitude * cos^2(pi (xi - center)/width) on |xi - center| < width/2.
    static Profile bump(double center, double width, double amplitude);
    /// amplitude * sin(modes * pi * xi).
    static Profile sine(double amplitude, double modes);
    Profile& operator+=(const Profile& other);
    /// Every term multiplied by factor.
    Profile scaled(double factor) const;
};

/// Initial data on one edge, either as (rho, v) or as (S+, S-).
struct EdgeInitial {
    bool riemann = false;
    Profile first;   // rho or S+
    Profile second;  // v or S-
};

/// Additive perturbation applied on top of an observer initial.
struct EdgePerturbation {
    Profile rho;
    Profile v;
};

class Schedule {
public:
    Schedule() = default;
    static Schedule constant(double value);
    /// Piecewise linear through (t, value) points, constant outside.
    static Schedule piecewise_linear(std::vector<std::pair<double, double>> points);

    double operator()(double t) const;
    /// Largest |slope| over the breakpoints.
    double max_slope() const;

private:
    std::vector<std::pair<double, double>> points_{{0.0, 0.0}};
};

enum class Quantity { m, h };

/// Boundary condition at a boundary node. The mass flow value is measured in
/// the orientation of the incident edge.
struct BoundarySpec {
    int node = 0;
    Quantity quantity = Quantity::m;
    Schedule schedule;
};

enum class Mode { none, velocity, density, massflow };
enum class StepperKind { moc, fv };

std::string to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct PicardSettings {
    double s_max = 0.02;
    int nx = 100;
    int nt = 200;
    int max_iters = 60;
    double tol = 1e-10;
    /// Horizon; <= 0 picks 0.95 of the largest certified horizon.
    double horizon = 0.0;
    /// Solution Lipschitz budget; <= 0 picks 2 L_I + 0.1.
    double l_r = 0.0;
    int substeps = 1;
};

struct Scenario {
    std::string name = "scenario";
    NetworkTopology topology;
    PressureLaw law;
    double gamma = 0.0;
    double mu = 0.0;
    Mode mode = Mode::none;
    double v_bar = 0.1;
    std::vector<EdgeInitial> initial;
    std::vector<EdgeInitial> observer_initial;
    std::vector<EdgePerturbation> perturbation;
    std::vector<BoundarySpec> boundary;
    int cells = 100;
    double cfl = 0.5;
    StepperKind stepper = StepperKind::moc;
    double T = 1.0;
    int samples = 200;
    PicardSettings picard;
    /// Canonical JSON text of the source configuration (for digests).
    std::string canonical_source;

    const BoundarySpec* boundary_at(int node) const;
    int cells_on(int edge) const;
    BoundConstants bounds() const;
};

/// Parse and validate. Throws ConfigError; parse errors carry line/column.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);

/// Re-check every scenario invariant (used after programmatic edits).
void validate_scenario(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Field state
// ---------------------------------------------------------------------------

struct EdgeField {
    double length = 1.0;
    std::vector<double> rho;
    std::vector<double> v;

    int cells() const { return static_cast<int>(rho.size()); }
    double dx() const { return length / static_cast<double>(rho.size()); }
    double x(int j) const { return (j + 0.5) * dx(); }
};

struct FieldState {
    double t = 0.0;
    std::vector<EdgeField> edges;
};

/// Cell-centred initial field of the truth (observer = false) or observer.
FieldState initial_field(const Scenario& scenario, bool observer);

/// Pointwise evaluation of the initial data at position x of edge e.
std::pair<double, double> initial_point(const Scenario& scenario, int edge, double x,
                                        bool observer);

bool same_grid(const FieldState& a, const FieldState& b);

}  // namespace pipeobs
