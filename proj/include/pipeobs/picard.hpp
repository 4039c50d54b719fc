#pragma once

#include <string>
#include <vector>

#include "pipeobs/netmodel.hpp"
#include "pipeobs/riemann.hpp"

namespace pipeobs {

/// Smallness budget of the local existence argument for one horizon.
struct SmallnessBudget {
    double s_max = 0.0;
    double b_max = 0.0;   // sup of the initial invariants
    double l_i = 0.0;     // Lipschitz constant of initial and boundary data
    double l_r = 0.0;     // admitted Lipschitz constant of iterates
    double T = 0.0;
    double mu = 0.0;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    double l_lambda = 0.0;
    double l_sigma = 0.0;
    double sigma_max = 0.0;
    double c_n = 0.0;            // junction constant, 0 without inner nodes
    double horizon_cert = 0.0;   // largest T meeting the damping condition
    double horizon_edge = 0.0;   // min edge length / lambda_hi
    double horizon_margin = 0.0; // cap - (1 - exp(-mu T / 2))
    BoundConstants bounds;
    std::vector<std::string> violations;

    bool certified() const { return violations.empty(); }
};

SmallnessBudget derive_budget(const Scenario& scenario, const PicardSettings& settings);

/// Invariants on a vertex lattice t_k = k T/nt, x_i = i l/nx, per edge.
struct SpaceTimeField {
    int nx = 0;
    int nt = 0;
    double T = 0.0;
    std::vector<double> length;
    std::vector<std::vector<double>> sp, sm;

    static SpaceTimeField zeros(const std::vector<double>& lengths, int nx, int nt, double T);

    std::size_t index(int k, int i) const { return static_cast<std::size_t>(k) * (nx + 1) + i; }
    double dt() const { return T / nt; }
    double dx(int e) const { return length[e] / nx; }
    /// Bilinear interpolation, clamped to the lattice.
    RiemannPair value(int e, double t, double x) const;
};

/// max over lattice and edges of |S+| + |S-|.
double norm_M(const SpaceTimeField& field);
double distance_M(const SpaceTimeField& a, const SpaceTimeField& b);

struct LipschitzEstimate {
    double l_x = 0.0;
    double sup = 0.0;
};

LipschitzEstimate measure_lipschitz(const SpaceTimeField& field);

/// Initial invariants on the x lattice plus the network data the map needs.
struct PicardData {
    const Scenario* scenario = nullptr;
    double mu = 0.0;
    double t0 = 0.0;  // offset of boundary schedules
    std::vector<std::vector<double>> y_plus, y_minus;
};

PicardData picard_data(const Scenario& scenario, int nx, bool observer, double mu);

struct CharacteristicTrace {
    double t_foot = 0.0;
    double x_foot = 0.0;
    /// 0: reached s = 0; -1: hit x = 0; +1: hit x = length.
    int hit = 0;
    std::vector<double> s;
    std::vector<double> x;
};

/// Backward explicit Euler along d xi/ds = lambda(S(s, xi)) from (t, x) with
/// substep at most h.
CharacteristicTrace trace_characteristic(const PressureLaw& law, const SpaceTimeField& field,
                                         int edge, int family, double x, double t, double h);

/// One application of the fixed-point map. truth may be null when mu = 0.
SpaceTimeField apply_phi(const SpaceTimeField& iterate, const SpaceTimeField* truth,
                         const PicardData& data, const SmallnessBudget& budget, int substeps);

struct PicardResult {
    SpaceTimeField solution;
    std::vector<double> diffs;
    std::vector<double> ratios;
    std::vector<LipschitzEstimate> iterates;
    double max_ratio = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool diverged = false;
    bool left_ball = false;  // some iterate exceeded S_max
    std::string failure;
    std::vector<std::string> warnings;
};

PicardResult iterate_to_fixed_point(const PicardData& data, const SpaceTimeField* truth,
                                    const SmallnessBudget& budget,
                                    const PicardSettings& settings);

struct WindowReport {
    int index = 0;
    double t0 = 0.0;
    double t1 = 0.0;
    int iterations = 0;
    double max_ratio = 0.0;
    double residual = 0.0;
    double sup = 0.0;        // sup |S+-| of the observer window
    double sup_error = 0.0;  // sup |S+- - R+-|
};

struct ContinuationResult {
    std::vector<WindowReport> windows;
    SpaceTimeField last;
    SpaceTimeField last_truth;
    double c_T = 0.0;
    bool ok = true;
    std::string failure;
};

/// Chain fixed-point solves over ceil(T_total / budget.T) equal windows.
ContinuationResult semi_global_continuation(const Scenario& scenario,
                                            const SmallnessBudget& budget,
                                            const PicardSettings& settings, double T_total);

}  // namespace pipeobs
