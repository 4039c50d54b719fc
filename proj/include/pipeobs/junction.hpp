#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pipeobs/netmodel.hpp"

namespace pipeobs {

// All node solvers use the node-local convention: every incident edge is
// re-oriented to start at the node, R- is the invariant arriving at the node
// and R+ the invariant leaving it.

struct NodeProblem {
    std::vector<double> r_minus;
    /// Optional Newton start; defaults to R+ = R-.
    std::vector<double> warm;
    /// Certified-regime radius; 0 disables the check.
    double s_max = 0.0;
    /// Refuse (instead of warn) when |R-| exceeds s_max.
    bool strict = false;
};

struct NodeSolution {
    std::vector<double> r_plus;
    int iterations = 0;
    double residual = 0.0;
    std::vector<std::string> warnings;
};

struct BoundarySolution {
    double r_plus = 0.0;
    int iterations = 0;
    double residual = 0.0;
    std::vector<std::string> warnings;
};

struct BoundaryOptions {
    double warm = 0.0;
    bool has_warm = false;
    double s_max = 0.0;
    bool strict = false;
};

inline constexpr double kNodeTol = 1e-10;
inline constexpr int kNodeMaxIter = 50;

/// F[0] = sum rho_i (R+_i - R-_i); F[k] = h_k - h_{k-1}.
std::vector<double> coupling_residual(const PressureLaw& law, const std::vector<double>& r_minus,
                                      const std::vector<double>& r_plus);

/// Row-major n x n Jacobian dF/dR+.
std::vector<double> coupling_jacobian(const PressureLaw& law, const std::vector<double>& r_minus,
                                      const std::vector<double>& r_plus);

/// Damped Newton solve of the coupling conditions for R+.
NodeSolution couple_node(const PressureLaw& law, const NodeProblem& problem);

/// Prescribed node-local mass flow m_b = rho (c/2)(R+ - R-).
BoundarySolution invert_boundary_m(const PressureLaw& law, double m_b, double r_minus,
                                   const BoundaryOptions& options = {});

/// Prescribed enthalpy; the root on the subsonic branch lambda+ > 0.
BoundarySolution invert_boundary_h(const PressureLaw& law, double h_b, double r_minus,
                                   const BoundaryOptions& options = {});

/// Admissible boundary data windows for a given invariant radius.
std::pair<double, double> m_window(const PressureLaw& law, double s_max);
std::pair<double, double> h_window(const PressureLaw& law, double s_max);

/// Empirical sup of |R+|_inf / |R-|_inf over random node problems with
/// |R-| <= s_max and n incident edges.
double estimate_junction_constant(const PressureLaw& law, int n, double s_max, int samples,
                                  std::uint64_t seed);

}  // namespace pipeobs
