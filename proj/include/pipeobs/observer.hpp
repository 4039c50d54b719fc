#pragma once

#include <vector>

#include "pipeobs/netmodel.hpp"
#include "pipeobs/riemann.hpp"

namespace pipeobs {

/// Observer source terms (L_rho, L_v) in the (rho, v) equations.
struct PhysicalNudging {
    double l_rho = 0.0;
    double l_v = 0.0;
};

PhysicalNudging nudging_physical(const PressureLaw& law, Mode mode, double mu,
                                 PhysicalState truth, PhysicalState obs);

struct PhysicalNudgingArrays {
    std::vector<double> l_rho;
    std::vector<double> l_v;
};

PhysicalNudgingArrays nudging_physical(const PressureLaw& law, Mode mode, double mu,
                                       const std::vector<double>& rho,
                                       const std::vector<double>& v,
                                       const std::vector<double>& rho_hat,
                                       const std::vector<double>& v_hat);

/// Projection of physical sources onto the invariants with the left
/// eigenvectors l = (sqrt(p'(rho_hat))/(c rho_hat), +-1/c).
RiemannPair project_sources(const PressureLaw& law, double rho_hat, PhysicalNudging src);

/// Observer sources in the equations for S+ and S-. Velocity and density
/// modes use the closed linear forms; massflow goes through the projection.
RiemannPair nudging_riemann(const PressureLaw& law, Mode mode, double mu, RiemannPair truth,
                            RiemannPair obs);

/// nudging_riemann written as forcing - decay * S (componentwise), where the
/// decay part is handled by an exponential integrating factor in the steppers.
struct NudgingSplit {
    double decay = 0.0;
    double forcing_plus = 0.0;
    double forcing_minus = 0.0;
};

NudgingSplit split_nudging(const PressureLaw& law, Mode mode, double mu, RiemannPair truth,
                           RiemannPair obs);

}  // namespace pipeobs
