#pragma once

#include <utility>

#include "pipeobs/netmodel.hpp"

namespace pipeobs {

/// Riemann invariants S+ = Ptilde(rho) + v/c and S- = Ptilde(rho) - v/c.
struct RiemannPair {
    double plus = 0.0;
    double minus = 0.0;
};

struct PhysicalState {
    double rho = 1.0;
    double v = 0.0;
};

RiemannPair to_riemann(const PressureLaw& law, double rho, double v);
PhysicalState from_riemann(const PressureLaw& law, RiemannPair s);
/// Density only, rho = Ptilde^{-1}((S+ + S-)/2).
double density_of(const PressureLaw& law, RiemannPair s);
inline double velocity_of(const PressureLaw& law, RiemannPair s) {
    return 0.5 * law.c() * (s.plus - s.minus);
}

struct Eigenvalues {
    double plus;
    double minus;
};

Eigenvalues eigenvalues(const PressureLaw& law, double rho, double v);
Eigenvalues eigenvalues(const PressureLaw& law, RiemannPair s);

double enthalpy(const PressureLaw& law, double rho, double v);
/// Enthalpy written in invariants: (c^2/8)(S+ - S-)^2 + P'(Ptilde^{-1}((S+ + S-)/2)).
double enthalpy(const PressureLaw& law, RiemannPair s);

/// sigma = gamma (c/4) |S+ - S-| (S+ - S-) = (gamma/c) |v| v.
double friction_sigma(RiemannPair s, double gamma, double c);

struct EigenBounds {
    double lambda_lo;
    double lambda_hi;
    double lipschitz;
};

/// Bounds on the characteristic speeds for |S+-| <= s_max. Throws DomainError
/// ("small-data condition failed") unless c s_max <= sqrt(C_p'_lo)/2.
EigenBounds eigen_bounds(double s_max, const BoundConstants& bounds, double c);

}  // namespace pipeobs
