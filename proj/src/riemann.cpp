#include "pipeobs/riemann.hpp"

#include <cmath>

#include <fmt/format.h>

namespace pipeobs {

RiemannPair to_riemann(const PressureLaw& law, double rho, double v) {
    const double pt = law.ptilde(rho);
    const double w = v / law.c();
    return {pt + w, pt - w};
}

double density_of(const PressureLaw& law, RiemannPair s) {
    return law.ptilde_inv(0.5 * (s.plus + s.minus));
}

PhysicalState from_riemann(const PressureLaw& law, RiemannPair s) {
    return {density_of(law, s), velocity_of(law, s)};
}

Eigenvalues eigenvalues(const PressureLaw& law, double rho, double v) {
    const double a = std::sqrt(law.dp(rho));
    return {v + a, v - a};
}

Eigenvalues eigenvalues(const PressureLaw& law, RiemannPair s) {
    const auto st = from_riemann(law, s);
    return eigenvalues(law, st.rho, st.v);
}

double enthalpy(const PressureLaw& law, double rho, double v) {
    return 0.5 * v * v + law.dP(rho);
}

double enthalpy(const PressureLaw& law, RiemannPair s) {
    const double c = law.c();
    const double d = s.plus - s.minus;
    return 0.125 * c * c * d * d + law.dP(density_of(law, s));
}

double friction_sigma(RiemannPair s, double gamma, double c) {
    const double d = s.plus - s.minus;
    return gamma * 0.25 * c * std::abs(d) * d;
}

EigenBounds eigen_bounds(double s_max, const BoundConstants& b, double c) {
    if (!(c * s_max <= 0.5 * std::sqrt(b.dp_lo)))
        throw DomainError(fmt::format("small-data condition failed: c S_max = {} > sqrt(C_p'_lo)/2 = {}",
                                      c * s_max, 0.5 * std::sqrt(b.dp_lo)));
    EigenBounds out;
    out.lambda_lo = 0.5 * std::sqrt(b.dp_lo);
    out.lambda_hi = 1.5 * std::sqrt(b.dp_hi);
    out.lipschitz = 0.5 * c + c * b.rho_hi / (4.0 * b.dp_lo) * b.d2p_max;
    return out;
}

}  // namespace pipeobs
