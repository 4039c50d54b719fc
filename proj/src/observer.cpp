#include "pipeobs/observer.hpp"

#include <cmath>

namespace pipeobs {

PhysicalNudging nudging_physical(const PressureLaw& law, Mode mode, double mu,
                                 PhysicalState truth, PhysicalState obs) {
    if (!(truth.rho > 0.0) || !(obs.rho > 0.0)) throw DomainError("density not positive");
    switch (mode) {
    case Mode::velocity:
        return {0.0, mu * (truth.v - obs.v)};
    case Mode::density:
        return {mu * law.c() / std::sqrt(law.dp(obs.rho)) * obs.rho *
                    (law.ptilde(truth.rho) - law.ptilde(obs.rho)),
                0.0};
    case Mode::massflow:
        return {0.0, mu * (truth.rho * truth.v - obs.rho * obs.v)};
    case Mode::none:
        break;
    }
    return {};
}

PhysicalNudgingArrays nudging_physical(const PressureLaw& law, Mode mode, double mu,
                                       const std::vector<double>& rho,
                                       const std::vector<double>& v,
                                       const std::vector<double>& rho_hat,
                                       const std::vector<double>& v_hat) {
    const auto n = rho.size();
    if (v.size() != n || rho_hat.size() != n || v_hat.size() != n)
        throw Error("nudging_physical: array shape mismatch");
    PhysicalNudgingArrays out{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = nudging_physical(law, mode, mu, {rho[i], v[i]}, {rho_hat[i], v_hat[i]});
        out.l_rho[i] = s.l_rho;
        out.l_v[i] = s.l_v;
    }
    return out;
}

RiemannPair project_sources(const PressureLaw& law, double rho_hat, PhysicalNudging src) {
    const double c = law.c();
    const double a = std::sqrt(law.dp(rho_hat)) / (c * rho_hat) * src.l_rho;
    return {a + src.l_v / c, a - src.l_v / c};
}

RiemannPair nudging_riemann(const PressureLaw& law, Mode mode, double mu, RiemannPair R,
                            RiemannPair S) {
    switch (mode) {
    case Mode::velocity: {
        const double w = 0.5 * mu * ((R.plus - S.plus) - (R.minus - S.minus));
        return {w, -w};
    }
    case Mode::density: {
        const double w = 0.5 * mu * ((R.plus - S.plus) + (R.minus - S.minus));
        return {w, w};
    }
    case Mode::massflow: {
        const auto truth = from_riemann(law, R);
        const auto obs = from_riemann(law, S);
        return project_sources(law, obs.rho, nudging_physical(law, mode, mu, truth, obs));
    }
    case Mode::none:
        break;
    }
    return {0.0, 0.0};
}

NudgingSplit split_nudging(const PressureLaw& law, Mode mode, double mu, RiemannPair R,
                           RiemannPair S) {
    const double k = 0.5 * mu;
    switch (mode) {
    case Mode::velocity:
        return {k, k * (R.plus - R.minus + S.minus), k * (S.plus - R.plus + R.minus)};
    case Mode::density:
        return {k, k * (R.plus + R.minus - S.minus), k * (R.plus + R.minus - S.plus)};
    case Mode::massflow: {
        const auto src = nudging_riemann(law, mode, mu, R, S);
        return {0.0, src.plus, src.minus};
    }
    case Mode::none:
        break;
    }
    return {};
}

}  // namespace pipeobs
