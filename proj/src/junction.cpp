#include "pipeobs/junction.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace pipeobs {

namespace {

double inf_norm(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

// Evaluates F and returns false when a trial point leaves the band.
bool try_residual(const PressureLaw& law, const std::vector<double>& rm,
                  const std::vector<double>& rp, std::vector<double>& out) {
    try {
        out = coupling_residual(law, rm, rp);
    } catch (const OutOfBandError&) {
        return false;
    }
    for (double v : out)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_radius(double r_minus_max, double s_max, bool strict, std::vector<std::string>& w) {
    if (s_max <= 0.0 || r_minus_max <= s_max) return;
    auto msg = fmt::format("incoming invariant {} exceeds certified radius {}", r_minus_max, s_max);
    if (strict) throw SolverError(msg);
    w.push_back(std::move(msg));
}

}  // namespace

std::vector<double> coupling_residual(const PressureLaw& law, const std::vector<double>& rm,
                                      const std::vector<double>& rp) {
    const std::size_t n = rm.size();
    if (rp.size() != n) throw Error("coupling_residual: size mismatch");
    const double c = law.c();
    std::vector<double> f(n, 0.0);
    double prev_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rp[i] - rm[i];
        const double rho = law.ptilde_inv(0.5 * (rp[i] + rm[i]));
        f[0] += rho * d;
        const double h = 0.125 * c * c * d * d + law.dP(rho);
        if (i > 0) f[i] = h - prev_h;
        prev_h = h;
    }
    return f;
}

std::vector<double> coupling_jacobian(const PressureLaw& law, const std::vector<double>& rm,
                                      const std::vector<double>& rp) {
    const std::size_t n = rm.size();
    const double c = law.c();
    std::vector<double> jac(n * n, 0.0);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rp[i] - rm[i];
        const double rho = law.ptilde_inv(0.5 * (rp[i] + rm[i]));
        const double dinv = c * rho / std::sqrt(law.dp(rho));
        jac[i] = dinv * 0.5 * d + rho;
        g[i] = 0.25 * c * c * d + law.d2P(rho) * dinv * 0.5;
    }
    for (std::size_t k = 1; k < n; ++k) {
        jac[k * n + k] = g[k];
        jac[k * n + k - 1] = -g[k - 1];
    }
    return jac;
}

NodeSolution couple_node(const PressureLaw& law, const NodeProblem& pb) {
    const std::size_t n = pb.r_minus.size();
    if (n == 0) throw Error("couple_node: node without edges");
    NodeSolution sol;
    check_radius(inf_norm(pb.r_minus), pb.s_max, pb.strict, sol.warnings);

    std::vector<double> x = pb.warm.size() == n ? pb.warm : pb.r_minus;
    std::vector<double> f;
    if (!try_residual(law, pb.r_minus, x, f)) {
        x = pb.r_minus;
        if (!try_residual(law, pb.r_minus, x, f))
            throw OutOfBandError("couple_node: incoming invariants outside the band");
    }
    double norm = inf_norm(f);
    bool polished = false;
    Eigen::MatrixXd J(n, n);
    Eigen::VectorXd rhs(n);
    std::vector<double> trial(n), ftrial;
    for (int it = 0; it < kNodeMaxIter; ++it) {
        if (norm <= kNodeTol) {
            // One extra step drives the defect to round-off; keep it only if it helps.
            if (polished || norm == 0.0) break;
            polished = true;
        }
        const auto jac = coupling_jacobian(law, pb.r_minus, x);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) J(i, j) = jac[i * n + j];
            rhs(i) = -f[i];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-300)
            throw SolverError("couple_node: singular coupling Jacobian");
        const Eigen::VectorXd step = lu.solve(rhs);
        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h, lambda *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + lambda * step(i);
            if (try_residual(law, pb.r_minus, trial, ftrial) &&
                (inf_norm(ftrial) < norm || (polished && inf_norm(ftrial) <= norm))) {
                accepted = true;
                break;
            }
        }
        sol.iterations = it + 1;
        if (!accepted) {
            if (norm <= kNodeTol) break;
            throw SolverError(fmt::format("couple_node: line search failed at residual {}", norm));
        }
        x = trial;
        f = ftrial;
        norm = inf_norm(f);
        if (polished) break;
    }
    if (!(norm <= kNodeTol))
        throw SolverError(fmt::format("couple_node: Newton did not converge in {} iterations "
                                      "(residual {})",
                                      kNodeMaxIter, norm));
    sol.r_plus = std::move(x);
    sol.residual = norm;
    return sol;
}

namespace {

// Damped scalar Newton on a monotone branch.
template <class G>
BoundarySolution scalar_newton(G&& g, double x0, const char* what) {
    BoundarySolution sol;
    double x = x0;
    double gx, dg;
    auto eval = [&](double at, double& val, double& der) {
        try {
            g(at, val, der);
        } catch (const OutOfBandError&) {
            return false;
        }
        return std::isfinite(val) && std::isfinite(der);
    };
    if (!eval(x, gx, dg)) throw OutOfBandError(fmt::format("{}: start outside the band", what));
    bool polished = false;
    for (int it = 0; it < kNodeMaxIter; ++it) {
        if (std::abs(gx) <= kNodeTol) {
            if (polished || gx == 0.0) break;
            polished = true;
        }
        if (!(dg > 0.0))
            throw SolverError(fmt::format("{}: left the monotone (subsonic) branch", what));
        const double step = -gx / dg;
        double lambda = 1.0, xt = x, gt = gx, dt = dg;
        bool accepted = false;
        for (int h = 0; h < 30; ++h, lambda *= 0.5) {
            xt = x + lambda * step;
            if (eval(xt, gt, dt) && dt > 0.0 &&
                (std::abs(gt) < std::abs(gx) || (polished && std::abs(gt) <= std::abs(gx)))) {
                accepted = true;
                break;
            }
        }
        sol.iterations = it + 1;
        if (!accepted) {
            if (std::abs(gx) <= kNodeTol) break;
            throw SolverError(fmt::format("{}: line search failed at residual {}", what, std::abs(gx)));
        }
        x = xt;
        gx = gt;
        dg = dt;
        if (polished) break;
    }
    if (!(std::abs(gx) <= kNodeTol))
        throw SolverError(fmt::format("{}: Newton did not converge (residual {})", what, std::abs(gx)));
    sol.r_plus = x;
    sol.residual = std::abs(gx);
    return sol;
}

}  // namespace

BoundarySolution invert_boundary_m(const PressureLaw& law, double m_b, double r_minus,
                                   const BoundaryOptions& opt) {
    std::vector<std::string> warnings;
    check_radius(std::abs(r_minus), opt.s_max, opt.strict, warnings);
    if (opt.s_max > 0.0) {
        const auto [lo, hi] = m_window(law, opt.s_max);
        if (m_b < lo || m_b > hi) {
            auto msg = fmt::format("boundary mass flow {} outside window [{}, {}]", m_b, lo, hi);
            if (opt.strict) throw SolverError(msg);
            warnings.push_back(std::move(msg));
        }
    }
    const double c = law.c();
    auto g = [&](double rp, double& val, double& der) {
        const double rho = law.ptilde_inv(0.5 * (rp + r_minus));
        const double d = rp - r_minus;
        val = rho * 0.5 * c * d - m_b;
        der = 0.5 * c * rho * (1.0 + 0.5 * c * d / std::sqrt(law.dp(rho)));
    };
    auto sol = scalar_newton(g, opt.has_warm ? opt.warm : r_minus, "invert_boundary_m");
    sol.warnings = std::move(warnings);
    return sol;
}

BoundarySolution invert_boundary_h(const PressureLaw& law, double h_b, double r_minus,
                                   const BoundaryOptions& opt) {
    std::vector<std::string> warnings;
    check_radius(std::abs(r_minus), opt.s_max, opt.strict, warnings);
    if (opt.s_max > 0.0) {
        const auto [lo, hi] = h_window(law, opt.s_max);
        if (h_b < lo || h_b > hi) {
            auto msg = fmt::format("boundary enthalpy {} outside window [{}, {}]", h_b, lo, hi);
            if (opt.strict) throw SolverError(msg);
            warnings.push_back(std::move(msg));
        }
    }
    const double c = law.c();
    // g' = (c/2) lambda+, positive exactly on the subsonic branch.
    auto g = [&](double rp, double& val, double& der) {
        const double rho = law.ptilde_inv(0.5 * (rp + r_minus));
        const double d = rp - r_minus;
        val = 0.125 * c * c * d * d + law.dP(rho) - h_b;
        der = 0.5 * c * (0.5 * c * d + std::sqrt(law.dp(rho)));
    };
    BoundarySolution sol;
    try {
        sol = scalar_newton(g, opt.has_warm ? opt.warm : r_minus, "invert_boundary_h");
    } catch (const SolverError& ex) {
        // h is minimal where lambda+ = 0; below that value there is no subsonic root.
        throw SolverError(fmt::format("invert_boundary_h: no subsonic root for h_b = {} ({})", h_b,
                                      ex.what()));
    }
    sol.warnings = std::move(warnings);
    return sol;
}

std::pair<double, double> m_window(const PressureLaw& law, double s) {
    const double c = law.c();
    return {law.ptilde_inv(-s / 8.0) * (-c * s / 8.0), law.ptilde_inv(s / 8.0) * (c * s / 8.0)};
}

std::pair<double, double> h_window(const PressureLaw& law, double s) {
    const double c = law.c();
    const double k = c * c / 8.0 * (s / 4.0) * (s / 4.0);
    return {k + law.dP(law.ptilde_inv(-s / 8.0)), k + law.dP(law.ptilde_inv(s / 8.0))};
}

double estimate_junction_constant(const PressureLaw& law, int n, double s_max, int samples,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-s_max, s_max);
    double worst = 0.0;
    NodeProblem pb;
    pb.r_minus.resize(n);
    for (int k = 0; k < samples; ++k) {
        for (auto& r : pb.r_minus) r = u(rng);
        const double in = inf_norm(pb.r_minus);
        if (in == 0.0) continue;
        const auto sol = couple_node(law, pb);
        worst = std::max(worst, inf_norm(sol.r_plus) / in);
    }
    return worst;
}

}  // namespace pipeobs
