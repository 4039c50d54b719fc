#pragma once

#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pipeobs/netmodel.hpp"

namespace pipeobs {

/// One diagnostics row. The first eight fields form the CSV schema.
struct Sample {
    double t = 0.0;
    double l2_err_sq = 0.0;
    double h_rel = 0.0;
    double f_aux = 0.0;
    double lyapunov = 0.0;
    double delta_m = 0.0;
    double max_v = 0.0;
    double dt = 0.0;
    // audit extras, not serialized
    long step = 0;
    double rho_min = 0.0;
    double rho_max = 0.0;
    /// max over cells of |d rho/dt| + |dv/dt| of the truth since the previous sample.
    double dt_rate = 0.0;
};

struct DiagnosticsSeries {
    std::vector<Sample> samples;
};

// ---------------------------------------------------------------------------
// Energies

/// Midpoint-rule H = sum_e int (rho v^2/2 + P(rho)).
double energy(const PressureLaw& law, const FieldState& state);

/// H(obs | truth) = H(obs) - H(truth) - <h, rho_hat - rho> - <m, v_hat - v>.
double relative_energy(const PressureLaw& law, const FieldState& obs, const FieldState& truth);

/// Squared L2 distance of (rho, v) over all edges.
double l2_error_sq(const FieldState& obs, const FieldState& truth);

double total_mass(const FieldState& state);

/// int rho - int rho_hat over all edges.
double mass_difference(const FieldState& obs, const FieldState& truth);

struct NormEquivalence {
    double c0 = 0.0;
    double C0 = 0.0;
};

/**
 * Constants with c0 |u - u_hat|^2 <= H(u_hat | u) <= C0 |u - u_hat|^2 for
 * states in the band with |v| <= v_bar.
 *
 * Pointwise H(u_hat|u) = P(rho_hat|rho) + rho_hat (v_hat-v)^2/2
 * + v (rho_hat-rho)(v_hat-v), and P(rho_hat|rho) lies between C_P''_lo a^2/2
 * and C_P''_hi a^2/2. The constants are the extreme eigenvalues of the two
 * resulting 2x2 quadratic forms.
 */
NormEquivalence norm_equiv_constants(const BoundConstants& bounds);

/// One-sided Poincare constant for functions vanishing at one end of [0, l]:
/// |f| <= (2/pi) l |f'|.
inline constexpr double kPoincare = 2.0 / std::numbers::pi;

struct DeltaChoice {
    double delta = 0.0;
    double poincare_cap = 0.0;  // c0 / (C_Poin l_max)
    double decay_cap = 0.0;     // mu rho_lo / (4 (2 rho_hi + ...))
};

DeltaChoice select_delta(const BoundConstants& bounds, double c0, double mu, double gamma,
                         double ell_max);

// ---------------------------------------------------------------------------
// Time antiderivatives

enum class Functional { none, f1, f2 };

/// Functional matching a measurement mode (F1 for velocity/massflow, F2 for density).
Functional functional_for(Mode mode);

/**
 * Running antiderivatives M (mass) and N (enthalpy) for truth and observer.
 *
 * M^e(x,t) = int_0^t m dt' - int_{a}^x rho_0, anchored at an end of edge e
 * carrying a mass-flow boundary condition. N(x,t) = int_0^t h dt' minus the
 * path integral from the enthalpy-anchored boundary node of
 * (v_0 - int_0^t gamma |v| v dt'). Time integrals use the left-endpoint rule,
 * matching one accepted step of the stepper.
 */
class AntiderivativeTracker {
public:
    AntiderivativeTracker(const Scenario& scenario, const FieldState& truth0,
                          const FieldState& obs0, Functional kind);

    /// Accumulate one step of length dt from states at the current time.
    void advance(const FieldState& truth, const FieldState& obs, double dt);

    double time() const { return t_; }
    Functional kind() const { return kind_; }

    /// M (or N) per edge and cell; observer = true for the hatted field.
    std::vector<std::vector<double>> M(bool observer) const;
    std::vector<std::vector<double>> N(bool observer) const;

    /// Linear extrapolation of the anchored difference to its anchor node(s);
    /// returns the largest magnitude.
    double anchor_difference() const;

private:
    std::vector<std::vector<double>> path_integral(bool observer) const;

    const Scenario* sc_;
    Functional kind_;
    double t_ = 0.0;
    // F1
    std::vector<int> anchor_at_end_;  // per edge: 0 anchored at x=0, 1 at x=l
    std::vector<std::vector<double>> im_[2], a_[2];
    // F2
    struct PathEdge {
        int edge;
        bool entry_at_end;
        int entry_node;
    };
    std::vector<PathEdge> order_;
    int root_ = -1;
    std::vector<std::vector<double>> ih_[2], q_[2], v0_[2];
};

double f1(const AntiderivativeTracker& tracker, const FieldState& obs, const FieldState& truth);
double f2(const AntiderivativeTracker& tracker, const FieldState& obs, const FieldState& truth);

// ---------------------------------------------------------------------------
// Decay fitting

enum class DecayStatus { decaying, non_decaying, synchronized };

std::string to_string(DecayStatus status);

struct FitWindow {
    double skip_head = 0.05;
    double skip_tail = 0.05;
};

struct DecayFit {
    double c1 = 0.0;
    double c2 = 0.0;
    double t0 = 0.0;
    double t1 = 0.0;
    double residual = 0.0;
    int used = 0;
    bool plateau = false;
    double plateau_level = 0.0;
    DecayStatus status = DecayStatus::non_decaying;
};

inline constexpr double kErrorFloor = 1e-15;

/// Least-squares fit of log(err) = log(C1 err(0)) - C2 t.
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& err,
                   const FitWindow& window = {});
/// Fit of the L2 error sqrt(l2_err_sq).
DecayFit fit_decay(const DiagnosticsSeries& series, const FitWindow& window = {});

// ---------------------------------------------------------------------------
// Assumption audit

struct AssumptionCheck {
    std::string name;
    bool pass = true;
    double margin = 0.0;
    double first_failure = std::numeric_limits<double>::quiet_NaN();
};

struct AuditReport {
    std::vector<AssumptionCheck> checks;
    bool all_pass() const;
};

/// ct_max bounds max |d rho/dt| + |dv/dt|; not quantified by the theory.
AuditReport audit_assumptions(const DiagnosticsSeries& series, const BoundConstants& bounds,
                              double ct_max = 1.0);

}  // namespace pipeobs
