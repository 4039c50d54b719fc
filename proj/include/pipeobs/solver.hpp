#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pipeobs/energy.hpp"
#include "pipeobs/netmodel.hpp"
#include "pipeobs/riemann.hpp"

namespace pipeobs {

// ---------------------------------------------------------------------------
// Variables

struct ConservativeEdge {
    double length = 1.0;
    std::vector<double> rho;
    std::vector<double> m;
};

struct ConservativeState {
    double t = 0.0;
    std::vector<ConservativeEdge> edges;
};

/// m = rho v. Throws DomainError for rho <= 0.
ConservativeState convert_conservative(const FieldState& state);
FieldState convert_primitive(const ConservativeState& state);

/// Invariants on cell centres plus the four end traces of every edge.
struct RiemannEdge {
    double length = 1.0;
    std::vector<double> sp, sm;
    double sp0 = 0.0, sm0 = 0.0;  // at x = 0
    double spL = 0.0, smL = 0.0;  // at x = length
    double dx() const { return length / static_cast<double>(sp.size()); }
};

struct RiemannField {
    double t = 0.0;
    std::vector<RiemannEdge> edges;
};

// ---------------------------------------------------------------------------
// Twin state

/// Face mass fluxes of the last step, in edge orientation.
struct FaceFluxes {
    std::vector<double> at_start;
    std::vector<double> at_end;
};

struct TwinState {
    const Scenario* scenario = nullptr;
    StepperKind stepper = StepperKind::moc;
    bool truth_only = false;
    bool strict = false;
    FieldState truth;
    FieldState observer;
    RiemannField truth_ri;
    RiemannField observer_ri;
    long step = 0;
    double dt = 0.0;
    FaceFluxes truth_fluxes;
    std::vector<std::string> warnings;
};

/// Initial twin. The observer copies the truth when truth_only is set.
TwinState make_twin(const Scenario& scenario, StepperKind stepper, bool truth_only = false);

/// cfl * dx / max(|lambda+|, |lambda-|), minimised over edges.
double cfl_dt(const PressureLaw& law, const FieldState& state, double cfl);
/// Same for a single grid spacing shared by all edges.
double cfl_dt(const PressureLaw& law, const FieldState& state, double dx, double cfl);

/// Advance both members of the twin by dt with the twin's stepper.
void step_twin(TwinState& twin, double dt);

/// Largest stable dt for the twin at its scenario's cfl.
double twin_dt(const TwinState& twin);

// ---------------------------------------------------------------------------
// Driver

struct RunOptions {
    std::optional<StepperKind> stepper;
    bool truth_only = false;
    bool strict = false;
    double ct_max = 1.0;
    FitWindow window;
    /// Called at every sample time, including t = 0.
    std::function<void(const TwinState&)> on_sample;
};

struct RunResult {
    DiagnosticsSeries series;
    DecayFit fit;
    std::string fit_error;
    AuditReport audit;
    DeltaChoice delta;
    NormEquivalence norms;
    double delta_m0 = 0.0;
    long steps = 0;
    FieldState truth;
    FieldState observer;
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;
};

RunResult run_twin(const Scenario& scenario, const RunOptions& options = {});

}  // namespace pipeobs
