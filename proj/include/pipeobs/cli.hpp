#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pipeobs/solver.hpp"

namespace pipeobs {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitSolver = 2,
    kExitAudit = 3,
    kExitPicard = 4,
    kExitUsage = 64,
};

/// JSON summary of one run (digest, parameters, fit, audit, warnings).
nlohmann::json run_summary(const Scenario& scenario, const RunResult& result);

/// Entry point of the pipeobs tool; returns the process exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace pipeobs
