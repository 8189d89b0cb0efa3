#pragma once

#include <set>
#include <string>
#include <vector>

namespace hyperctl {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AcceptanceOptions {
    // Grid overrides for deliberately degraded runs (0 keeps defaults).
    int sim_nx = 0;
    int sim_ne = 0;
    bool verbose = true;
};

// Run the numbered acceptance criteria (1..12). Heavy artifacts (kernel
// solves, trajectories) are shared between criteria within one call.
std::vector<CriterionResult> run_acceptance(const std::set<int>& ids,
                                            const AcceptanceOptions& opts = {});

// Named suites for the CLI check mode.
std::set<int> acceptance_suite(const std::string& name);

}  // namespace hyperctl
