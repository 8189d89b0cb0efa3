#pragma once

#include <string>
#include <utility>

#include "hyperctl/config.hpp"
#include "hyperctl/control.hpp"
#include "hyperctl/sim.hpp"

namespace hyperctl {

struct RunOverrides {
    std::string outdir;
    int workers = 0;  // 0: --workers/env/hardware default
    std::string kernel_method;
    int grid_nx = 0, grid_ne = 0;
    bool check = false;
};

// Exit codes: 0 ok, 2 config error (thrown before this call), 3 solver
// failure, 4 acceptance-check failure.
int run_experiment(const ExperimentConfig& cfg, const RunOverrides& ov);

// Field builders shared by the runner, the tests and the acceptance
// suites. Continuum initial data uses {x, y}; micro initial data uses
// {x, i, n} with 1-based component index i (falling back to cell means
// of the continuum expression when no micro expression is given).
Field2 continuum_initial(const std::string& expr, int ne, int nx);
Field2 micro_initial(const std::string& expr_nm, const std::string& expr_cont, int k, int nx);

// Ensemble-constant continuum realization of averaged coefficients
// (the 1+1 companion system).
ContinuumParams averaged_to_continuum(const AveragedParams& a, int nx);

// Closed-loop cascade: the companion continuum system runs under the
// macro-measurement law evaluated on its own ensemble-averaged state;
// the micro system is driven by the same control vector.
std::pair<Trajectory, Trajectory> simulate_cascade(const NmParams& micro, const Field2& u0m,
                                                   const Field2& v0m,
                                                   const ContinuumParams& companion,
                                                   const Field2& u0c, const Field2& v0c,
                                                   const MacroMeasFeedback& law,
                                                   const SimConfig& cfg);

int resolve_workers(int requested);

}  // namespace hyperctl
