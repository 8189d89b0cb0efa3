#pragma once

#include <string>
#include <vector>

#include "hyperctl/kernels.hpp"
#include "hyperctl/model.hpp"

namespace hyperctl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parsed experiment declaration. Sections: [system], [nm],
// [continuum], [grid], [kernels], [controller], [initial], [scenario],
// [output], [acceptance].
struct ExperimentConfig {
    // system
    bool has_nm = false, has_continuum = false;
    int n = 0, m = 0;
    NmExprSpec nm;
    ContinuumExprSpec continuum;

    // grids and time horizon
    EnsembleGrid grid;

    // kernel solver
    KernelMethod kernel_method = KernelMethod::PowerSeries;
    int ps_order = 10;
    int kernel_nx = 61;
    int kernel_ne = 16;
    double kernel_tol = 1e-6;

    // controller
    std::string variant = "open_loop";
    double noise_eps = 0.0;

    // initial data
    std::string u0 = "0", v0 = "0";
    std::string u0_nm, v0_nm;  // fall back to the continuum expressions

    // scenario
    std::string scenario = "single_run";
    std::vector<int> n_list;
    std::string study = "solution_gap";

    // output
    std::string outdir = "out";
    unsigned seed = 42;

    // acceptance suite (check mode)
    std::string suite;

    std::string raw_text;
    std::string path;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& path = "<inline>");

}  // namespace hyperctl
