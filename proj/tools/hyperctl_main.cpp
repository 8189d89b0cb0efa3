#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "hyperctl/acceptance.hpp"
#include "hyperctl/config.hpp"
#include "hyperctl/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hyperctl — micro-macro boundary control of coupled hyperbolic systems"};

    std::string config_path;
    std::string out_dir;
    std::string kernel_method;
    std::string grid_spec;
    int workers = 0;
    bool check = false;

    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_flag("--check", check, "run the config's acceptance suite and report pass/fail");
    app.add_option("--out", out_dir, "output directory (overrides [output] dir)");
    app.add_option("--workers", workers, "worker pool size for sweeps (env HYPERSTEP_WORKERS)");
    app.add_option("--kernel-method", kernel_method, "kernel solver override: sa | ps")
        ->check(CLI::IsMember({"sa", "ps"}));
    app.add_option("--grid", grid_spec, "grid override as nx,ne");

    CLI11_PARSE(app, argc, argv);

    hyperctl::ExperimentConfig cfg;
    hyperctl::RunOverrides ov;
    ov.outdir = out_dir;
    ov.workers = workers;
    ov.kernel_method = kernel_method;
    ov.check = check;
    if (!grid_spec.empty()) {
        if (std::sscanf(grid_spec.c_str(), "%d,%d", &ov.grid_nx, &ov.grid_ne) != 2) {
            std::fprintf(stderr, "error: --grid expects nx,ne\n");
            return 2;
        }
    }

    try {
        cfg = hyperctl::load_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    try {
        if (check) {
            hyperctl::AcceptanceOptions opts;
            opts.sim_nx = ov.grid_nx;
            opts.sim_ne = ov.grid_ne;
            auto results = hyperctl::run_acceptance(hyperctl::acceptance_suite(cfg.suite), opts);
            bool all = true;
            for (const auto& r : results) all = all && r.pass;
            std::printf("%s: %zu criteria, %s\n", cfg.suite.empty() ? "all" : cfg.suite.c_str(),
                        results.size(), all ? "all passed" : "FAILURES");
            return all ? 0 : 4;
        }
        return hyperctl::run_experiment(cfg, ov);
    } catch (const hyperctl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    }
}
