#include "hyperctl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace hyperctl {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

int to_int(const std::string& v, const std::string& key) {
    try {
        size_t pos;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw ConfigError("bad integer for '" + key + "': " + v);
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw ConfigError("bad number for '" + key + "': " + v);
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& path) {
    ExperimentConfig cfg;
    cfg.raw_text = text;
    cfg.path = path;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        auto unknown = [&]() -> ConfigError {
            return ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                               "' in section [" + section + "]");
        };

        if (section == "system") {
            if (key == "type") {
                cfg.has_nm = val == "nm" || val == "both";
                cfg.has_continuum = val == "continuum" || val == "both";
                if (!cfg.has_nm && !cfg.has_continuum)
                    throw ConfigError("system type must be nm | continuum | both");
            } else if (key == "n") {
                cfg.n = to_int(val, key);
            } else if (key == "m") {
                cfg.m = to_int(val, key);
            } else {
                throw unknown();
            }
        } else if (section == "nm") {
            if (key == "lambda") cfg.nm.lambda = val;
            else if (key == "mu") cfg.nm.mu = val;
            else if (key == "sigma") cfg.nm.sigma = val;
            else if (key == "w") cfg.nm.w = val;
            else if (key == "theta") cfg.nm.theta = val;
            else if (key == "psi") cfg.nm.psi = val;
            else if (key == "q") cfg.nm.q = val;
            else if (key == "r") cfg.nm.r = val;
            else if (key == "lambda_dx") cfg.nm.lambda_dx = val;
            else if (key == "mu_dx") cfg.nm.mu_dx = val;
            else throw unknown();
        } else if (section == "continuum") {
            if (key == "lambda") cfg.continuum.lambda = val;
            else if (key == "mu") cfg.continuum.mu = val;
            else if (key == "sigma") cfg.continuum.sigma = val;
            else if (key == "w") cfg.continuum.w = val;
            else if (key == "theta") cfg.continuum.theta = val;
            else if (key == "psi") cfg.continuum.psi = val;
            else if (key == "q") cfg.continuum.q = val;
            else if (key == "r") cfg.continuum.r = val;
            else if (key == "lambda_dx") cfg.continuum.lambda_dx = val;
            else if (key == "mu_dx") cfg.continuum.mu_dx = val;
            else throw unknown();
        } else if (section == "grid") {
            if (key == "nx") cfg.grid.nx = to_int(val, key);
            else if (key == "ne") cfg.grid.ne = to_int(val, key);
            else if (key == "t_final") cfg.grid.t_final = to_double(val, key);
            else if (key == "output_dt") cfg.grid.output_dt = to_double(val, key);
            else throw unknown();
        } else if (section == "kernels") {
            if (key == "method") {
                if (val == "sa") cfg.kernel_method = KernelMethod::SuccessiveApprox;
                else if (val == "ps") cfg.kernel_method = KernelMethod::PowerSeries;
                else throw ConfigError("kernel method must be sa | ps");
            } else if (key == "order") {
                cfg.ps_order = to_int(val, key);
            } else if (key == "nx") {
                cfg.kernel_nx = to_int(val, key);
            } else if (key == "ne") {
                cfg.kernel_ne = to_int(val, key);
            } else if (key == "tol") {
                cfg.kernel_tol = to_double(val, key);
            } else {
                throw unknown();
            }
        } else if (section == "controller") {
            if (key == "variant") cfg.variant = val;
            else if (key == "noise_eps") cfg.noise_eps = to_double(val, key);
            else throw unknown();
        } else if (section == "initial") {
            if (key == "u0") cfg.u0 = val;
            else if (key == "v0") cfg.v0 = val;
            else if (key == "u0_nm") cfg.u0_nm = val;
            else if (key == "v0_nm") cfg.v0_nm = val;
            else throw unknown();
        } else if (section == "scenario") {
            if (key == "type") cfg.scenario = val;
            else if (key == "study") cfg.study = val;
            else if (key == "n_list") {
                cfg.n_list.clear();
                std::istringstream ls(val);
                std::string tok;
                while (std::getline(ls, tok, ',')) cfg.n_list.push_back(to_int(trim(tok), key));
            } else {
                throw unknown();
            }
        } else if (section == "output") {
            if (key == "dir") cfg.outdir = val;
            else if (key == "seed") cfg.seed = static_cast<unsigned>(to_int(val, key));
            else throw unknown();
        } else if (section == "acceptance") {
            if (key == "suite") cfg.suite = val;
            else throw unknown();
        } else {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown section [" +
                              section + "]");
        }
    }

    static const char* variants[] = {"open_loop",
                                     "continuum_exact",
                                     "micro_exact",
                                     "macro_kernels_micro_meas",
                                     "macro_kernels_macro_meas",
                                     "averaged_macro"};
    if (std::find(std::begin(variants), std::end(variants), cfg.variant) == std::end(variants))
        throw ConfigError("unknown controller variant '" + cfg.variant + "'");
    static const char* scenarios[] = {"single_run", "n_sweep", "convergence_study",
                                      "bounds_report", "cascade"};
    if (std::find(std::begin(scenarios), std::end(scenarios), cfg.scenario) ==
        std::end(scenarios))
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
    if (cfg.has_nm && (cfg.n <= 0 || cfg.m <= 0))
        throw ConfigError("nm system requires positive n and m");
    // Mutual consistency of variant and declared systems.
    if ((cfg.variant == "micro_exact" || cfg.variant == "macro_kernels_micro_meas" ||
         cfg.variant == "macro_kernels_macro_meas" || cfg.variant == "averaged_macro") &&
        !cfg.has_nm && cfg.scenario != "bounds_report")
        throw ConfigError("variant '" + cfg.variant + "' requires an [nm] system");
    if ((cfg.variant == "continuum_exact" || cfg.variant == "macro_kernels_micro_meas" ||
         cfg.variant == "macro_kernels_macro_meas") &&
        !cfg.has_continuum && !cfg.has_nm)
        throw ConfigError("variant '" + cfg.variant + "' requires continuum parameters");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace hyperctl
