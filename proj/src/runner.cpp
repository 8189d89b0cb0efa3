#include "hyperctl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "hyperctl/io.hpp"
#include "hyperctl/lift.hpp"
#include "hyperctl/power_series.hpp"
#include "hyperctl/rk45.hpp"
#include "hyperctl/stability.hpp"

namespace hyperctl {

namespace fs = std::filesystem;

Field2 continuum_initial(const std::string& expr, int ne, int nx) {
    Expr e = Expr::parse(expr.empty() ? "0" : expr);
    Field2 f(ne, nx);
    Axis xa = space_axis(nx), ea = ensemble_axis(ne);
    ExprEnv env;
    for (int i = 0; i < ne; ++i) {
        env.y = ea[i];
        env.eta = ea[i];
        for (int k = 0; k < nx; ++k) {
            env.x = xa[k];
            f(i, k) = e.eval(env);
        }
    }
    return f;
}

Field2 micro_initial(const std::string& expr_nm, const std::string& expr_cont, int k, int nx) {
    if (!expr_nm.empty()) {
        Expr e = Expr::parse(expr_nm);
        Field2 f(k, nx);
        Axis xa = space_axis(nx);
        ExprEnv env;
        env.n = k;
        env.m = k;
        for (int i = 0; i < k; ++i) {
            env.i = i + 1;
            env.j = i + 1;
            for (int q = 0; q < nx; ++q) {
                env.x = xa[q];
                f(i, q) = e.eval(env);
            }
        }
        return f;
    }
    // Cell means of the continuum expression (the adjoint projection).
    const int ne_fine = std::max(8 * k, 64);
    Field2 fine = continuum_initial(expr_cont, ne_fine, nx);
    Field2 f(k, nx);
    Axis ea = ensemble_axis(ne_fine);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < ne_fine; ++i)
        counts[std::min(k - 1, static_cast<int>(ea[i] * k))]++;
    for (int q = 0; q < nx; ++q) {
        std::vector<double> acc(k, 0.0);
        for (int i = 0; i < ne_fine; ++i)
            acc[std::min(k - 1, static_cast<int>(ea[i] * k))] += fine(i, q);
        for (int c = 0; c < k; ++c) f(c, q) = acc[c] / counts[c];
    }
    return f;
}

ContinuumParams averaged_to_continuum(const AveragedParams& a, int nx) {
    ContinuumParams p;
    p.grid.nx = nx;
    p.grid.ne = 1;
    Axis xa = space_axis(nx);
    p.lambda = Field2(nx, 1);
    p.lambda_x = Field2(nx, 1);
    p.mu = Field2(nx, 1);
    p.mu_x = Field2(nx, 1);
    p.sigma = Field3(nx, 1, 1);
    p.W = Field3(nx, 1, 1);
    p.theta = Field3(nx, 1, 1);
    p.psi = Field3(nx, 1, 1);
    p.Q = Field2(1, 1);
    p.R = Field2(1, 1);
    for (int k = 0; k < nx; ++k) {
        double x = xa[k];
        p.lambda(k, 0) = a.lambda_bar(x);
        p.lambda_x(k, 0) = a.lambda_bar.deriv(x);
        p.mu(k, 0) = a.mu_bar(x);
        p.mu_x(k, 0) = a.mu_bar.deriv(x);
        p.sigma(k, 0, 0) = a.sigma_bar(x);
        p.W(k, 0, 0) = a.w_bar(x);
        p.theta(k, 0, 0) = a.theta_bar(x);
        p.psi(k, 0, 0) = 0.0;
    }
    p.Q(0, 0) = a.q_bar;
    p.R(0, 0) = a.r_bar;
    return p;
}

std::pair<Trajectory, Trajectory> simulate_cascade(const NmParams& micro, const Field2& u0m,
                                                   const Field2& v0m,
                                                   const ContinuumParams& companion,
                                                   const Field2& u0c, const Field2& v0c,
                                                   const MacroMeasFeedback& law,
                                                   const SimConfig& cfg) {
    const int nx = cfg.grid.nx;
    const int nec = companion.grid.ne;
    if (companion.grid.nx != nx)
        throw std::invalid_argument("simulate_cascade: companion x-grid != sim grid");
    NmRhsCore mc(sample_nm(micro, nx), cfg.scheme);
    ContinuumRhsCore cc(&companion, cfg.scheme);
    const int sz_m = mc.state_size(), sz_c = cc.state_size();

    std::vector<double> y(sz_m + sz_c);
    mc.pack(u0m, v0m, y.data());
    cc.pack(u0c, v0c, y.data() + sz_m);

    Field2 um, vm, uc, vc, mu, mv;
    std::vector<double> U;
    std::vector<double> Ulift;

    auto control_from_companion = [&](Field2& ucf, Field2& vcf) {
        // ensemble-averaged macro measurements of the companion state
        Field2 um_meas(1, nx), vm_meas(1, nx);
        for (int k = 0; k < nx; ++k) {
            double su = 0.0, sv = 0.0;
            for (int i = 0; i < nec; ++i) {
                su += ucf(i, k);
                sv += vcf(i, k);
            }
            um_meas(0, k) = su / nec;
            vm_meas(0, k) = sv / nec;
        }
        // constant-in-ensemble fields on the law's measurement grid
        int neL = law.measurement_ne();
        Field2 umf(neL, nx), vmf(neL, nx);
        for (int i = 0; i < neL; ++i)
            for (int k = 0; k < nx; ++k) {
                umf(i, k) = um_meas(0, k);
                vmf(i, k) = vm_meas(0, k);
            }
        law.eval_macro(umf, vmf, U);
    };

    auto rhs = [&](double, const double* yy, double* dy) {
        cc.unpack(yy + sz_m, uc, vc);
        control_from_companion(uc, vc);
        Ulift = lift(U, nec);
        cc.finalize_boundary(uc, vc, Ulift);
        cc.rhs(uc, vc, dy + sz_m);
        mc.unpack(yy, um, vm);
        mc.finalize_boundary(um, vm, U);
        mc.rhs(um, vm, dy);
    };

    Dopri5 stepper(sz_m + sz_c, rhs, cfg.rtol, cfg.atol);
    stepper.initial_dt_hint =
        0.25 / ((nx - 1) * std::max({1e-12, mc.max_speed(), cc.max_speed()}));

    Trajectory tm, tc;
    tm.kind = StateKind::Nm;
    tc.kind = StateKind::Continuum;
    auto record = [&](double t) {
        mc.unpack(y.data(), um, vm);
        cc.unpack(y.data() + sz_m, uc, vc);
        control_from_companion(uc, vc);
        Ulift = lift(U, nec);
        cc.finalize_boundary(uc, vc, Ulift);
        mc.finalize_boundary(um, vm, U);
        StateField sm{StateKind::Nm, um, vm, t};
        StateField sc{StateKind::Continuum, uc, vc, t};
        tm.times.push_back(t);
        tm.states.push_back(sm);
        tm.controls.push_back(U);
        tm.norms.push_back(state_norm(sm));
        tm.control_norms.push_back(control_norm(U));
        tc.times.push_back(t);
        tc.states.push_back(sc);
        tc.controls.push_back(U);
        tc.norms.push_back(state_norm(sc));
        tc.control_norms.push_back(control_norm(U));
    };
    record(0.0);
    double blow_limit = 1e6 * std::max({tm.norms[0], tc.norms[0], 1e-12});
    double t = 0.0;
    int nout = static_cast<int>(std::round(cfg.grid.t_final / cfg.grid.output_dt));
    for (int k = 1; k <= nout; ++k) {
        double target = std::min(cfg.grid.t_final, k * cfg.grid.output_dt);
        bool ok = true;
        try {
            ok = stepper.integrate(t, y, target, [&](double tt, const std::vector<double>& yy) {
                for (double w : yy)
                    if (!std::isfinite(w) || std::abs(w) > blow_limit) {
                        tm.blew_up = tc.blew_up = true;
                        tm.blowup_time = tc.blowup_time = tt;
                        return false;
                    }
                return true;
            });
        } catch (const IntegratorError& e) {
            tm.blew_up = tc.blew_up = true;
            tm.blowup_time = tc.blowup_time = e.t;
            ok = false;
        }
        if (!ok) break;
        record(t);
    }
    tm.steps = tc.steps = stepper.steps_accepted;
    return {tm, tc};
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HYPERSTEP_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return w;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 2;
}

namespace {

struct RunPieces {
    ExperimentConfig cfg;
    fs::path out;
    int workers = 1;

    NmParams nm(int k) const { return make_nm_params(k, k, cfg.nm); }

    ContinuumParams continuum_at(int nx, int ne) const {
        if (cfg.has_continuum) {
            EnsembleGrid g = cfg.grid;
            g.nx = nx;
            g.ne = ne;
            return make_expr_model(cfg.continuum)->sample(g);
        }
        EnsembleGrid g = cfg.grid;
        g.nx = nx;
        g.ne = ne;
        return build_continuum(nm(cfg.n), g);
    }

    ContinuumKernels solve_kernels(int out_nx, int out_ne) const {
        if (cfg.kernel_method == KernelMethod::PowerSeries) {
            EnsembleGrid pg = cfg.grid;
            pg.nx = 65;
            pg.ne = 48;
            ContinuumParams pp = cfg.has_continuum
                                     ? make_expr_model(cfg.continuum)->sample(pg)
                                     : build_continuum(nm(cfg.n), pg);
            PowerSeriesOptions po;
            po.order = cfg.ps_order;
            return solve_continuum_kernels_ps(pp, out_nx, out_ne, po);
        }
        ContinuumParams kp = continuum_at(cfg.kernel_nx, cfg.kernel_ne);
        KernelSolveOptions ko;
        ko.tol = cfg.kernel_tol;
        ContinuumKernels ker = solve_continuum_kernels_sa(kp, ko);
        return ker;
    }
};

void emit_trajectory(const fs::path& dir, const std::string& stem, const Trajectory& traj) {
    write_trajectory_csv((dir / (stem + "_norms.csv")).string(), traj);
    write_control_csv((dir / (stem + "_control.csv")).string(), traj);
    if (!traj.states.empty())
        write_state_snapshot((dir / (stem + "_final_state.snap")).string(), traj.states.back());
}

int scenario_single_run(const RunPieces& rp) {
    const ExperimentConfig& cfg = rp.cfg;
    nlohmann::json summary;
    if (cfg.variant == "open_loop" || cfg.variant == "continuum_exact") {
        ContinuumParams p = rp.continuum_at(cfg.grid.nx, cfg.grid.ne);
        Field2 u0 = continuum_initial(cfg.u0, cfg.grid.ne, cfg.grid.nx);
        Field2 v0 = continuum_initial(cfg.v0, cfg.grid.ne, cfg.grid.nx);
        SimConfig sc;
        sc.grid = cfg.grid;
        std::unique_ptr<ContinuumBsFeedback> fb;
        ContinuumKernels ker;
        if (cfg.variant == "continuum_exact") {
            ker = rp.solve_kernels(cfg.kernel_nx, cfg.kernel_ne);
            fb = std::make_unique<ContinuumBsFeedback>(ker, p.R, cfg.grid.nx, cfg.grid.ne);
            write_kernel_snapshot((rp.out / "kernels.snap").string(), ker);
            write_kernel_slice_fixed_ensemble((rp.out / "kernel_slice.csv").string(), ker,
                                              ker.ne / 2, ker.ne / 2);
        }
        Trajectory traj = simulate_continuum(p, u0, v0, fb.get(), sc);
        emit_trajectory(rp.out, "continuum", traj);
        DecayFit fit = decay_fit(traj, cfg.grid.t_final / 2, cfg.grid.t_final);
        summary["classification"] = to_string(fit.cls);
        summary["omega"] = fit.omega;
        summary["final_norm"] = traj.final_norm();
        summary["blew_up"] = traj.blew_up;
    } else {
        // micro run under the selected law
        NmParams np = rp.nm(cfg.n);
        Field2 u0 = micro_initial(cfg.u0_nm, cfg.u0, cfg.n, cfg.grid.nx);
        Field2 v0 = micro_initial(cfg.v0_nm, cfg.v0, cfg.m, cfg.grid.nx);
        SimConfig sc;
        sc.grid = cfg.grid;
        std::unique_ptr<Feedback> fb;
        if (cfg.variant == "micro_exact") {
            NmKernels nk = solve_nm_kernels(np, cfg.kernel_nx);
            fb = std::make_unique<MicroGainFeedback>(
                MicroGainFeedback::from_nm_kernels(nk, np.R, cfg.grid.nx));
        } else if (cfg.variant == "macro_kernels_micro_meas") {
            ContinuumKernels ker = rp.solve_kernels(cfg.kernel_nx, cfg.kernel_ne);
            MatrixGains g = sample_kernel_matrix(ker, cfg.n, cfg.m, space_axis(cfg.grid.nx));
            fb = std::make_unique<MicroGainFeedback>(std::move(g), np.R, cfg.grid.nx);
        } else if (cfg.variant == "macro_kernels_macro_meas") {
            ContinuumKernels ker = rp.solve_kernels(cfg.kernel_nx, cfg.kernel_ne);
            ContinuumParams p = rp.continuum_at(cfg.grid.nx, cfg.grid.ne);
            RowGains g = sample_kernel_rows(ker, p.R, cfg.m, space_axis(cfg.grid.nx),
                                            cfg.grid.ne);
            auto mfb = std::make_unique<MacroMeasFeedback>(std::move(g), cfg.n, cfg.grid.nx);
            if (cfg.noise_eps > 0.0) {
                Field2 gu(cfg.grid.ne, cfg.grid.nx), gv(cfg.grid.ne, cfg.grid.nx);
                Axis xa = space_axis(cfg.grid.nx), ea = ensemble_axis(cfg.grid.ne);
                for (int i = 0; i < cfg.grid.ne; ++i)
                    for (int k = 0; k < cfg.grid.nx; ++k) {
                        gu(i, k) = std::sin(3.0 * M_PI * ea[i] + 2.0 * M_PI * xa[k]);
                        gv(i, k) = std::cos(2.0 * M_PI * ea[i] + 3.0 * M_PI * xa[k]);
                    }
                mfb->set_perturbation(cfg.noise_eps, std::move(gu), std::move(gv));
            }
            fb = std::move(mfb);
        } else if (cfg.variant == "averaged_macro") {
            throw ConfigError("averaged_macro runs through the cascade scenario");
        }
        Trajectory traj = simulate_nm(np, u0, v0, fb.get(), sc);
        emit_trajectory(rp.out, "nm", traj);
        DecayFit fit = decay_fit(traj, cfg.grid.t_final / 2, cfg.grid.t_final);
        summary["classification"] = to_string(fit.cls);
        summary["omega"] = fit.omega;
        summary["final_norm"] = traj.final_norm();
        summary["blew_up"] = traj.blew_up;
    }
    std::ofstream((rp.out / "summary.json").string()) << summary.dump(2) << '\n';
    return 0;
}

int scenario_cascade(const RunPieces& rp) {
    const ExperimentConfig& cfg = rp.cfg;
    NmParams np = rp.nm(cfg.n);
    Field2 u0m = micro_initial(cfg.u0_nm, cfg.u0, cfg.n, cfg.grid.nx);
    Field2 v0m = micro_initial(cfg.v0_nm, cfg.v0, cfg.m, cfg.grid.nx);
    SimConfig sc;
    sc.grid = cfg.grid;

    // autonomous reference
    Trajectory auto_traj = simulate_nm(np, u0m, v0m, nullptr, sc);
    emit_trajectory(rp.out, "autonomous", auto_traj);

    // continuum companion
    ContinuumParams comp = rp.continuum_at(cfg.grid.nx, cfg.grid.ne);
    ContinuumKernels ker = rp.solve_kernels(cfg.kernel_nx, cfg.kernel_ne);
    RowGains rg = sample_kernel_rows(ker, comp.R, cfg.m, space_axis(cfg.grid.nx), cfg.grid.ne);
    MacroMeasFeedback law(std::move(rg), cfg.n, cfg.grid.nx);
    Field2 u0c = continuum_initial(cfg.u0, cfg.grid.ne, cfg.grid.nx);
    Field2 v0c = continuum_initial(cfg.v0, cfg.grid.ne, cfg.grid.nx);
    auto [micro1, comp1] = simulate_cascade(np, u0m, v0m, comp, u0c, v0c, law, sc);
    emit_trajectory(rp.out, "continuum_meas", micro1);

    // averaged companion
    AveragedParams avg = build_averaged(np);
    ContinuumParams compA = averaged_to_continuum(avg, cfg.grid.nx);
    Kernel2x2 k2 = solve_2x2_kernels(avg, std::max(65, cfg.kernel_nx));
    RowGains rga;
    rga.m = cfg.m;
    rga.ne = 1;
    rga.xi = space_axis(cfg.grid.nx);
    rga.Rtilde = Field2(cfg.m, 1);
    rga.Krows = Field3(cfg.m, cfg.grid.nx, 1);
    rga.Lrows = Field3(cfg.m, cfg.grid.nx, 1);
    Axis k2x = space_axis(k2.nx);
    for (int i = 0; i < cfg.m; ++i) {
        rga.Rtilde(i, 0) = avg.r_bar;
        for (int k = 0; k < cfg.grid.nx; ++k) {
            double xi = rga.xi[k];
            rga.Krows(i, k, 0) = k2x.lerp(k2.K.row(k2.nx - 1), xi);
            rga.Lrows(i, k, 0) = k2x.lerp(k2.L.row(k2.nx - 1), xi);
        }
    }
    MacroMeasFeedback lawA(std::move(rga), cfg.n, cfg.grid.nx);
    Field2 u0a(1, cfg.grid.nx), v0a(1, cfg.grid.nx);
    {
        Field2 full_u = continuum_initial(cfg.u0, 8, cfg.grid.nx);
        Field2 full_v = continuum_initial(cfg.v0, 8, cfg.grid.nx);
        for (int k = 0; k < cfg.grid.nx; ++k) {
            double su = 0, sv = 0;
            for (int i = 0; i < 8; ++i) {
                su += full_u(i, k);
                sv += full_v(i, k);
            }
            u0a(0, k) = su / 8;
            v0a(0, k) = sv / 8;
        }
    }
    auto [micro2, comp2] = simulate_cascade(np, u0m, v0m, compA, u0a, v0a, lawA, sc);
    emit_trajectory(rp.out, "averaged_meas", micro2);

    nlohmann::json summary;
    summary["autonomous_final_norm"] = auto_traj.final_norm();
    summary["continuum_meas_final_norm"] = micro1.final_norm();
    summary["averaged_meas_final_norm"] = micro2.final_norm();
    summary["epsilon_bar"] = avg.eps_bar;
    double max_comp_dev = 0.0;
    for (const auto& U : micro2.controls)
        for (double u : U) max_comp_dev = std::max(max_comp_dev, std::abs(u - U[0]));
    summary["averaged_component_spread"] = max_comp_dev;
    std::ofstream((rp.out / "summary.json").string()) << summary.dump(2) << '\n';
    return 0;
}

int scenario_sweep(const RunPieces& rp) {
    const ExperimentConfig& cfg = rp.cfg;
    ContinuumKernels ker = rp.solve_kernels(cfg.kernel_nx, cfg.kernel_ne);
    std::vector<int> ns = cfg.n_list;
    if (ns.empty()) throw ConfigError("n_sweep requires n_list");

    struct Entry {
        int n;
        DecayFit fit;
        double final_norm;
        bool blew_up;
    };
    std::vector<Entry> entries(ns.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (;;) {
            size_t k = next.fetch_add(1);
            if (k >= ns.size()) return;
            int n = ns[k];
            NmParams np = make_nm_params(n, n, cfg.nm);
            Field2 u0 = micro_initial(cfg.u0_nm, cfg.u0, n, cfg.grid.nx);
            Field2 v0 = micro_initial(cfg.v0_nm, cfg.v0, n, cfg.grid.nx);
            MatrixGains g = sample_kernel_matrix(ker, n, n, space_axis(cfg.grid.nx));
            MicroGainFeedback fb(std::move(g), np.R, cfg.grid.nx);
            SimConfig sc;
            sc.grid = cfg.grid;
            Trajectory traj = simulate_nm(np, u0, v0, &fb, sc);
            write_trajectory_csv((rp.out / ("sweep_n" + std::to_string(n) + "_norms.csv")).string(),
                                 traj);
            entries[k] = {n, decay_fit(traj, cfg.grid.t_final / 2, cfg.grid.t_final),
                          traj.final_norm(), traj.blew_up};
        }
    };
    std::vector<std::thread> pool;
    int w = std::max(1, std::min<int>(rp.workers, static_cast<int>(ns.size())));
    for (int t = 0; t < w; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();

    nlohmann::json summary = nlohmann::json::array();
    for (const auto& e : entries) {
        summary.push_back({{"n", e.n},
                           {"classification", to_string(e.fit.cls)},
                           {"omega", std::isfinite(e.fit.omega) ? e.fit.omega : 1e308},
                           {"final_norm", e.final_norm},
                           {"blew_up", e.blew_up}});
    }
    std::ofstream((rp.out / "sweep_summary.json").string()) << summary.dump(2) << '\n';
    return 0;
}

int scenario_convergence(const RunPieces& rp) {
    const ExperimentConfig& cfg = rp.cfg;
    std::vector<int> ns = cfg.n_list;
    if (ns.empty()) throw ConfigError("convergence_study requires n_list");
    std::vector<double> gaps;
    if (cfg.study == "solution_gap") {
        ContinuumParams p = rp.continuum_at(cfg.grid.nx, cfg.grid.ne);
        Field2 u0 = continuum_initial(cfg.u0, cfg.grid.ne, cfg.grid.nx);
        Field2 v0 = continuum_initial(cfg.v0, cfg.grid.ne, cfg.grid.nx);
        SimConfig sc;
        sc.grid = cfg.grid;
        Trajectory tc = simulate_continuum(p, u0, v0, nullptr, sc);
        for (int n : ns) {
            NmParams np = make_nm_params(n, n, cfg.nm);
            Field2 u0m = micro_initial("", cfg.u0, n, cfg.grid.nx);
            Field2 v0m = micro_initial("", cfg.v0, n, cfg.grid.nx);
            Trajectory tn = simulate_nm(np, u0m, v0m, nullptr, sc);
            gaps.push_back(solution_gap(tn, tc, cfg.grid.ne).max_gap);
        }
    } else if (cfg.study == "kernel_gap") {
        EnsembleGrid kg = cfg.grid;
        kg.nx = cfg.kernel_nx;
        kg.ne = cfg.kernel_ne;
        ContinuumParams kp = rp.continuum_at(kg.nx, kg.ne);
        KernelSolveOptions ko;
        ko.tol = cfg.kernel_tol;
        ContinuumKernels ck = solve_continuum_kernels_sa(kp, ko);
        for (int n : ns) {
            NmKernels nk = solve_nm_kernels(make_nm_params(n, n, cfg.nm), cfg.kernel_nx, ko);
            gaps.push_back(kernel_gap(nk, ck).max());
        }
    } else if (cfg.study == "control_gap") {
        // distance of the exact and continuum-sampled laws on one state
        EnsembleGrid kg = cfg.grid;
        kg.nx = cfg.kernel_nx;
        kg.ne = cfg.kernel_ne;
        ContinuumParams kp = rp.continuum_at(kg.nx, kg.ne);
        KernelSolveOptions ko;
        ko.tol = cfg.kernel_tol;
        ContinuumKernels ck = solve_continuum_kernels_sa(kp, ko);
        for (int n : ns) {
            NmParams np = make_nm_params(n, n, cfg.nm);
            Field2 u0 = micro_initial("", cfg.u0, n, cfg.grid.nx);
            Field2 v0 = micro_initial("", cfg.v0, n, cfg.grid.nx);
            StateField s{StateKind::Nm, u0, v0, 0.0};
            NmKernels nk = solve_nm_kernels(np, cfg.kernel_nx, ko);
            auto exact = control_micro(MicroGainFeedback::from_nm_kernels(nk, np.R, cfg.grid.nx), s);
            MatrixGains g = sample_kernel_matrix(ck, n, n, space_axis(cfg.grid.nx));
            auto approx = control_micro(MicroGainFeedback(std::move(g), np.R, cfg.grid.nx), s);
            double d = 0.0;
            for (size_t q = 0; q < exact.size(); ++q) {
                double e = exact[q] - approx[q];
                d += e * e;
            }
            gaps.push_back(std::sqrt(d / exact.size()));
        }
    } else {
        throw ConfigError("unknown study '" + cfg.study + "'");
    }
    bool decreasing = true;
    for (size_t k = 1; k < gaps.size(); ++k)
        if (!(gaps[k] < gaps[k - 1])) decreasing = false;
    nlohmann::json j;
    j["study"] = cfg.study;
    j["n_list"] = ns;
    j["gaps"] = gaps;
    j["strictly_decreasing"] = decreasing;
    std::ofstream((rp.out / "study.json").string()) << j.dump(2) << '\n';
    std::ofstream csv((rp.out / "study.csv").string());
    csv << "# columns: n [-], gap [weighted L2]\nn,gap\n";
    for (size_t k = 0; k < gaps.size(); ++k) csv << ns[k] << ',' << fmt_num(gaps[k]) << '\n';
    return 0;
}

int scenario_bounds(const RunPieces& rp) {
    const ExperimentConfig& cfg = rp.cfg;
    ContinuumParams p = rp.continuum_at(cfg.kernel_nx, cfg.kernel_ne);
    ValidationReport rep = validate_continuum(p);
    SaBounds b = compute_sa_bounds(p);
    nlohmann::json j;
    j["validation"] = rep.to_string();
    j["eq20_value"] = rep.eq20_value;
    j["m_lambda"] = b.m_lambda;
    j["m_mu"] = b.m_mu;
    j["M_mu"] = b.M_mu;
    j["M_B"] = b.M_B;
    j["M"] = b.M;
    j["M_KL"] = b.M_KL;
    j["gamma"] = b.gamma;
    j["m_phi"] = b.m_phi;
    j["M_Phi"] = b.M_Phi;
    nlohmann::json env = nlohmann::json::array();
    for (int l = 0; l < 25; ++l) env.push_back(b.envelope(l));
    j["envelope"] = env;
    std::ofstream((rp.out / "bounds.json").string()) << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg0, const RunOverrides& ov) {
    ExperimentConfig cfg = cfg0;
    if (!ov.outdir.empty()) cfg.outdir = ov.outdir;
    if (!ov.kernel_method.empty())
        cfg.kernel_method = ov.kernel_method == "sa" ? KernelMethod::SuccessiveApprox
                                                     : KernelMethod::PowerSeries;
    if (ov.grid_nx > 0) cfg.grid.nx = ov.grid_nx;
    if (ov.grid_ne > 0) cfg.grid.ne = ov.grid_ne;

    RunPieces rp{cfg, fs::path(cfg.outdir), resolve_workers(ov.workers)};
    fs::create_directories(rp.out);
    write_manifest((rp.out / "manifest.json").string(), config_hash(cfg.raw_text),
                   cfg.kernel_method == KernelMethod::PowerSeries
                       ? "power_series(order " + std::to_string(cfg.ps_order) + ")"
                       : "successive_approximations",
                   cfg.grid.nx, cfg.grid.ne, cfg.seed, rp.workers);

    try {
        if (cfg.scenario == "single_run") return scenario_single_run(rp);
        if (cfg.scenario == "cascade") return scenario_cascade(rp);
        if (cfg.scenario == "n_sweep") return scenario_sweep(rp);
        if (cfg.scenario == "convergence_study") return scenario_convergence(rp);
        if (cfg.scenario == "bounds_report") return scenario_bounds(rp);
    } catch (const SolverError&) {
        return 3;
    } catch (const GeometryError&) {
        return 3;
    } catch (const IntegratorError&) {
        return 3;
    }
    throw ConfigError("unhandled scenario " + cfg.scenario);
}

}  // namespace hyperctl
