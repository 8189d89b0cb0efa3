#include <doctest.h>

#include <cmath>

#include "hyperctl/presets.hpp"
#include "hyperctl/rk45.hpp"
#include "hyperctl/runner.hpp"
#include "hyperctl/sim.hpp"

using namespace hyperctl;

namespace {

NmExprSpec decoupled_transport() {
    NmExprSpec s;
    s.lambda = "1";
    s.mu = "2 - i/(m+1)";
    s.sigma = "0";
    s.w = "0";
    s.theta = "0";
    s.psi = "0";
    s.q = "0";
    s.r = "0";
    return s;
}

}  // namespace

TEST_CASE("adaptive integrator hits a smooth decay") {
    Dopri5 stepper(1, [](double, const double* y, double* dy) { dy[0] = -y[0]; }, 1e-9, 1e-9);
    std::vector<double> y{1.0};
    double t = 0.0;
    stepper.integrate(t, y, 2.0);
    CHECK(y[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-7));
}

TEST_CASE("pure transport moves the profile right") {
    NmParams p = make_nm_params(1, 1, decoupled_transport());
    EnsembleGrid g{257, 2, 0.5, 0.1};
    SimConfig sc;
    sc.grid = g;
    Field2 u0(1, g.nx), v0(1, g.nx, 0.0);
    Axis xa = space_axis(g.nx);
    for (int k = 0; k < g.nx; ++k) u0(0, k) = xa[k];
    Trajectory traj = simulate_nm(p, u0, v0, nullptr, sc);
    const StateField& s = traj.states.back();
    double err2 = 0.0;
    for (int k = 0; k < g.nx; ++k) {
        double expect = xa[k] >= 0.5 ? xa[k] - 0.5 : 0.0;
        double d = s.u(0, k) - expect;
        err2 += d * d / (g.nx - 1);
    }
    CHECK(std::sqrt(err2) < 5e-2);
}

TEST_CASE("zero data stays zero") {
    NmParams p = make_nm_params(2, 2, presets::example1_nm());
    EnsembleGrid g{33, 4, 1.0, 0.25};
    SimConfig sc;
    sc.grid = g;
    Field2 u0(2, g.nx, 0.0), v0(2, g.nx, 0.0);
    Trajectory traj = simulate_nm(p, u0, v0, nullptr, sc);
    for (double n : traj.norms) CHECK(n == 0.0);

    ContinuumParams cp = make_expr_model(presets::example1_continuum())->sample(g);
    Field2 u0c(g.ne, g.nx, 0.0), v0c(g.ne, g.nx, 0.0);
    Trajectory tc = simulate_continuum(cp, u0c, v0c, nullptr, sc);
    for (double n : tc.norms) CHECK(n == 0.0);
}

TEST_CASE("outflow-only dynamics dissipate the norm") {
    NmParams p = make_nm_params(2, 3, decoupled_transport());
    EnsembleGrid g{65, 4, 1.5, 0.1};
    SimConfig sc;
    sc.grid = g;
    Field2 u0(2, g.nx), v0(3, g.nx);
    Axis xa = space_axis(g.nx);
    for (int k = 0; k < g.nx; ++k) {
        double b = std::sin(M_PI * xa[k]);
        for (int i = 0; i < 2; ++i) u0(i, k) = b;
        for (int j = 0; j < 3; ++j) v0(j, k) = b * b;
    }
    Trajectory traj = simulate_nm(p, u0, v0, nullptr, sc);
    for (size_t k = 1; k < traj.norms.size(); ++k) CHECK(traj.norms[k] <= traj.norms[k - 1] + 1e-12);
}

TEST_CASE("terminal norm is grid-converged to a few percent") {
    EnsembleGrid coarse{65, 12, 1.0, 0.25}, fine{129, 12, 1.0, 0.25};
    auto run = [&](const EnsembleGrid& g) {
        ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(g);
        Field2 u0 = continuum_initial(presets::example1_u0(), g.ne, g.nx);
        Field2 v0 = continuum_initial(presets::example1_v0(), g.ne, g.nx);
        SimConfig sc;
        sc.grid = g;
        return simulate_continuum(p, u0, v0, nullptr, sc).final_norm();
    };
    double a = run(coarse), b = run(fine);
    CHECK(std::abs(a - b) / b < 0.05);
}

TEST_CASE("micro run lifts onto the piecewise continuum run") {
    const int n = 2;
    EnsembleGrid g{65, 8, 1.0, 0.25};
    NmParams p = make_nm_params(n, n, presets::example1_nm());
    Field2 u0 = micro_initial("", presets::example1_u0(), n, g.nx);
    Field2 v0 = micro_initial("", presets::example1_v0(), n, g.nx);
    SimConfig sc;
    sc.grid = g;
    Trajectory tm = simulate_nm(p, u0, v0, nullptr, sc);

    ContinuumParams lifted = lift_params(p, g);
    Field2 u0c(g.ne, g.nx), v0c(g.ne, g.nx);
    Axis ea = ensemble_axis(g.ne);
    for (int i = 0; i < g.ne; ++i) {
        int c = std::min(n - 1, static_cast<int>(ea[i] * n));
        for (int k = 0; k < g.nx; ++k) {
            u0c(i, k) = u0(c, k);
            v0c(i, k) = v0(c, k);
        }
    }
    Trajectory tc = simulate_continuum(lifted, u0c, v0c, nullptr, sc);
    GapCurve gap = solution_gap(tm, tc, g.ne);
    CHECK(gap.max_gap < 1e-4 * tc.norms.front());
}

TEST_CASE("gap of a trajectory against itself vanishes") {
    EnsembleGrid g{33, 6, 0.5, 0.25};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(g);
    Field2 u0 = continuum_initial(presets::example1_u0(), g.ne, g.nx);
    Field2 v0 = continuum_initial(presets::example1_v0(), g.ne, g.nx);
    SimConfig sc;
    sc.grid = g;
    Trajectory t1 = simulate_continuum(p, u0, v0, nullptr, sc);
    for (size_t k = 0; k < t1.times.size(); ++k)
        CHECK(state_distance(t1.states[k], t1.states[k]) == 0.0);
}

TEST_CASE("second-order scheme sharpens smooth transport") {
    NmParams p = make_nm_params(1, 1, decoupled_transport());
    EnsembleGrid g{129, 2, 0.4, 0.2};
    Field2 u0(1, g.nx), v0(1, g.nx, 0.0);
    Axis xa = space_axis(g.nx);
    for (int k = 0; k < g.nx; ++k) u0(0, k) = std::sin(M_PI * xa[k]) * std::sin(M_PI * xa[k]);
    auto err = [&](SimConfig::Scheme scheme) {
        SimConfig sc;
        sc.grid = g;
        sc.scheme = scheme;
        Trajectory t = simulate_nm(p, u0, v0, nullptr, sc);
        double e2 = 0.0;
        for (int k = 0; k < g.nx; ++k) {
            double x0 = xa[k] - 0.4;
            double expect = x0 >= 0.0 ? std::pow(std::sin(M_PI * x0), 2) : 0.0;
            double d = t.states.back().u(0, k) - expect;
            e2 += d * d / (g.nx - 1);
        }
        return std::sqrt(e2);
    };
    double e1 = err(SimConfig::Scheme::FirstOrderUpwind);
    double e2 = err(SimConfig::Scheme::SecondOrderUpwindLimited);
    CHECK(e2 < e1);
}

TEST_CASE("blow-up is detected and classified") {
    // strong anti-damping through the boundary reflection
    NmExprSpec s = decoupled_transport();
    s.q = "4";
    s.r = "4";
    NmParams p = make_nm_params(1, 1, s);
    EnsembleGrid g{65, 2, 8.0, 0.25};
    SimConfig sc;
    sc.grid = g;
    sc.blowup_factor = 1e4;
    Field2 u0(1, g.nx, 1.0), v0(1, g.nx, 1.0);
    Trajectory traj = simulate_nm(p, u0, v0, nullptr, sc);
    CHECK(traj.blew_up);
}
