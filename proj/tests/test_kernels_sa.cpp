#include <doctest.h>

#include <cmath>

#include "hyperctl/kernels.hpp"
#include "hyperctl/lift.hpp"
#include "hyperctl/presets.hpp"

using namespace hyperctl;

namespace {

ContinuumParams example1_params(int nx, int ne) {
    EnsembleGrid g{nx, ne, 1.0, 0.1};
    return make_expr_model(presets::example1_continuum())->sample(g);
}

ContinuumExprSpec zero_coupling() {
    ContinuumExprSpec s = presets::example1_continuum();
    s.sigma = "0";
    s.w = "0";
    s.theta = "0";
    s.psi = "0";
    return s;
}

}  // namespace

TEST_CASE("zero coupling gives zero kernels") {
    EnsembleGrid g{21, 8, 1.0, 0.1};
    ContinuumParams p = make_expr_model(zero_coupling())->sample(g);
    ContinuumKernels ker = solve_continuum_kernels_sa(p);
    double worst = 0.0;
    for (size_t q = 0; q < ker.K.size(); ++q)
        worst = std::max({worst, std::abs(ker.K.data()[q]), std::abs(ker.L.data()[q])});
    CHECK(worst < 1e-12);
    CHECK(ker.iterations <= 3);
}

TEST_CASE("first-example kernels: boundary data and convergence") {
    ContinuumParams p = example1_params(41, 12);
    ContinuumKernels ker = solve_continuum_kernels_sa(p);
    CHECK(ker.iterations < 60);
    CHECK(ker.final_update < 1e-6);

    Axis xa = space_axis(ker.nx), ea = ensemble_axis(ker.ne);
    // L on the diagonal face is identically one for this system (the
    // corner k = 0 carries the overdetermined reflection datum instead)
    for (int k = 5; k < ker.nx; k += 5)
        for (int i = 0; i < ker.ne; i += 3)
            for (int j = 0; j < ker.ne; j += 3) {
                if (i == j) continue;
                CHECK(ker.L(k, k, i, j) == doctest::Approx(1.0).epsilon(1e-6));
            }
    // K on the diagonal face matches -theta/(lambda + mu)
    for (int k = 0; k < ker.nx; k += 7)
        for (int i = 0; i < ker.ne; i += 4)
            for (int j = 0; j < ker.ne; j += 4) {
                double x = xa[k], eta = ea[i], zeta = ea[j];
                double expect = -(x + 1.0) * eta * (zeta + 0.5) / (3.0 - eta);
                CHECK(ker.K(k, k, i, j) == doctest::Approx(expect).epsilon(1e-8));
            }
    // extrapolated corner value at (1,1,1,1)
    CHECK(ker.evaluator(0, 1.0, 1.0, 1.0, 1.0) == doctest::Approx(-1.5).epsilon(2e-2));

    // residual diagnostics come out small on this grid
    CHECK(ker.bc_res_K_diag < 1e-8);
    CHECK(ker.bc_res_L_diag < 1e-8);
    CHECK(ker.bc_res_L_xi0 < 1e-5);
    CHECK(ker.bc_res_L_x1 < 1e-8);
}

TEST_CASE("solver reproduces a separable closed form at second order") {
    // With sigma, theta constant, W = psi = Q = 0 and mu = 2 - eta the
    // kernels decouple per eta plane: L vanishes and
    // K(x, xi, eta, .) = -theta0/(3 - eta) exp(sigma0 (x - xi)/(3 - eta)).
    ContinuumExprSpec s;
    s.lambda = "1";
    s.mu = "2 - eta";
    s.sigma = "0.8";
    s.w = "0";
    s.theta = "0.6";
    s.psi = "0";
    s.q = "0";
    s.r = "0";
    s.lambda_dx = "0";
    s.mu_dx = "0";
    auto worst_err = [&](int nx) {
        EnsembleGrid g{nx, 8, 1.0, 0.1};
        ContinuumParams p = make_expr_model(s)->sample(g);
        ContinuumKernels ker = solve_continuum_kernels_sa(p);
        Axis xa = space_axis(g.nx), ea = ensemble_axis(g.ne);
        double worst = 0.0;
        for (int a = 0; a < g.nx; ++a)
            for (int b = 0; b <= a; ++b)
                for (int i = 0; i < g.ne; ++i) {
                    double eta = ea[i];
                    double exact =
                        -(0.6 / (3.0 - eta)) * std::exp(0.8 * (xa[a] - xa[b]) / (3.0 - eta));
                    worst = std::max(worst, std::abs(ker.K(a, b, i, 5) - exact));
                    worst = std::max(worst, std::abs(ker.L(a, b, i, 5)) );
                }
        return worst;
    };
    double e1 = worst_err(21), e2 = worst_err(41);
    CHECK(e1 < 1e-4);
    CHECK(e2 < 0.35 * e1);  // roughly O(dx^2)
}

TEST_CASE("analysis constants of the first example") {
    // factored psi from the anchor construction gives the ratio norm exactly
    NmParams np = make_nm_params(10, 10, presets::example1_nm());
    EnsembleGrid g{17, 20, 1.0, 0.1};
    ContinuumParams built = build_continuum(np, g);
    SaBounds b = compute_sa_bounds(built);
    CHECK(b.M_B == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.m_mu == doctest::Approx(1.0 + 0.5 / g.ne).epsilon(1e-12));
    CHECK(b.M_mu == doctest::Approx(2.0 - 0.5 / g.ne).epsilon(1e-12));
    CHECK(b.m_lambda == doctest::Approx(1.0));
    // gamma satisfies the defining inequality, predecessor does not
    double ratio = b.M_mu / b.m_mu;
    CHECK(ratio < std::exp(2 * b.gamma - std::exp(-b.gamma)));
    CHECK_FALSE(ratio < std::exp(2 * (b.gamma - 0.01) - std::exp(-(b.gamma - 0.01))));
    CHECK(b.m_phi > 0.0);

    // the expression-sampled model excises the diagonal and lands close
    ContinuumParams direct = example1_params(17, 50);
    SaBounds bd = compute_sa_bounds(direct);
    CHECK(bd.M_B == doctest::Approx(std::sqrt(1.0 - 1.0 / 50.0)).epsilon(1e-10));
}

TEST_CASE("update norms sit below the factorial envelope") {
    ContinuumParams p = example1_params(41, 12);
    ContinuumKernels ker = solve_continuum_kernels_sa(p);
    SaBounds b = compute_sa_bounds(p);
    for (size_t l = 0; l < ker.update_norms.size(); ++l)
        CHECK(ker.update_norms[l] <= b.envelope(static_cast<int>(l)));
}

TEST_CASE("envelope decays factorially in the tail") {
    ContinuumParams p = example1_params(17, 8);
    SaBounds b = compute_sa_bounds(p);
    double q = b.M_KL * b.M_Phi / b.m_phi;
    int far = static_cast<int>(3 * q) + 10;
    CHECK(b.envelope(far + 1) < b.envelope(far));
    CHECK(b.envelope(far + 20) < 1e-6 * b.envelope(far));
}
