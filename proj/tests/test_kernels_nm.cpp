#include <doctest.h>

#include <cmath>

#include "hyperctl/kernels.hpp"
#include "hyperctl/lift.hpp"
#include "hyperctl/presets.hpp"

using namespace hyperctl;

TEST_CASE("micro kernels vanish without coupling") {
    NmExprSpec s = presets::example1_nm();
    s.sigma = "0";
    s.w = "0";
    s.theta = "0";
    s.psi = "0";
    s.q = "0";
    NmKernels ker = solve_nm_kernels(make_nm_params(2, 2, s), 21);
    for (const auto& f : ker.K)
        for (size_t q = 0; q < f.size(); ++q) CHECK(std::abs(f.data()[q]) < 1e-12);
    for (const auto& f : ker.L)
        for (size_t q = 0; q < f.size(); ++q) CHECK(std::abs(f.data()[q]) < 1e-12);
}

TEST_CASE("micro kernel boundary data") {
    const int n = 3, m = 3, nx = 41;
    NmParams p = make_nm_params(n, m, presets::example1_nm());
    NmKernels ker = solve_nm_kernels(p, nx);
    Axis xa = space_axis(nx);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < nx; k += 8) {
                double x = xa[k];
                double expect = -p.Theta[i][j](x) / (p.lambda[j](x) + p.mu[i](x));
                CHECK(ker.K[i * n + j](k, k) == doctest::Approx(expect).epsilon(1e-9));
            }
    // artificial datum on the x = 1 edge for j < i
    for (int i = 1; i < m; ++i)
        for (int j = 0; j < i; ++j)
            for (int k = 0; k < nx; k += 8) {
                double xi = xa[k];
                double expect = p.Psi[i][j](xi) / (p.mu[j](xi) - p.mu[i](xi));
                CHECK(ker.L[i * m + j](nx - 1, k) == doctest::Approx(expect).epsilon(1e-6));
            }
}

TEST_CASE("lifted micro kernels approach the continuum kernels") {
    EnsembleGrid kg{31, 8, 1.0, 0.1};
    ContinuumParams cp = make_expr_model(presets::example1_continuum())->sample(kg);
    ContinuumKernels ck = solve_continuum_kernels_sa(cp);
    NmKernels k2 = solve_nm_kernels(make_nm_params(2, 2, presets::example1_nm()), kg.nx);
    NmKernels k4 = solve_nm_kernels(make_nm_params(4, 4, presets::example1_nm()), kg.nx);
    double g2 = kernel_gap(k2, ck).max();
    double g4 = kernel_gap(k4, ck).max();
    CHECK(g4 < g2);
}

TEST_CASE("averaged pair: zero theta collapses both kernels") {
    NmExprSpec s = presets::example2_nm();
    s.theta = "0";
    AveragedParams a = build_averaged(make_nm_params(4, 4, s));
    Kernel2x2 ker = solve_2x2_kernels(a, 41);
    for (size_t q = 0; q < ker.K.size(); ++q) {
        CHECK(std::abs(ker.K.data()[q]) < 1e-12);
        CHECK(std::abs(ker.L.data()[q]) < 1e-12);
    }
}

TEST_CASE("averaged pair of the second example") {
    AveragedParams a = build_averaged(make_nm_params(10, 10, presets::example2_nm()));
    Kernel2x2 ker = solve_2x2_kernels(a, 129);
    Axis xa = space_axis(ker.nx);
    // K(x,x) = -(x/2)/(1 + 3/4) = -2x/7
    for (int k = 0; k < ker.nx; k += 16)
        CHECK(ker.K(k, k) == doctest::Approx(-2.0 * xa[k] / 7.0).epsilon(1e-7));
    // the in-domain coupling w makes L nonzero
    double lmax = 0.0;
    for (size_t q = 0; q < ker.L.size(); ++q) lmax = std::max(lmax, std::abs(ker.L.data()[q]));
    CHECK(lmax > 1e-3);
    // transport residual is a first-order consistency diagnostic
    Kernel2x2 coarse = solve_2x2_kernels(a, 65);
    CHECK(ker.pde_residual < coarse.pde_residual);
    CHECK(ker.pde_residual < 0.05);
}
