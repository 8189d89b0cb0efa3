#include <doctest.h>

#include <cmath>

#include "hyperctl/power_series.hpp"
#include "hyperctl/presets.hpp"

using namespace hyperctl;

TEST_CASE("zero coupling collapses the series") {
    ContinuumExprSpec s = presets::example1_continuum();
    s.sigma = "0";
    s.w = "0";
    s.theta = "0";
    s.psi = "0";
    s.q = "0";
    EnsembleGrid pg{33, 16, 1.0, 0.1};
    ContinuumParams p = make_expr_model(s)->sample(pg);
    PowerSeriesOptions po;
    po.order = 4;
    po.interior_points = 1200;
    po.boundary_points = 300;
    ContinuumKernels ker = solve_continuum_kernels_ps(p, 17, 8, po);
    double worst = 0.0;
    for (size_t q = 0; q < ker.K.size(); ++q)
        worst = std::max({worst, std::abs(ker.K.data()[q]), std::abs(ker.L.data()[q])});
    CHECK(worst < 1e-6);
}

TEST_CASE("collocation reproduces the boundary data of the first example") {
    EnsembleGrid pg{33, 24, 1.0, 0.1};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(pg);
    PowerSeriesOptions po;
    po.order = 6;
    po.interior_points = 2000;
    po.boundary_points = 500;
    ContinuumKernels ker = solve_continuum_kernels_ps(p, 21, 10, po);
    CHECK(ker.ps_residual < 5e-2);
    // L = 1 on the diagonal face away from the ensemble diagonal
    for (double x : {0.2, 0.6, 1.0})
        for (double eta : {0.15, 0.45})
            for (double zeta : {0.75, 0.95}) {
                CHECK(ker.evaluator(1, x, x, eta, zeta) == doctest::Approx(1.0).epsilon(3e-2));
                double expect = -(x + 1.0) * eta * (zeta + 0.5) / (3.0 - eta);
                CHECK(ker.evaluator(0, x, x, eta, zeta) ==
                      doctest::Approx(expect).epsilon(3e-2));
            }
}

TEST_CASE("series agrees with successive approximations") {
    EnsembleGrid pg{33, 24, 1.0, 0.1};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(pg);
    PowerSeriesOptions po;
    po.order = 6;
    po.interior_points = 2500;
    po.boundary_points = 600;
    ContinuumKernels ps = solve_continuum_kernels_ps(p, 21, 10, po);

    EnsembleGrid kg{41, 12, 1.0, 0.1};
    ContinuumParams sp = make_expr_model(presets::example1_continuum())->sample(kg);
    ContinuumKernels sa = solve_continuum_kernels_sa(sp);

    // compare like against like: the series is queried for the segment
    // the grid point belongs to, so the jump across the hypersurface
    // does not masquerade as method disagreement
    Axis xa = space_axis(sa.nx), ea = ensemble_axis(sa.ne);
    double worst = 0.0;
    for (int xk = 0; xk < sa.nx; xk += 2)
        for (int xik = 0; xik <= xk; xik += 2) {
            double sk = 0.0, sl = 0.0;
            for (int i = 0; i < sa.ne; ++i)
                for (int j = 0; j < sa.ne; ++j) {
                    int seg = sa.label(xk, xik, i, j);
                    double dk = sa.K(xk, xik, i, j) -
                                ps.seg_evaluator(0, seg, xa[xk], xa[xik], ea[i], ea[j]);
                    double dl = sa.L(xk, xik, i, j) -
                                ps.seg_evaluator(1, seg, xa[xk], xa[xik], ea[i], ea[j]);
                    sk += dk * dk;
                    sl += dl * dl;
                }
            worst = std::max(worst, std::sqrt(std::max(sk, sl) / (sa.ne * sa.ne)));
        }
    CHECK(worst < 5e-2);  // order 6; the acceptance run uses order 10
}
