#pragma once

#include "hyperctl/kernels.hpp"
#include "hyperctl/model.hpp"

namespace hyperctl {

struct PowerSeriesOptions {
    int order = 10;               // total degree of the 4-D polynomials
    int interior_points = 9000;   // PDE collocation points (2 rows each)
    int boundary_points = 2000;   // per boundary-condition family
    double boundary_weight = 10.0;
    double ridge = 1e-9;          // relative Tikhonov floor on the normal equations
    unsigned seed = 20240611;
};

// Least-squares collocation of the kernel equations with one polynomial
// piece per kernel and segment (L may jump across the hypersurface, so a
// single global polynomial cannot represent it). params supplies the
// coefficient fields and the chi-quadrature nodes; the result is
// evaluated onto an (out_nx, out_ne) kernel grid and carries an exact
// polynomial evaluator.
ContinuumKernels solve_continuum_kernels_ps(const ContinuumParams& params, int out_nx, int out_ne,
                                            const PowerSeriesOptions& opts = {});

}  // namespace hyperctl
