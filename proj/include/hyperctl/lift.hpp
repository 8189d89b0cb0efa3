#pragma once

#include <memory>
#include <vector>

#include "hyperctl/model.hpp"
#include "hyperctl/tensor.hpp"

namespace hyperctl {

struct ContinuumKernels;

// Step-function embedding of a component vector, evaluated at the
// cell-centered ensemble nodes. Exact: nodes never sit on cell edges.
std::vector<double> lift(const std::vector<double>& values, int ne);

// Adjoint mean-value projection: component i is the midpoint-rule mean
// of the field over ((i-1)/k, i/k]. Requires at least one node per cell.
std::vector<double> project(const std::vector<double>& field, int k);

// Piecewise-constant continuum realization of an n+m family on a grid.
// Every field is constant on ensemble cells; this is the object the
// isometric embedding maps the micro system onto.
ContinuumParams lift_params(const NmParams& p, const EnsembleGrid& grid);

// Constructive continuum approximation: interpolates the anchor
// conditions at (i/n, j/m), with mu in the monotone decreasing form
// fitted by nonnegative least squares and psi kept in factored form.
std::unique_ptr<ContinuumModel> make_anchor_model(const NmParams& p);

ContinuumParams build_continuum(const NmParams& p, const EnsembleGrid& grid);

enum class AveragingMode { ContinuumMean, IndexMean };

AveragedParams build_averaged(const NmParams& p,
                              AveragingMode mode = AveragingMode::ContinuumMean);

// The eight parameter-closeness norms between the lifted family and a
// continuum model (sup over x of ensemble L2 distances; velocity terms
// include the x-derivative parts).
struct ClosenessNorms {
    double lambda = 0, mu = 0, sigma = 0, w = 0, theta = 0, psi = 0, q = 0, r = 0;
    double max() const;
};

ClosenessNorms parameter_closeness(const NmParams& p, const ContinuumModel& model,
                                   const EnsembleGrid& grid);

// Mean-value sampling of continuum kernels at x=1 into micro gain
// matrices: Ktilde is m x n functions of xi, Ltilde is m x m.
struct MatrixGains {
    int m = 0, n = 0;
    Axis xi;
    Field3 K;  // (m, n, nxi)
    Field3 L;  // (m, m, nxi)
};

MatrixGains sample_kernel_matrix(const ContinuumKernels& ker, int n, int m, const Axis& xi_axis);

// Row sampling for the macro-measurement law: eta-cell means of the
// kernels and of the reflection coefficient.
struct RowGains {
    int m = 0;
    Axis xi;
    int ne = 0;
    Field2 Rtilde;     // (m, ne)
    Field3 Krows;      // (m, nxi, ne)
    Field3 Lrows;      // (m, nxi, ne)
};

RowGains sample_kernel_rows(const ContinuumKernels& ker, const Field2& R_field, int m,
                            const Axis& xi_axis, int ne);

}  // namespace hyperctl
