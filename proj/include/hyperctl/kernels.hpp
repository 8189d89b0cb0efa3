#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "hyperctl/characteristics.hpp"
#include "hyperctl/model.hpp"
#include "hyperctl/tensor.hpp"

namespace hyperctl {

struct SolverError : std::runtime_error {
    double last_update;
    SolverError(const std::string& what, double last) : std::runtime_error(what), last_update(last) {}
};

enum class KernelMethod { SuccessiveApprox, PowerSeries };

// Backstepping kernels of the continuum system on the triangular domain
// cross the ensemble square. Storage is (x, xi, eta, zeta) with the
// xi > x part unused. Values at a grid point belong to that point's own
// segment; L may jump across xi = rho(x,eta,zeta), K stays continuous.
struct ContinuumKernels {
    int nx = 0;
    int ne = 0;
    Field4 K, L;
    Field3 rho;  // (nx, ne, ne), meaningful for eta <= zeta pairs
    // Fine-grained segment labels as the solver assigned them:
    // 0 = a, 1 = b, 2 = c fed by the diagonal, 3 = c fed by the x=1 datum.
    std::vector<signed char> labels;
    KernelMethod method = KernelMethod::SuccessiveApprox;
    int ps_order = 0;

    std::vector<double> update_norms;  // per-sweep max update, both kernels
    int iterations = 0;
    double final_update = 0.0;

    // Residual diagnostics (grid sup norms unless noted).
    double bc_res_L_diag = 0.0;   // L(x,x, . , .) against its boundary data
    double bc_res_K_diag = 0.0;   // K(x,x, . , .)
    double bc_res_L_xi0 = 0.0;    // L(x,0, . , .) against the reflection integral
    double bc_res_L_x1 = 0.0;     // artificial datum at x=1
    double k_jump = 0.0;          // K mismatch across the hypersurface
    double ps_residual = 0.0;     // power-series only: weighted collocation RMS

    // Optional exact evaluator (set by the power-series solver);
    // which = 0 for K, 1 for L.
    std::function<double(int which, double x, double xi, double eta, double zeta)> evaluator;
    // Segment-explicit variant (0 = a, 1 = b, 2 = c); lets callers compare
    // one-sided limits across the hypersurface.
    std::function<double(int which, int seg, double x, double xi, double eta, double zeta)>
        seg_evaluator;

    int label(int xk, int xik, int i, int j) const {
        if (!labels.empty())
            return labels[((static_cast<size_t>(xk) * nx + xik) * ne + i) * ne + j];
        if (i > j) return 2;
        double xi = static_cast<double>(xik) / (nx - 1);
        return xi <= rho(xk, i, j) + 1e-12 ? 0 : 1;
    }

    // Segment of a grid point: 0 = a, 1 = b, 2 = c.
    int seg(int xk, int xik, int i, int j) const {
        int l = label(xk, xik, i, j);
        return l >= 2 ? 2 : l;
    }
};

struct KernelSolveOptions {
    double tol = 1e-6;
    int max_iter = 60;
    int refine = 4;        // fine-axis refinement for travel-time tables
    double substep = 0.9;  // RK4 substep, in units of dx / max speed
    // Optional replacement for the artificial datum on x = 1,
    // called as artificial_l(xi, eta, zeta) for zeta < eta.
    std::function<double(double, double, double)> artificial_l;
};

// Successive approximations along characteristics (Jacobi sweeps from
// the zero iterate). params must be sampled on the kernel grid.
ContinuumKernels solve_continuum_kernels_sa(const ContinuumParams& params,
                                            const KernelSolveOptions& opts = {});

// Exact micro kernels: one 2-D solve per component pair, coupled through
// the scaled component sums. Layout K[i*n + j] over (i < m, j < n),
// L[i*m + j] over (i, j < m); each field is (nx, nx) on the triangle.
struct NmKernels {
    int n = 0, m = 0, nx = 0;
    std::vector<Field2> K;
    std::vector<Field2> L;
    std::vector<double> update_norms;
    int iterations = 0;
    double final_update = 0.0;
};

NmKernels solve_nm_kernels(const NmParams& params, int nx, const KernelSolveOptions& opts = {});

// Averaged 2x2 kernels (one component pair, ensemble-constant data).
struct Kernel2x2 {
    int nx = 0;
    Field2 K, L;
    std::vector<double> update_norms;
    int iterations = 0;
    double final_update = 0.0;
    double pde_residual = 0.0;  // finite-difference residual diagnostic
};

Kernel2x2 solve_2x2_kernels(const AveragedParams& params, int nx,
                            const KernelSolveOptions& opts = {});

// Constants of the convergence analysis for the successive
// approximations, plus the factorial envelope they imply.
struct SaBounds {
    double m_lambda = 0, m_mu = 0, M_mu = 0;
    double M_lambda1 = 0, M_mu1 = 0;
    double M_sigma = 0, M_theta = 0, M_W = 0, M_psi = 0, M_Q1 = 0;
    double M_B = 0, M_Phi = 0, m_phi = 0, gamma = 0;
    double M = 0, M_KL = 0;

    double envelope(int ell) const;
};

SaBounds compute_sa_bounds(const ContinuumParams& params);

// Lift micro kernels onto an ensemble grid and measure the worst
// (x,xi)-grid ensemble-L2 distance to continuum kernels on the same
// grid (the kernel-approximation gap).
struct KernelGap {
    double k_gap = 0.0;
    double l_gap = 0.0;
    double max() const { return k_gap > l_gap ? k_gap : l_gap; }
};

KernelGap kernel_gap(const NmKernels& micro, const ContinuumKernels& cont);

}  // namespace hyperctl
