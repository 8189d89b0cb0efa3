#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "hyperctl/kernels.hpp"
#include "hyperctl/lift.hpp"
#include "hyperctl/sim.hpp"

namespace hyperctl {

enum class ControlVariant {
    ContinuumExact,         // macro law on the continuum system
    MicroExact,             // exact n+m kernels (oracle / small systems)
    MacroKernelsMicroMeas,  // sampled continuum kernels, micro state
    MacroKernelsMacroMeas,  // row-sampled kernels, macro measurements
    AveragedMacro           // 2x2 kernels, ensemble-averaged measurements
};

// Backstepping feedback for the continuum system: gains are the x=1
// kernel slices on the simulation grid (exact polynomial evaluation
// when the kernels carry an evaluator).
class ContinuumBsFeedback final : public Feedback {
public:
    ContinuumBsFeedback(const ContinuumKernels& ker, const Field2& R, int nx, int ne);
    int dim() const override { return ne_; }
    void eval(double t, const Field2& u, const Field2& v, std::vector<double>& U) const override;

private:
    int nx_, ne_;
    Field3 K1_, L1_;  // (ne_out, nx, ne) gains at x = 1
    Field2 R_;
};

std::vector<double> control_continuum(const ContinuumKernels& ker, const Field2& R,
                                      const StateField& state);

// Micro feedback from gain matrices of xi: exact kernels or mean-value
// sampled continuum kernels. U = -(1/n) R u(1) + (1/n) int Ktilde u
// + (1/m) int Ltilde v.
class MicroGainFeedback final : public Feedback {
public:
    MicroGainFeedback(MatrixGains gains, Field2 R, int nx);
    static MicroGainFeedback from_nm_kernels(const NmKernels& ker, const Field2& R, int nx);
    int dim() const override { return m_; }
    void eval(double t, const Field2& u, const Field2& v, std::vector<double>& U) const override;

private:
    int n_, m_, nx_;
    MatrixGains g_;  // gains resampled on the simulation xi-axis
    Field2 R_;
};

// Macro-measurement feedback: the measured fields are the lifted micro
// state plus an optional bounded perturbation (amplitude eps_tilde times
// fixed unit-amplitude fields), or caller-supplied macro fields.
class MacroMeasFeedback final : public Feedback {
public:
    MacroMeasFeedback(RowGains gains, int n, int nx);
    int dim() const override { return g_.m; }
    void eval(double t, const Field2& u, const Field2& v, std::vector<double>& U) const override;

    // Evaluate the law on explicitly supplied macro fields (ne x nx).
    void eval_macro(const Field2& u_macro, const Field2& v_macro, std::vector<double>& U) const;

    int measurement_ne() const { return g_.ne; }

    void set_perturbation(double amplitude, Field2 gu, Field2 gv);

private:
    int n_, nx_;
    RowGains g_;
    double eps_ = 0.0;
    std::optional<Field2> gu_, gv_;
};

std::vector<double> control_micro(const MicroGainFeedback& fb, const StateField& micro_state);
std::vector<double> control_macro_meas(const MacroMeasFeedback& fb, const StateField& macro_state);

// Backstepping transform to the target variables: alpha = u,
// beta = v - int_0^x int (K u + L v). The state must share the kernels'
// ensemble grid; columns are interpolated onto the kernels' x-axis. The
// cell containing the hypersurface is split at the interpolated rho.
struct TargetState {
    Field2 alpha, beta;  // (ne, nx_kernel)
    double t = 0.0;
};

TargetState backstep_transform(const ContinuumKernels& ker, const StateField& state);

// Inverse transform by Picard iteration on v = beta + int K alpha + int L v.
StateField inverse_transform(const ContinuumKernels& ker, const TargetState& target,
                             double tol = 1e-8, int max_iter = 200);

// Coefficients of the target dynamics.
struct TargetCoeffs {
    int nx = 0, ne = 0;
    Field4 C_plus, C_minus;  // (nx, nx, ne, ne) on the triangle
    Field3 G;                // (nx, ne, ne), zero for zeta > eta
};

TargetCoeffs target_coeffs(const ContinuumKernels& ker, const ContinuumParams& params,
                           double tol = 1e-10, int max_iter = 60);

// sup over (x,xi) of || int L(x,xi,.,zeta) dzeta ||_L2 — the contraction
// constant of the inverse-transform fixed point.
double inverse_contraction_constant(const ContinuumKernels& ker);

}  // namespace hyperctl
