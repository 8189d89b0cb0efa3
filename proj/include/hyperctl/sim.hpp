#pragma once

#include <memory>
#include <vector>

#include "hyperctl/model.hpp"
#include "hyperctl/state.hpp"

namespace hyperctl {

struct SimConfig {
    EnsembleGrid grid;
    enum class Scheme { FirstOrderUpwind, SecondOrderUpwindLimited };
    Scheme scheme = Scheme::FirstOrderUpwind;
    double rtol = 1e-6;
    double atol = 1e-6;
    double blowup_factor = 1e6;  // terminate when norm exceeds this times the initial norm
};

struct Trajectory {
    StateKind kind = StateKind::Continuum;
    std::vector<double> times;
    std::vector<StateField> states;
    std::vector<std::vector<double>> controls;
    std::vector<double> norms;          // E or E_c^2 norm per output time
    std::vector<double> control_norms;  // weighted L2 of U per output time
    bool blew_up = false;
    double blowup_time = 0.0;
    long steps = 0;
    double cfl_estimate = 0.0;

    double initial_norm() const { return norms.empty() ? 0.0 : norms.front(); }
    double final_norm() const { return norms.empty() ? 0.0 : norms.back(); }
};

// Boundary feedback U(t) evaluated on the current (full) fields inside
// the right-hand side; continuous-time feedback, not sample-and-hold.
class Feedback {
public:
    virtual ~Feedback() = default;
    virtual int dim() const = 0;
    virtual void eval(double t, const Field2& u, const Field2& v,
                      std::vector<double>& U) const = 0;
};

// Micro coefficients sampled on the simulation x-axis.
struct NmSampled {
    int n = 0, m = 0, nx = 0;
    Field2 lambda, mu;                  // (n, nx), (m, nx)
    Field3 Sigma, W, Theta, Psi;        // (nx, rows, cols)
    Field2 Q, R;
};

NmSampled sample_nm(const NmParams& p, int nx);

// Semi-discrete right-hand sides. The ODE state excludes the algebraic
// boundary columns u(:,0) and v(:,nx-1); unpack() reconstructs full
// fields, finalize_boundary() installs the actuated column once the
// control vector is known. Instances hold scratch and are not
// thread-safe; use one per concurrent simulation.
class NmRhsCore {
public:
    NmRhsCore(NmSampled ps, SimConfig::Scheme scheme);
    int state_size() const { return (ps_.n + ps_.m) * (ps_.nx - 1); }
    void pack(const Field2& u, const Field2& v, double* y) const;
    void unpack(const double* y, Field2& u, Field2& v) const;
    void finalize_boundary(const Field2& u, Field2& v, const std::vector<double>& U) const;
    void rhs(const Field2& u, const Field2& v, double* dy) const;
    const NmSampled& params() const { return ps_; }
    double max_speed() const;

private:
    NmSampled ps_;
    SimConfig::Scheme scheme_;
};

class ContinuumRhsCore {
public:
    ContinuumRhsCore(const ContinuumParams* p, SimConfig::Scheme scheme);
    int state_size() const { return 2 * ne() * (nx() - 1); }
    int nx() const { return p_->grid.nx; }
    int ne() const { return p_->grid.ne; }
    void pack(const Field2& u, const Field2& v, double* y) const;
    void unpack(const double* y, Field2& u, Field2& v) const;
    void finalize_boundary(const Field2& u, Field2& v, const std::vector<double>& U) const;
    void rhs(const Field2& u, const Field2& v, double* dy) const;
    double max_speed() const;

private:
    const ContinuumParams* p_;
    SimConfig::Scheme scheme_;
    mutable std::vector<double> scratch_;
};

Trajectory simulate_nm(const NmParams& p, const Field2& u0, const Field2& v0,
                       const Feedback* controller, const SimConfig& cfg);

Trajectory simulate_continuum(const ContinuumParams& p, const Field2& u0, const Field2& v0,
                              const Feedback* controller, const SimConfig& cfg);

// Pointwise-in-time gap t -> ||F(u,v)(t) - (u,v)(t)|| between a lifted
// micro trajectory and a continuum trajectory, plus its maximum.
struct GapCurve {
    std::vector<double> times;
    std::vector<double> gap;
    double max_gap = 0.0;
};

GapCurve solution_gap(const Trajectory& traj_nm, const Trajectory& traj_c, int ne);

}  // namespace hyperctl
