#pragma once

#include <vector>

#include "hyperctl/control.hpp"
#include "hyperctl/model.hpp"
#include "hyperctl/sim.hpp"

namespace hyperctl {

// Weight data of the target-system Lyapunov functional, with the
// coefficient bounds it was built from.
struct LyapunovConfig {
    double delta = 0.0;
    double c = 0.0;
    double rate = 0.0;      // D(zeta) = c * exp(rate * (1 - zeta))
    std::vector<double> D;  // on the ensemble nodes it was built with

    double D_at(double zeta) const;
    double m_lambda = 0, m_mu = 0;
    double M_sigma = 0, M_W = 0, M_Cp = 0, M_Cm = 0, M_G = 0, M_Q = 0;
    bool d_inequality_ok = false;  // the weight condition on D holds on the grid
};

LyapunovConfig lyapunov_params(const TargetCoeffs& coeffs, const ContinuumParams& params);

double lyapunov_value(const LyapunovConfig& cfg, const TargetState& target,
                      const ContinuumParams& params);

enum class StabilityClass { ExpStable, Bounded, Unstable };

struct DecayFit {
    double t0 = 0, t1 = 0;
    double omega = 0;      // fitted decay rate of log||z||
    double amplitude = 0;  // fitted M
    double growth = 0;     // max norm over the trajectory / initial norm
    StabilityClass cls = StabilityClass::Bounded;
};

DecayFit decay_fit(const Trajectory& traj, double t0, double t1);

const char* to_string(StabilityClass c);

}  // namespace hyperctl
