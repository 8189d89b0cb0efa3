#pragma once

#include "hyperctl/model.hpp"
#include "hyperctl/tensor.hpp"

namespace hyperctl {

enum class StateKind { Nm, Continuum };

// Solution snapshot for either system class. u is (nu, nx) with nu = n
// (micro) or ne (continuum); v is (nv, nx). Includes the algebraic
// boundary columns u(:,0), v(:,nx-1).
struct StateField {
    StateKind kind = StateKind::Continuum;
    Field2 u, v;
    double t = 0.0;

    int nx() const { return u.n1(); }
};

// Weighted L2 norm: (1/nu) sum over components of trapezoid-in-x of u^2,
// plus the v part. This is the E norm for micro states and the
// E_c^2 norm for continuum states (cell-centered ensemble weights).
double state_norm(const StateField& s);

// L2 norm of a control sample: (1/k) weighted for micro vectors,
// midpoint L2 for continuum fields (same formula either way).
double control_norm(const std::vector<double>& U);

// Lift a micro state to the continuum ensemble grid by step-function
// embedding of each column.
StateField lift_state(const StateField& micro, int ne);

// Weighted norm of the difference of two continuum states on a shared grid.
double state_distance(const StateField& a, const StateField& b);

}  // namespace hyperctl
