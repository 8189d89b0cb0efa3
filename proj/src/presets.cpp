#include "hyperctl/presets.hpp"

namespace hyperctl::presets {

ContinuumExprSpec example1_continuum() {
    ContinuumExprSpec s;
    s.lambda = "1";
    s.mu = "2 - eta";
    s.sigma = "(x+1)*y*(zeta+1/2)";
    s.w = "(x+1)*y*(zeta+1/2)";
    s.theta = "(x+1)*eta*(zeta+1/2)";
    s.psi = "eta - zeta";
    s.q = "(y+1/2)*zeta";
    s.r = "0";
    s.lambda_dx = "0";
    s.mu_dx = "0";
    return s;
}

NmExprSpec example1_nm() {
    NmExprSpec s;
    s.lambda = "1";
    s.mu = "2 - i/m";
    s.sigma = "(x+1)*(i/n)*(j/n+1/2)";
    s.w = "(x+1)*(i/n)*(j/m+1/2)";
    s.theta = "(x+1)*(i/m)*(j/n+1/2)";
    s.psi = "(i-j)/m";
    s.q = "(i/n+1/2)*(j/m)";
    s.r = "0";
    s.lambda_dx = "0";
    s.mu_dx = "0";
    return s;
}

const char* example1_u0() { return "(y+1/2)/2"; }
const char* example1_v0() { return "1"; }

ContinuumExprSpec example2_continuum() {
    ContinuumExprSpec s;
    s.lambda = "1";
    s.mu = "1 - eta/2";
    s.sigma = "x*y*(zeta+1/2)";
    s.w = "x*y*(zeta+1/2)";
    s.theta = "x*eta*(zeta+1/2)";
    s.psi = "(eta - zeta)/2";
    s.q = "1";
    s.r = "0";
    s.lambda_dx = "0";
    s.mu_dx = "0";
    return s;
}

NmExprSpec example2_nm() {
    NmExprSpec s;
    s.lambda = "1";
    s.mu = "1 - i/(2*m)";
    s.sigma = "x*(i/n)*(j/n+1/2)";
    s.w = "x*(i/n)*(j/m+1/2)";
    s.theta = "x*(i/m)*(j/n+1/2)";
    s.psi = "(i-j)/(2*m)";
    s.q = "1";
    s.r = "0";
    s.lambda_dx = "0";
    s.mu_dx = "0";
    return s;
}

}  // namespace hyperctl::presets
