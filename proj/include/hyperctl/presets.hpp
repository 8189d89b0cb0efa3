#pragma once

#include "hyperctl/model.hpp"

namespace hyperctl {

// Bundled benchmark systems used by the example configs and the
// acceptance suites.
namespace presets {

// Example 1: stable continuum target, unstable open loop.
ContinuumExprSpec example1_continuum();
NmExprSpec example1_nm();
// Matched initial data: u0(x,y) = (y + 1/2)/2 (the Q column mean), v0 = 1.
const char* example1_u0();
const char* example1_v0();

// Example 2: nearly-averaged family with identity boundary reflection.
ContinuumExprSpec example2_continuum();
NmExprSpec example2_nm();

}  // namespace presets

}  // namespace hyperctl
