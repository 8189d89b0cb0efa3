#pragma once

#include <string>
#include <vector>

#include "hyperctl/sim.hpp"
#include "hyperctl/kernels.hpp"

namespace hyperctl {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic float rendering shared by every writer (%.17g).
std::string fmt_num(double v);

// Trajectory summary: t, state norm, control norm (one row per output time).
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// Control surface in long format: t, eta (or component index), value.
void write_control_csv(const std::string& path, const Trajectory& traj);

// Binary snapshot: 16-byte magic, u32 version, u32 rank, u32 dims[rank],
// row-major float64 little-endian payload.
void write_snapshot(const std::string& path, const std::vector<unsigned>& dims,
                    const double* data);
std::vector<double> read_snapshot(const std::string& path, std::vector<unsigned>& dims);

void write_state_snapshot(const std::string& path, const StateField& s);
void write_kernel_snapshot(const std::string& path, const ContinuumKernels& ker);

// CSV slices of a 4-D kernel: fixed ensemble pair over (x, xi), or fixed
// (x, xi) over the ensemble square.
void write_kernel_slice_fixed_ensemble(const std::string& path, const ContinuumKernels& ker,
                                       int eta_idx, int zeta_idx);
void write_kernel_slice_fixed_space(const std::string& path, const ContinuumKernels& ker,
                                    int x_idx, int xi_idx);

// FNV-1a of the raw config text, for the manifest.
std::string config_hash(const std::string& text);

void write_manifest(const std::string& path, const std::string& cfg_hash,
                    const std::string& kernel_method, int nx, int ne, unsigned seed, int workers);

}  // namespace hyperctl
