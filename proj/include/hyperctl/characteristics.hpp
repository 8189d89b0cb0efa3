#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "hyperctl/model.hpp"
#include "hyperctl/tensor.hpp"

namespace hyperctl {

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Travel-time geometry of the kernel domain. phi_eta(x) is the
// cumulative transit time int_0^x ds/mu(s,eta); the characteristic
// hypersurface is xi = rho(x,eta,zeta) with rho = phi_zeta^{-1}(phi_eta(x)).
// Tables live on a refined x-grid per ensemble node, with linear
// interpolation between ensemble nodes for off-node queries.
class CharGeometry {
public:
    CharGeometry(const Field2& mu, int refine = 4);

    int ne() const { return ne_; }
    const Axis& fine_axis() const { return fx_; }

    double phi_at_node(double x, int eta_idx) const;
    double phi_inv_at_node(double tau, int eta_idx) const;
    double rho_nodes(double x, int eta_idx, int zeta_idx) const;

    double phi(double x, double eta) const;
    double phi_inv(double tau, double zeta) const;
    double rho(double x, double eta, double zeta) const;

private:
    int ne_;
    Axis fx_;
    Axis ea_;
    Field2 table_;  // (ne, nx_fine) cumulative transit times

    double column_inv(const double* col, double tau) const;
};

// rho for a sampled continuum system; eta <= zeta required.
double rho(const ContinuumParams& params, double x, double eta, double zeta);

enum class CharFamily { K, L };

enum class TerminalFace { XiEqRho, Diagonal, XiZero, XEqOne };

struct CharPath {
    std::vector<double> s;   // arc parameter at the sample points
    std::vector<double> x;   // x-coordinate samples
    std::vector<double> xi;  // xi-coordinate samples
    TerminalFace face = TerminalFace::Diagonal;
    double s_end = 0.0;
};

// Characteristic tracer over 1-D speed tables on the fine axis. For the
// K family the projection is (dx/ds, dxi/ds) = (-mu(x), +lambda(xi));
// for the L family both coordinates move with speed eps*mu. Classical
// RK4 with fixed substeps; faces located by bisection to face_tol.
class CharTracer {
public:
    struct Speeds {
        const double* mu_x;       // along the x slot, fine axis
        const double* speed_xi;   // along the xi slot, fine axis
    };

    CharTracer(const Axis& fine_axis, double substep, double face_tol = 1e-8)
        : fx_(fine_axis), h_(substep), face_tol_(face_tol) {}

    // Traces until one of the supplied face functions crosses zero.
    // faces[i] must be positive in the domain interior. Samples at every
    // substep are appended to the path.
    CharPath trace(double x0, double xi0, CharFamily family, double eps, const Speeds& sp,
                   const std::vector<std::function<double(double, double)>>& faces,
                   const std::vector<TerminalFace>& face_ids, int max_steps = 100000) const;

private:
    Axis fx_;
    double h_;
    double face_tol_;

    void deriv(CharFamily fam, double eps, const Speeds& sp, double x, double xi, double& dx,
               double& dxi) const;
    void rk4_step(CharFamily fam, double eps, const Speeds& sp, double h, double& x,
                  double& xi) const;
};

// Spec-level convenience: traces a kernel characteristic of the given
// family from (x, xi) for ensemble values (eta, zeta) of a sampled
// continuum system, reporting the path and the terminal face.
CharPath trace_characteristics(const ContinuumParams& params, double x, double xi, double eta,
                               double zeta, CharFamily family);

}  // namespace hyperctl
