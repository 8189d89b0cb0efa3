#include "hyperctl/control.hpp"

#include <cmath>
#include <stdexcept>

namespace hyperctl {

namespace {

// Kernel value at (x, xi, eta_i, zeta_j) from the grid (bilinear in the
// first two slots) or the exact evaluator when present.
double kernel_at(const ContinuumKernels& ker, int which, double x, double xi, int i, int j) {
    const Field4& F = which == 0 ? ker.K : ker.L;
    Axis xa = space_axis(ker.nx);
    // On-grid queries read the stored values directly (the evaluator and
    // the grid agree there, and this path is in inner loops).
    double sx = x / xa.dx, sxi = xi / xa.dx;
    double rx = std::round(sx), rxi = std::round(sxi);
    if (std::abs(sx - rx) < 1e-9 && std::abs(sxi - rxi) < 1e-9) {
        int a = std::min(ker.nx - 1, std::max(0, static_cast<int>(rx)));
        int b = std::min(ker.nx - 1, std::max(0, static_cast<int>(rxi)));
        if (b <= a) return F(a, b, i, j);
    }
    Axis ea = ensemble_axis(ker.ne);
    if (ker.evaluator) return ker.evaluator(which, x, xi, ea[i], ea[j]);
    int a, b;
    double wa, wb;
    xa.locate(x, a, wa);
    xa.locate(xi, b, wb);
    auto val = [&](int aa, int bb) { return F(aa, bb, i, j); };
    return (1 - wa) * ((1 - wb) * val(a, b) + wb * val(a, b + 1)) +
           wa * ((1 - wb) * val(a + 1, b) + wb * val(a + 1, b + 1));
}

// Effective trapezoid weights of xi |-> K(x, xi, eta_i, zeta_j) g(xi)
// over [0, x_up], with the hypersurface cell split at the interpolated
// rho. The weights fold the one-sided kernel limits at rho and the
// linear interpolation of g back onto the nodes, so any consumer of the
// same weights integrates identically.
void effective_weights(const ContinuumKernels& ker, int which, double x, double rho_val,
                       const Axis& xi_axis, int up, int i, int j,
                       std::function<double(double)> value_at, std::vector<double>& w) {
    w.assign(xi_axis.n, 0.0);
    if (up == 0) return;
    const double dx = xi_axis.dx;
    for (int b = 0; b <= up; ++b)
        w[b] = ((b == 0 || b == up) ? 0.5 * dx : dx) * value_at(xi_axis[b]);
    if (rho_val > xi_axis[0] && rho_val < xi_axis[up]) {
        int bs;
        double t;
        xi_axis.locate(rho_val, bs, t);
        if (bs < up) {
            double xi0 = xi_axis[bs], xi1 = xi_axis[bs + 1];
            double f0 = value_at(xi0), f1 = value_at(xi1);
            double eps = 1e-7 * dx;
            double fa, fb;
            if (ker.evaluator) {
                Axis ea = ensemble_axis(ker.ne);
                fa = ker.evaluator(which, x, rho_val - eps, ea[i], ea[j]);
                fb = ker.evaluator(which, x, rho_val + eps, ea[i], ea[j]);
            } else {
                fa = f0;
                fb = f1;
            }
            // remove the plain trapezoid contribution of this cell
            double w0 = (bs == 0) ? 0.5 * dx : ((bs == up) ? 0.5 * dx : dx);
            (void)w0;
            double remove0 = 0.5 * dx * f0, remove1 = 0.5 * dx * f1;
            double ha = rho_val - xi0, hb = xi1 - rho_val;
            // split quadrature with g(rho) = (1-t) g0 + t g1
            double grho_coeff = 0.5 * ha * fa + 0.5 * hb * fb;
            w[bs] += -remove0 + 0.5 * ha * f0 + grho_coeff * (1.0 - t);
            w[bs + 1] += -remove1 + 0.5 * hb * f1 + grho_coeff * t;
        }
    }
}

// Shared quadrature operator of the backstepping transform on the
// kernel grid: beta = v - (1/ne) sum_j sum_b [WK u + WL v].
struct TransformOp {
    int nx = 0, ne = 0;
    Field4 WK, WL;  // effective weights, zero beyond the triangle

    explicit TransformOp(const ContinuumKernels& ker) : nx(ker.nx), ne(ker.ne) {
        WK = Field4(nx, nx, ne, ne);
        WL = Field4(nx, nx, ne, ne);
        Axis xa = space_axis(nx);
        std::vector<double> w;
        for (int xk = 0; xk < nx; ++xk) {
            double x = xa[xk];
            for (int i = 0; i < ne; ++i)
                for (int j = 0; j < ne; ++j) {
                    double r = i <= j ? ker.rho(xk, i, j) : -1.0;
                    effective_weights(ker, 0, x, r, xa, xk, i, j,
                                      [&](double xi) { return kernel_at(ker, 0, x, xi, i, j); },
                                      w);
                    for (int b = 0; b <= xk; ++b) WK(xk, b, i, j) = w[b];
                    effective_weights(ker, 1, x, r, xa, xk, i, j,
                                      [&](double xi) { return kernel_at(ker, 1, x, xi, i, j); },
                                      w);
                    for (int b = 0; b <= xk; ++b) WL(xk, b, i, j) = w[b];
                }
        }
    }

    // out(i, xk) = (1/ne) sum_j sum_b W(xk, b, i, j) g(j, b)
    void apply(const Field4& W, const Field2& g, Field2& out) const {
        out = Field2(ne, nx);
        for (int xk = 0; xk < nx; ++xk)
            for (int i = 0; i < ne; ++i) {
                double acc = 0.0;
                for (int b = 0; b <= xk; ++b) {
                    const double* Wp = W.plane(xk, b) + i * ne;
                    for (int j = 0; j < ne; ++j) acc += Wp[j] * g(j, b);
                }
                out(i, xk) = acc / ne;
            }
    }
};

}  // namespace

ContinuumBsFeedback::ContinuumBsFeedback(const ContinuumKernels& ker, const Field2& R, int nx,
                                         int ne)
    : nx_(nx), ne_(ne), R_(R) {
    if (ker.ne != ne)
        throw std::invalid_argument("ContinuumBsFeedback: kernel ensemble grid != sim grid");
    K1_ = Field3(ne, nx, ne);
    L1_ = Field3(ne, nx, ne);
    Axis xs = space_axis(nx);
    std::vector<double> w;
    for (int i = 0; i < ne; ++i)
        for (int j = 0; j < ne; ++j) {
            double r = i <= j ? ker.rho(ker.nx - 1, i, j) : -1.0;
            effective_weights(ker, 0, 1.0, r, xs, nx - 1, i, j,
                              [&](double xi) { return kernel_at(ker, 0, 1.0, xi, i, j); }, w);
            for (int k = 0; k < nx; ++k) K1_(i, k, j) = w[k];
            effective_weights(ker, 1, 1.0, r, xs, nx - 1, i, j,
                              [&](double xi) { return kernel_at(ker, 1, 1.0, xi, i, j); }, w);
            for (int k = 0; k < nx; ++k) L1_(i, k, j) = w[k];
        }
}

void ContinuumBsFeedback::eval(double, const Field2& u, const Field2& v,
                               std::vector<double>& U) const {
    const int nx = nx_, ne = ne_;
    U.assign(ne, 0.0);
    for (int i = 0; i < ne; ++i) {
        double acc = 0.0;
        for (int j = 0; j < ne; ++j) acc -= R_(i, j) * u(j, nx - 1) / ne;
        for (int k = 0; k < nx; ++k) {
            const double* Kr = &K1_(i, k, 0);
            const double* Lr = &L1_(i, k, 0);
            double s = 0.0;
            for (int j = 0; j < ne; ++j) s += Kr[j] * u(j, k) + Lr[j] * v(j, k);
            acc += s / ne;
        }
        U[i] = acc;
    }
}

std::vector<double> control_continuum(const ContinuumKernels& ker, const Field2& R,
                                      const StateField& state) {
    ContinuumBsFeedback fb(ker, R, state.nx(), state.u.n0());
    std::vector<double> U;
    fb.eval(state.t, state.u, state.v, U);
    return U;
}

MicroGainFeedback::MicroGainFeedback(MatrixGains gains, Field2 R, int nx)
    : n_(gains.n), m_(gains.m), nx_(nx), g_(std::move(gains)), R_(std::move(R)) {
    // Resample the xi-axis onto the simulation grid once.
    Axis xs = space_axis(nx);
    if (g_.xi.n != nx || std::abs(g_.xi.dx - xs.dx) > 1e-15) {
        MatrixGains r;
        r.n = g_.n;
        r.m = g_.m;
        r.xi = xs;
        r.K = Field3(m_, n_, nx);
        r.L = Field3(m_, m_, nx);
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < nx; ++k) r.K(i, j, k) = g_.xi.lerp(&g_.K(i, j, 0), xs[k]);
            for (int j = 0; j < m_; ++j)
                for (int k = 0; k < nx; ++k) r.L(i, j, k) = g_.xi.lerp(&g_.L(i, j, 0), xs[k]);
        }
        g_ = std::move(r);
    }
}

MicroGainFeedback MicroGainFeedback::from_nm_kernels(const NmKernels& ker, const Field2& R,
                                                     int nx) {
    MatrixGains g;
    g.n = ker.n;
    g.m = ker.m;
    g.xi = space_axis(ker.nx);
    g.K = Field3(ker.m, ker.n, ker.nx);
    g.L = Field3(ker.m, ker.m, ker.nx);
    for (int i = 0; i < ker.m; ++i) {
        for (int j = 0; j < ker.n; ++j)
            for (int k = 0; k < ker.nx; ++k) g.K(i, j, k) = ker.K[i * ker.n + j](ker.nx - 1, k);
        for (int j = 0; j < ker.m; ++j)
            for (int k = 0; k < ker.nx; ++k) g.L(i, j, k) = ker.L[i * ker.m + j](ker.nx - 1, k);
    }
    return MicroGainFeedback(std::move(g), R, nx);
}

void MicroGainFeedback::eval(double, const Field2& u, const Field2& v,
                             std::vector<double>& U) const {
    const int nx = nx_;
    const double dx = 1.0 / (nx - 1);
    U.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
        double acc = 0.0;
        for (int l = 0; l < n_; ++l) acc -= R_(i, l) * u(l, nx - 1) / n_;
        for (int k = 0; k < nx; ++k) {
            double w = (k == 0 || k == nx - 1) ? 0.5 * dx : dx;
            double s = 0.0;
            for (int l = 0; l < n_; ++l) s += g_.K(i, l, k) * u(l, k) / n_;
            for (int l = 0; l < m_; ++l) s += g_.L(i, l, k) * v(l, k) / m_;
            acc += w * s;
        }
        U[i] = acc;
    }
}

std::vector<double> control_micro(const MicroGainFeedback& fb, const StateField& s) {
    std::vector<double> U;
    fb.eval(s.t, s.u, s.v, U);
    return U;
}

MacroMeasFeedback::MacroMeasFeedback(RowGains gains, int n, int nx)
    : n_(n), nx_(nx), g_(std::move(gains)) {
    Axis xs = space_axis(nx);
    if (g_.xi.n != nx || std::abs(g_.xi.dx - xs.dx) > 1e-15) {
        RowGains r;
        r.m = g_.m;
        r.ne = g_.ne;
        r.xi = xs;
        r.Rtilde = g_.Rtilde;
        r.Krows = Field3(g_.m, nx, g_.ne);
        r.Lrows = Field3(g_.m, nx, g_.ne);
        for (int i = 0; i < g_.m; ++i)
            for (int j = 0; j < g_.ne; ++j)
                for (int k = 0; k < nx; ++k) {
                    r.Krows(i, k, j) = g_.xi.lerp_strided(&g_.Krows(i, 0, j), g_.ne, xs[k]);
                    r.Lrows(i, k, j) = g_.xi.lerp_strided(&g_.Lrows(i, 0, j), g_.ne, xs[k]);
                }
        g_ = std::move(r);
    }
}

void MacroMeasFeedback::set_perturbation(double amplitude, Field2 gu, Field2 gv) {
    eps_ = amplitude;
    gu_ = std::move(gu);
    gv_ = std::move(gv);
}

void MacroMeasFeedback::eval(double, const Field2& u, const Field2& v,
                             std::vector<double>& U) const {
    // Lift the micro state to macro measurements, apply the perturbation
    // hook, and evaluate the row-sampled law.
    const int ne = g_.ne, nx = nx_;
    Field2 um(ne, nx), vm(ne, nx);
    Axis ea = ensemble_axis(ne);
    int n_src = u.n0(), m_src = v.n0();
    for (int i = 0; i < ne; ++i) {
        int cu = std::min(n_src - 1, static_cast<int>(ea[i] * n_src));
        int cv = std::min(m_src - 1, static_cast<int>(ea[i] * m_src));
        for (int k = 0; k < nx; ++k) {
            um(i, k) = u(cu, k);
            vm(i, k) = v(cv, k);
        }
    }
    if (eps_ != 0.0 && gu_ && gv_)
        for (int i = 0; i < ne; ++i)
            for (int k = 0; k < nx; ++k) {
                um(i, k) += eps_ * (*gu_)(i, k);
                vm(i, k) += eps_ * (*gv_)(i, k);
            }
    eval_macro(um, vm, U);
}

void MacroMeasFeedback::eval_macro(const Field2& um, const Field2& vm,
                                   std::vector<double>& U) const {
    const int ne = g_.ne, nx = nx_;
    const double dx = 1.0 / (nx - 1);
    U.assign(g_.m, 0.0);
    for (int i = 0; i < g_.m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < ne; ++j) acc -= g_.Rtilde(i, j) * um(j, nx - 1) / ne;
        for (int k = 0; k < nx; ++k) {
            double w = (k == 0 || k == nx - 1) ? 0.5 * dx : dx;
            const double* Kr = &g_.Krows(i, k, 0);
            const double* Lr = &g_.Lrows(i, k, 0);
            double s = 0.0;
            for (int j = 0; j < ne; ++j) s += Kr[j] * um(j, k) + Lr[j] * vm(j, k);
            acc += w * s / ne;
        }
        U[i] = acc;
    }
}

std::vector<double> control_macro_meas(const MacroMeasFeedback& fb, const StateField& s) {
    std::vector<double> U;
    fb.eval_macro(s.u, s.v, U);
    return U;
}

TargetState backstep_transform(const ContinuumKernels& ker, const StateField& state) {
    const int ne = ker.ne, nxk = ker.nx;
    if (state.u.n0() != ne)
        throw std::invalid_argument("backstep_transform: ensemble grids differ");
    Axis xk = space_axis(nxk), xs = space_axis(state.nx());

    Field2 u(ne, nxk), v(ne, nxk);
    for (int i = 0; i < ne; ++i)
        for (int k = 0; k < nxk; ++k) {
            u(i, k) = xs.lerp(state.u.row(i), xk[k]);
            v(i, k) = xs.lerp(state.v.row(i), xk[k]);
        }

    TransformOp op(ker);
    Field2 ku, lv;
    op.apply(op.WK, u, ku);
    op.apply(op.WL, v, lv);

    TargetState out;
    out.t = state.t;
    out.alpha = u;
    out.beta = Field2(ne, nxk);
    for (int i = 0; i < ne; ++i)
        for (int k = 0; k < nxk; ++k) out.beta(i, k) = v(i, k) - ku(i, k) - lv(i, k);
    return out;
}

StateField inverse_transform(const ContinuumKernels& ker, const TargetState& target, double tol,
                             int max_iter) {
    const int ne = ker.ne, nxk = ker.nx;
    TransformOp op(ker);
    Field2 g, lv;
    op.apply(op.WK, target.alpha, g);
    for (int i = 0; i < ne; ++i)
        for (int k = 0; k < nxk; ++k) g(i, k) += target.beta(i, k);

    Field2 v = g, vn;
    double ref = 0.0;
    for (size_t q = 0; q < g.size(); ++q) ref = std::max(ref, std::abs(g.data()[q]));
    ref = std::max(ref, 1e-30);
    for (int it = 0; it < max_iter; ++it) {
        op.apply(op.WL, v, lv);
        vn = Field2(ne, nxk);
        double diff = 0.0;
        for (int i = 0; i < ne; ++i)
            for (int k = 0; k < nxk; ++k) {
                vn(i, k) = g(i, k) + lv(i, k);
                diff = std::max(diff, std::abs(vn(i, k) - v(i, k)));
            }
        std::swap(v, vn);
        if (diff < tol * ref) {
            StateField s;
            s.kind = StateKind::Continuum;
            s.t = target.t;
            s.u = target.alpha;
            s.v = v;
            return s;
        }
    }
    throw SolverError("inverse transform Picard iteration did not converge", 0.0);
}

TargetCoeffs target_coeffs(const ContinuumKernels& ker, const ContinuumParams& p, double tol,
                           int max_iter) {
    const int ne = ker.ne, nxk = ker.nx;
    if (p.grid.nx != nxk || p.grid.ne != ne)
        throw std::invalid_argument("target_coeffs: params grid must match the kernel grid");
    TargetCoeffs tc;
    tc.nx = nxk;
    tc.ne = ne;
    tc.G = Field3(nxk, ne, ne);
    for (int k = 0; k < nxk; ++k)
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < i; ++j) {
                double acc = ker.L(k, 0, i, j) * p.mu(0, j);
                for (int c = 0; c < ne; ++c)
                    acc -= ker.K(k, 0, i, c) * p.lambda(0, c) * p.Q(c, j) / ne;
                tc.G(k, i, j) = acc;
            }

    // C^- by Volterra fixed point, then C^+ directly.
    const double dx = 1.0 / (nxk - 1);
    tc.C_minus = Field4(nxk, nxk, ne, ne);
    Field4 base(nxk, nxk, ne, ne);
    for (int xk = 0; xk < nxk; ++xk)
        for (int xik = 0; xik <= xk; ++xik) {
            double* dst = base.plane(xk, xik);
            for (int y = 0; y < ne; ++y)
                for (int z = 0; z < ne; ++z) {
                    double acc = 0.0;
                    for (int s = 0; s < ne; ++s)
                        acc += p.W(xk, y, s) * ker.L(xk, xik, s, z);
                    dst[y * ne + z] = acc / ne;
                }
        }
    tc.C_minus = base;
    Field4 next(nxk, nxk, ne, ne);
    for (int it = 0; it < max_iter; ++it) {
        double diff = 0.0;
        for (int xk = 0; xk < nxk; ++xk)
            for (int xik = 0; xik <= xk; ++xik) {
                double* dst = next.plane(xk, xik);
                const double* b0 = base.plane(xk, xik);
                for (int q = 0; q < ne * ne; ++q) dst[q] = b0[q];
                // int_xi^x C^-(x,chi) L(chi,xi) dchi, trapezoid over grid chi.
                for (int c = xik; c <= xk; ++c) {
                    double w = (c == xik || c == xk) ? 0.5 * dx : dx;
                    if (xik == xk) w = 0.0;
                    const double* Cm = tc.C_minus.plane(xk, c);
                    const double* Lm = ker.L.plane(c, xik);
                    for (int y = 0; y < ne; ++y)
                        for (int z = 0; z < ne; ++z) {
                            double acc = 0.0;
                            for (int s = 0; s < ne; ++s)
                                acc += Cm[y * ne + s] * Lm[s * ne + z];
                            dst[y * ne + z] += w * acc / ne;
                        }
                }
            }
        for (int xk = 0; xk < nxk; ++xk)
            for (int xik = 0; xik <= xk; ++xik) {
                const double* a = next.plane(xk, xik);
                const double* b = tc.C_minus.plane(xk, xik);
                for (int q = 0; q < ne * ne; ++q) diff = std::max(diff, std::abs(a[q] - b[q]));
            }
        std::swap(tc.C_minus, next);
        if (diff < tol) break;
        if (it == max_iter - 1)
            throw SolverError("target C- Volterra iteration did not converge", diff);
    }

    tc.C_plus = Field4(nxk, nxk, ne, ne);
    for (int xk = 0; xk < nxk; ++xk)
        for (int xik = 0; xik <= xk; ++xik) {
            double* dst = tc.C_plus.plane(xk, xik);
            for (int y = 0; y < ne; ++y)
                for (int z = 0; z < ne; ++z) {
                    double acc = 0.0;
                    for (int s = 0; s < ne; ++s)
                        acc += p.W(xk, y, s) * ker.K(xk, xik, s, z);
                    dst[y * ne + z] = acc / ne;
                }
            for (int c = xik; c <= xk; ++c) {
                double w = (c == xik || c == xk) ? 0.5 * dx : dx;
                if (xik == xk) w = 0.0;
                const double* Cm = tc.C_minus.plane(xk, c);
                const double* Km = ker.K.plane(c, xik);
                for (int y = 0; y < ne; ++y)
                    for (int z = 0; z < ne; ++z) {
                        double acc = 0.0;
                        for (int s = 0; s < ne; ++s) acc += Cm[y * ne + s] * Km[s * ne + z];
                        dst[y * ne + z] += w * acc / ne;
                    }
            }
        }
    return tc;
}

double inverse_contraction_constant(const ContinuumKernels& ker) {
    double worst = 0.0;
    for (int xk = 0; xk < ker.nx; ++xk)
        for (int xik = 0; xik <= xk; ++xik) {
            const double* L = ker.L.plane(xk, xik);
            double s = 0.0;
            for (int i = 0; i < ker.ne; ++i) {
                double inner = 0.0;
                for (int j = 0; j < ker.ne; ++j) inner += L[i * ker.ne + j];
                inner /= ker.ne;
                s += inner * inner;
            }
            worst = std::max(worst, s / ker.ne);
        }
    return std::sqrt(worst);
}

}  // namespace hyperctl
