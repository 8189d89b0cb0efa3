#include "hyperctl/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hyperctl {

namespace {

// Linear interpolation weights on a uniform axis, clamped to the grid.
struct Loc {
    int i;
    double w;
};

inline Loc locate(const Axis& ax, double t) {
    Loc l;
    ax.locate(t, l.i, l.w);
    return l;
}

// One plane of the 4-D successive-approximation sweep. Traces the
// characteristic from each grid point with embedded trapezoid quadrature
// of the coupling integrand against the lagged iterate.
class SaSolver {
public:
    SaSolver(const ContinuumParams& p, const KernelSolveOptions& opts)
        : p_(p), opts_(opts), nx_(p.grid.nx), ne_(p.grid.ne), xa_(space_axis(nx_)),
          geo_(p.mu, opts.refine) {
        build_tables();
    }

    ContinuumKernels run() {
        ContinuumKernels out;
        out.nx = nx_;
        out.ne = ne_;
        out.method = KernelMethod::SuccessiveApprox;
        out.rho = rho_;

        Kc_ = Field4(nx_, nx_, ne_, ne_);
        Lc_ = Field4(nx_, nx_, ne_, ne_);
        Kn_ = Field4(nx_, nx_, ne_, ne_);
        Ln_ = Field4(nx_, nx_, ne_, ne_);
        out.labels.assign(static_cast<size_t>(nx_) * nx_ * ne_ * ne_, 0);
        labels_ = &out.labels;

        double last = 0.0;
        bool converged = false;
        for (int it = 0; it < opts_.max_iter; ++it) {
            sweep();
            double upd = update_norm();
            out.update_norms.push_back(upd);
            std::swap(Kc_, Kn_);
            std::swap(Lc_, Ln_);
            ghost_fill(Kc_);
            ghost_fill(Lc_);
            out.iterations = it + 1;
            last = upd;
            if (upd < opts_.tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw SolverError("continuum kernel successive approximations did not converge (" +
                                  std::to_string(opts_.max_iter) + " sweeps)",
                              last);
        out.final_update = last;
        out.K = Kc_;
        out.L = Lc_;
        diagnostics(out);
        attach_evaluator(out);
        return out;
    }

private:
    const ContinuumParams& p_;
    KernelSolveOptions opts_;
    int nx_, ne_;
    Axis xa_;
    CharGeometry geo_;

    Field3 sigT_, thT_, WT_, psT_;  // (x, zeta, chi) transposes
    Field2 QT_;                     // (zeta, chi)
    Field2 muF_, lamF_;             // (ne, nx_fine) speeds
    Field3 rho_;
    std::vector<double> mu_max_, lam_max_, phi_at_one_;

    Field4 Kc_, Lc_, Kn_, Ln_;
    std::vector<signed char>* labels_ = nullptr;

    void set_label(int xk, int xik, int i, int j, signed char v) const {
        (*labels_)[((static_cast<size_t>(xk) * nx_ + xik) * ne_ + i) * ne_ + j] = v;
    }

    void build_tables() {
        sigT_ = Field3(nx_, ne_, ne_);
        thT_ = Field3(nx_, ne_, ne_);
        WT_ = Field3(nx_, ne_, ne_);
        psT_ = Field3(nx_, ne_, ne_);
        for (int k = 0; k < nx_; ++k)
            for (int a = 0; a < ne_; ++a)
                for (int b = 0; b < ne_; ++b) {
                    sigT_(k, b, a) = p_.sigma(k, a, b);
                    thT_(k, b, a) = p_.theta(k, a, b);
                    WT_(k, b, a) = p_.W(k, a, b);
                    psT_(k, b, a) = p_.psi(k, a, b);
                }
        QT_ = Field2(ne_, ne_);
        for (int a = 0; a < ne_; ++a)
            for (int b = 0; b < ne_; ++b) QT_(b, a) = p_.Q(a, b);

        const Axis& fx = geo_.fine_axis();
        muF_ = Field2(ne_, fx.n);
        lamF_ = Field2(ne_, fx.n);
        mu_max_.assign(ne_, 0.0);
        lam_max_.assign(ne_, 0.0);
        for (int e = 0; e < ne_; ++e)
            for (int k = 0; k < fx.n; ++k) {
                double xx = fx[k];
                muF_(e, k) = xa_.lerp_strided(&p_.mu(0, e), ne_, xx);
                lamF_(e, k) = xa_.lerp_strided(&p_.lambda(0, e), ne_, xx);
                mu_max_[e] = std::max(mu_max_[e], muF_(e, k));
                lam_max_[e] = std::max(lam_max_[e], lamF_(e, k));
            }
        rho_ = Field3(nx_, ne_, ne_);
        for (int i = 0; i < ne_; ++i)
            for (int j = i; j < ne_; ++j)
                for (int k = 0; k < nx_; ++k) rho_(k, i, j) = geo_.rho_nodes(xa_[k], i, j);
        phi_at_one_.resize(ne_);
        for (int e = 0; e < ne_; ++e) phi_at_one_[e] = geo_.phi_at_node(1.0, e);
    }

    // Linear extrapolation into the first ghost band above the diagonal
    // so that bilinear queries in the diagonal cells stay one-sided.
    void ghost_fill(Field4& F) {
        for (int k = 0; k + 1 < nx_; ++k) {
            double* gh = F.plane(k, k + 1);
            const double* d0 = F.plane(k, k);
            const double* dm = F.plane(k, k > 0 ? k - 1 : k);
            for (int q = 0; q < ne_ * ne_; ++q) gh[q] = k > 0 ? 2.0 * d0[q] - dm[q] : d0[q];
        }
    }

    struct Corners {
        const double* r00;
        const double* r01;
        const double* r10;
        const double* r11;
        double w00, w01, w10, w11;
    };

    Corners corners(const Field4& F, double x, double xi, int row) const {
        Loc a = locate(xa_, x), b = locate(xa_, xi);
        Corners c;
        c.r00 = F.plane(a.i, b.i) + row * ne_;
        c.r01 = F.plane(a.i, b.i + 1) + row * ne_;
        c.r10 = F.plane(a.i + 1, b.i) + row * ne_;
        c.r11 = F.plane(a.i + 1, b.i + 1) + row * ne_;
        c.w00 = (1 - a.w) * (1 - b.w);
        c.w01 = (1 - a.w) * b.w;
        c.w10 = a.w * (1 - b.w);
        c.w11 = a.w * b.w;
        return c;
    }

    double interp_x(const Field2& F, double x, int col) const {
        return xa_.lerp_strided(&F(0, col), ne_, x);
    }
    double interp_x3(const Field3& F, double x, int i, int j) const {
        return xa_.lerp_strided(&F(0, i, j), static_cast<size_t>(ne_) * ne_, x);
    }

    double diag_L_value(double x, int i, int j) const {
        if (p_.psi_tilde) return -interp_x3(*p_.psi_tilde, x, i, j);
        return interp_x3(p_.psi, x, i, j) / (interp_x(p_.mu, x, j) - interp_x(p_.mu, x, i));
    }

    // Artificial datum on x = 1; the default is the compatible choice
    // matching the diagonal data, callers may override.
    double artificial_l(double xi, int i, int j) const {
        if (opts_.artificial_l) return opts_.artificial_l(xi, ensemble_axis(ne_)[i], ensemble_axis(ne_)[j]);
        return diag_L_value(xi, i, j);
    }

    double diag_K_value(double x, int i, int j) const {
        return -interp_x3(p_.theta, x, i, j) / (interp_x(p_.lambda, x, j) + interp_x(p_.mu, x, i));
    }

    double xi0_L_value(double x, int i, int j) const {
        Loc a = locate(xa_, x);
        const double* k0 = Kc_.plane(a.i, 0) + i * ne_;
        const double* k1 = Kc_.plane(a.i + 1, 0) + i * ne_;
        const double* lam0 = p_.lambda.row(0);
        const double* q = QT_.row(j);
        double acc = 0.0;
        for (int c = 0; c < ne_; ++c)
            acc += ((1 - a.w) * k0[c] + a.w * k1[c]) * lam0[c] * q[c];
        return acc / (ne_ * p_.mu(0, j));
    }

    // Integrand of the K integral equation at (x, xi) in plane (i, j).
    double f_K(double x, double xi, int i, int j) const {
        Corners ck = corners(Kc_, x, xi, i);
        Corners cl = corners(Lc_, x, xi, i);
        Loc s = locate(xa_, xi);
        const double* sg0 = &sigT_(s.i, j, 0);
        const double* sg1 = &sigT_(s.i + 1, j, 0);
        const double* th0 = &thT_(s.i, j, 0);
        const double* th1 = &thT_(s.i + 1, j, 0);
        double acc = 0.0;
        for (int c = 0; c < ne_; ++c) {
            double kv = ck.w00 * ck.r00[c] + ck.w01 * ck.r01[c] + ck.w10 * ck.r10[c] +
                        ck.w11 * ck.r11[c];
            double lv = cl.w00 * cl.r00[c] + cl.w01 * cl.r01[c] + cl.w10 * cl.r10[c] +
                        cl.w11 * cl.r11[c];
            double sv = (1 - s.w) * sg0[c] + s.w * sg1[c];
            double tv = (1 - s.w) * th0[c] + s.w * th1[c];
            acc += kv * sv + lv * tv;
        }
        acc /= ne_;
        double kself = ck.w00 * ck.r00[j] + ck.w01 * ck.r01[j] + ck.w10 * ck.r10[j] +
                       ck.w11 * ck.r11[j];
        return kself * interp_x(p_.lambda_x, xi, j) + acc;
    }

    double f_L(double x, double xi, int i, int j) const {
        Corners ck = corners(Kc_, x, xi, i);
        Corners cl = corners(Lc_, x, xi, i);
        Loc s = locate(xa_, xi);
        const double* w0 = &WT_(s.i, j, 0);
        const double* w1 = &WT_(s.i + 1, j, 0);
        const double* q0 = &psT_(s.i, j, 0);
        const double* q1 = &psT_(s.i + 1, j, 0);
        double acc = 0.0;
        for (int c = 0; c < ne_; ++c) {
            double kv = ck.w00 * ck.r00[c] + ck.w01 * ck.r01[c] + ck.w10 * ck.r10[c] +
                        ck.w11 * ck.r11[c];
            double lv = cl.w00 * cl.r00[c] + cl.w01 * cl.r01[c] + cl.w10 * cl.r10[c] +
                        cl.w11 * cl.r11[c];
            double wv = (1 - s.w) * w0[c] + s.w * w1[c];
            double pv = (1 - s.w) * q0[c] + s.w * q1[c];
            acc += kv * wv + lv * pv;
        }
        acc /= ne_;
        double lself = cl.w00 * cl.r00[j] + cl.w01 * cl.r01[j] + cl.w10 * cl.r10[j] +
                       cl.w11 * cl.r11[j];
        return lself * interp_x(p_.mu_x, xi, j) - acc;
    }

    // RK4 step of the characteristic projection.
    void step(bool kfam, double eps, int i, int j, double h, double& x, double& xi) const {
        const Axis& fx = geo_.fine_axis();
        const double* mu = muF_.row(i);
        const double* sp = kfam ? lamF_.row(j) : muF_.row(j);
        auto d = [&](double xx, double xxi, double& dx, double& dxi) {
            if (kfam) {
                dx = -fx.lerp(mu, xx);
                dxi = fx.lerp(sp, xxi);
            } else {
                dx = eps * fx.lerp(mu, xx);
                dxi = eps * fx.lerp(sp, xxi);
            }
        };
        double k1x, k1s, k2x, k2s, k3x, k3s, k4x, k4s;
        d(x, xi, k1x, k1s);
        d(x + 0.5 * h * k1x, xi + 0.5 * h * k1s, k2x, k2s);
        d(x + 0.5 * h * k2x, xi + 0.5 * h * k2s, k3x, k3s);
        d(x + h * k3x, xi + h * k3s, k4x, k4s);
        x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
        xi += h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
    }

    // Generic path integration with face bisection. faceval must be
    // positive inside the domain and cross zero at the terminal face.
    template <class FaceFn, class Integrand>
    double integrate_path(bool kfam, double eps, int i, int j, double x0, double xi0,
                          const FaceFn& faceval, const Integrand& f, double& xf,
                          double& xif) const {
        double h = opts_.substep * xa_.dx /
                   std::max(1e-12, std::max(mu_max_[i], kfam ? lam_max_[j] : mu_max_[j]));
        double x = x0, xi = xi0;
        if (faceval(x, xi) <= 0.0) {
            xf = x;
            xif = xi;
            return 0.0;
        }
        double acc = 0.0;
        double fprev = f(x, xi);
        const int max_steps = 40 * (geo_.fine_axis().n);
        for (int it = 0; it < max_steps; ++it) {
            double xp = x, xip = xi;
            step(kfam, eps, i, j, h, x, xi);
            if (faceval(x, xi) > 0.0) {
                double fcur = f(x, xi);
                acc += 0.5 * (fprev + fcur) * h;
                fprev = fcur;
                continue;
            }
            double lo = 0.0, hi = h;
            while (hi - lo > 1e-8) {
                double mid = 0.5 * (lo + hi);
                double xm = xp, xim = xip;
                step(kfam, eps, i, j, mid, xm, xim);
                if (faceval(xm, xim) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            double xm = xp, xim = xip;
            step(kfam, eps, i, j, hi, xm, xim);
            acc += 0.5 * (fprev + f(xm, xim)) * hi;
            xf = xm;
            xif = xim;
            return acc;
        }
        throw GeometryError("kernel characteristic exceeded the step budget");
    }

    void sweep() {
        const int planes = ne_ * ne_;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int pl = 0; pl < planes; ++pl) {
            int i = pl / ne_;
            int j = pl % ne_;
            double eps = i > j ? 1.0 : -1.0;
            for (int xk = 0; xk < nx_; ++xk) {
                const double x0 = xa_[xk];
                for (int xik = 0; xik <= xk; ++xik) {
                    const double xi0 = xa_[xik];
                    // --- K kernel ---
                    // K is continuous across the hypersurface, so its
                    // characteristic is traced straight through segment a
                    // to the diagonal; the continuity condition holds by
                    // composition instead of coupling the sweep to stale
                    // surface values.
                    double xf = x0, xif = xi0;
                    {
                        auto face = [&](double xx, double xxi) { return xx - xxi; };
                        double acc = integrate_path(true, eps, i, j, x0, xi0, face,
                                                    [&](double xx, double xxi) {
                                                        return f_K(xx, xxi, i, j);
                                                    },
                                                    xf, xif);
                        Kn_(xk, xik, i, j) = diag_K_value(xf, i, j) + acc;
                    }

                    // --- L kernel ---
                    // The terminal face follows the segment decided by the
                    // travel-time invariant, so grazing paths near the
                    // hypersurface cannot pick up the wrong datum (the a/b
                    // jump emanates from exactly that data mismatch).
                    if (eps < 0.0) {
                        bool seg_a = i == j ||
                                     geo_.phi_at_node(x0, i) - geo_.phi_at_node(xi0, j) >= 0.0;
                        auto face = [&](double xx, double xxi) {
                            return seg_a ? xxi : xx - xxi;
                        };
                        double acc = integrate_path(false, eps, i, j, x0, xi0, face,
                                                    [&](double xx, double xxi) {
                                                        return f_L(xx, xxi, i, j);
                                                    },
                                                    xf, xif);
                        double b2 = seg_a ? xi0_L_value(xf, i, j) : diag_L_value(xf, i, j);
                        Ln_(xk, xik, i, j) = b2 + eps * acc;
                        set_label(xk, xik, i, j, seg_a ? 0 : 1);
                    } else {
                        bool diag_fed = geo_.phi_at_node(x0, i) - geo_.phi_at_node(xi0, j) <=
                                        phi_at_one_[i] - phi_at_one_[j];
                        auto face = [&](double xx, double xxi) {
                            return diag_fed ? xx - xxi : 1.0 - xx;
                        };
                        double acc = integrate_path(false, eps, i, j, x0, xi0, face,
                                                    [&](double xx, double xxi) {
                                                        return f_L(xx, xxi, i, j);
                                                    },
                                                    xf, xif);
                        double b2 = diag_fed ? diag_L_value(xf, i, j) : artificial_l(xif, i, j);
                        Ln_(xk, xik, i, j) = b2 + eps * acc;
                        set_label(xk, xik, i, j, diag_fed ? 2 : 3);
                    }
                }
            }
        }
    }

    // sup over grid (x, xi) of the ensemble-L2 update (serial, so the
    // result does not depend on the worker count).
    double update_norm() const {
        double worst = 0.0;
        for (int xk = 0; xk < nx_; ++xk)
            for (int xik = 0; xik <= xk; ++xik) {
                const double* ka = Kn_.plane(xk, xik);
                const double* kb = Kc_.plane(xk, xik);
                const double* la = Ln_.plane(xk, xik);
                const double* lb = Lc_.plane(xk, xik);
                double sk = 0.0, sl = 0.0;
                for (int q = 0; q < ne_ * ne_; ++q) {
                    double dk = ka[q] - kb[q];
                    double dl = la[q] - lb[q];
                    sk += dk * dk;
                    sl += dl * dl;
                }
                if (!std::isfinite(sk) || !std::isfinite(sl))
                    throw SolverError("kernel sweep produced non-finite values", sk);
                worst = std::max(worst, std::max(sk, sl));
            }
        return std::sqrt(worst / (ne_ * ne_));
    }

    void diagnostics(ContinuumKernels& out) const {
        // Boundary residuals, measured on the grid faces against the data.
        // The corner (x, xi) = (0, 0) carries both the diagonal and the
        // reflection data and is genuinely overdetermined; it is excluded
        // from the diagonal-face residual.
        double rLd = 0, rKd = 0, rL0 = 0, rL1 = 0;
        for (int k = 0; k < nx_; ++k)
            for (int i = 0; i < ne_; ++i)
                for (int j = 0; j < ne_; ++j) {
                    if (i != j && k > 0)
                        rLd = std::max(rLd, std::abs(out.L(k, k, i, j) - diag_L_value(xa_[k], i, j)));
                    rKd = std::max(rKd, std::abs(out.K(k, k, i, j) - diag_K_value(xa_[k], i, j)));
                    if (i <= j)
                        rL0 = std::max(rL0, std::abs(out.L(k, 0, i, j) - xi0_L_value(xa_[k], i, j)));
                }
        for (int xik = 0; xik < nx_; ++xik)
            for (int i = 0; i < ne_; ++i)
                for (int j = 0; j < i; ++j)
                    rL1 = std::max(rL1, std::abs(out.L(nx_ - 1, xik, i, j) -
                                                 artificial_l(xa_[xik], i, j)));
        out.bc_res_L_diag = rLd;
        out.bc_res_K_diag = rKd;
        out.bc_res_L_xi0 = rL0;
        out.bc_res_L_x1 = rL1;

        // K continuity across the hypersurface: quadratic one-sided
        // extrapolations in xi from both segments, on every plane row
        // with enough clean points.
        double jump = 0.0;
        for (int i = 0; i < ne_; ++i)
            for (int j = i + 1; j < ne_; ++j)
                for (int xk = 3; xk < nx_; ++xk) {
                    double r = rho_(xk, i, j);
                    int kr = static_cast<int>(std::floor(r / xa_.dx));
                    if (kr < 3 || kr + 3 > xk) continue;
                    auto quad = [&](int k0, int k1, int k2) {
                        double y0 = out.K(xk, k0, i, j), y1 = out.K(xk, k1, i, j),
                               y2 = out.K(xk, k2, i, j);
                        double x0 = xa_[k0], x1 = xa_[k1], x2 = xa_[k2];
                        double l0 = (r - x1) * (r - x2) / ((x0 - x1) * (x0 - x2));
                        double l1 = (r - x0) * (r - x2) / ((x1 - x0) * (x1 - x2));
                        double l2 = (r - x0) * (r - x1) / ((x2 - x0) * (x2 - x1));
                        return l0 * y0 + l1 * y1 + l2 * y2;
                    };
                    double from_a = quad(kr - 2, kr - 1, kr);
                    double from_b = quad(kr + 1, kr + 2, kr + 3);
                    jump = std::max(jump, std::abs(from_a - from_b));
                }
        out.k_jump = jump;
    }

    void attach_evaluator(ContinuumKernels& out) const {
        int nx = nx_, ne = ne_;
        const Field4* K = &out.K;
        const Field4* L = &out.L;
        Axis xa = xa_;
        Axis ea = ensemble_axis(ne_);
        out.evaluator = [nx, ne, K, L, xa, ea](int which, double x, double xi, double eta,
                                               double zeta) {
            (void)nx;
            const Field4& F = which == 0 ? *K : *L;
            Loc a = locate(xa, x), b = locate(xa, xi);
            Loc e1 = locate(ea, eta), e2 = locate(ea, zeta);
            double acc = 0.0;
            for (int da = 0; da <= 1; ++da)
                for (int db = 0; db <= 1; ++db)
                    for (int de = 0; de <= 1; ++de)
                        for (int dz = 0; dz <= 1; ++dz) {
                            double w = (da ? a.w : 1 - a.w) * (db ? b.w : 1 - b.w) *
                                       (de ? e1.w : 1 - e1.w) * (dz ? e2.w : 1 - e2.w);
                            acc += w * F(a.i + da, b.i + db, e1.i + de, e2.i + dz);
                        }
            return acc;
        };
    }
};

}  // namespace

ContinuumKernels solve_continuum_kernels_sa(const ContinuumParams& params,
                                            const KernelSolveOptions& opts) {
    SaSolver solver(params, opts);
    return solver.run();
}

double SaBounds::envelope(int ell) const {
    // log-space evaluation; the raw product overflows long before the
    // factorial catches up when the contraction constant is large
    double q = M_KL * M_Phi / m_phi;
    if (q <= 0.0) return ell == 0 ? M : 0.0;
    double lg = std::log(M) + ell * std::log(q) - std::lgamma(ell + 1.0);
    return std::exp(lg);
}

SaBounds compute_sa_bounds(const ContinuumParams& p) {
    SaBounds b;
    const int nx = p.grid.nx, ne = p.grid.ne;
    b.m_lambda = b.m_mu = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < p.lambda.size(); ++k) b.m_lambda = std::min(b.m_lambda, p.lambda.data()[k]);
    for (size_t k = 0; k < p.mu.size(); ++k) {
        b.m_mu = std::min(b.m_mu, p.mu.data()[k]);
        b.M_mu = std::max(b.M_mu, p.mu.data()[k]);
    }
    b.M_lambda1 = -std::numeric_limits<double>::infinity();
    b.M_mu1 = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < p.lambda_x.size(); ++k) b.M_lambda1 = std::max(b.M_lambda1, p.lambda_x.data()[k]);
    for (size_t k = 0; k < p.mu_x.size(); ++k) b.M_mu1 = std::max(b.M_mu1, p.mu_x.data()[k]);

    // M_* coupling norms: inner integral over the first ensemble slot,
    // L2 in the second, sup over x.
    auto coupling_norm = [&](const Field3& F) {
        double worst = 0.0;
        for (int k = 0; k < nx; ++k) {
            double s = 0.0;
            for (int j = 0; j < ne; ++j) {
                double inner = 0.0;
                for (int i = 0; i < ne; ++i) inner += F(k, i, j);
                inner /= ne;
                s += inner * inner;
            }
            worst = std::max(worst, s / ne);
        }
        return std::sqrt(worst);
    };
    b.M_sigma = coupling_norm(p.sigma);
    b.M_theta = coupling_norm(p.theta);
    b.M_W = coupling_norm(p.W);
    b.M_psi = coupling_norm(p.psi);

    double qn = 0.0;
    for (int j = 0; j < ne; ++j) {
        double inner = 0.0;
        for (int i = 0; i < ne; ++i) inner += p.Q(i, j);
        inner /= ne;
        qn += inner * inner;
    }
    qn = std::sqrt(qn / ne);
    double lam0max = 0.0, mu0min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ne; ++i) {
        lam0max = std::max(lam0max, p.lambda(0, i));
        mu0min = std::min(mu0min, p.mu(0, i));
    }
    b.M_Q1 = lam0max / mu0min * qn;

    // M_B: ratio quadrature, exact when psi is stored factored.
    double mb = 0.0;
    for (int k = 0; k < nx; ++k) {
        double s = 0.0;
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < ne; ++j) {
                double r;
                if (p.psi_tilde) {
                    r = (*p.psi_tilde)(k, i, j);
                } else if (i != j) {
                    r = p.psi(k, i, j) / (p.mu(k, i) - p.mu(k, j));
                } else {
                    continue;
                }
                s += r * r;
            }
        mb = std::max(mb, s / (ne * ne));
    }
    b.M_B = std::sqrt(mb);

    double theta_l2 = 0.0;
    for (int k = 0; k < nx; ++k) {
        double s = 0.0;
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < ne; ++j) s += p.theta(k, i, j) * p.theta(k, i, j);
        theta_l2 = std::max(theta_l2, std::sqrt(s / (ne * ne)));
    }
    b.M = b.M_B + (1.0 + b.M_Q1) * theta_l2 / (b.m_lambda + b.m_mu);
    b.M_KL = 2.0 * (1.0 + b.M_Q1) * (b.M_lambda1 + b.M_sigma + b.M_theta) +
             2.0 * (b.M_mu1 + b.M_W + b.M_psi);

    // Minimal gamma on a search grid with M_mu/m_mu < exp(2g - exp(-g)).
    double ratio = b.M_mu / b.m_mu;
    double g = 0.01;
    while (!(ratio < std::exp(2.0 * g - std::exp(-g)))) {
        g += 0.01;
        if (g > 50.0) break;
    }
    b.gamma = g;
    b.m_phi = 0.999 * std::min(b.m_mu * std::exp(g) - b.M_mu * std::exp(std::exp(-g) - g),
                               (b.m_mu + b.m_lambda) * std::exp(-g));

    // M_Phi: sup over the triangle of the ensemble-L2 norm of Phi.
    auto Phi = [&](double x, double xi, double eps) {
        return std::exp(x * std::exp(-g * eps)) - std::exp(xi * std::exp(g * eps)) +
               std::exp(std::exp(g));
    };
    Axis xat = space_axis(nx);
    double mphi = 0.0;
    for (int xk = 0; xk < nx; ++xk)
        for (int xik = 0; xik <= xk; ++xik) {
            double s = 0.0;
            for (int i = 0; i < ne; ++i)
                for (int j = 0; j < ne; ++j) {
                    double v = Phi(xat[xk], xat[xik], i > j ? 1.0 : -1.0);
                    s += v * v;
                }
            mphi = std::max(mphi, s / (ne * ne));
        }
    b.M_Phi = std::sqrt(mphi);
    return b;
}

KernelGap kernel_gap(const NmKernels& micro, const ContinuumKernels& cont) {
    if (micro.nx != cont.nx)
        throw std::invalid_argument("kernel_gap: triangle grids differ");
    const int ne = cont.ne, nx = cont.nx;
    Axis ea = ensemble_axis(ne);
    std::vector<int> cm(ne), cn(ne);
    for (int i = 0; i < ne; ++i) {
        cm[i] = std::min(micro.m - 1, static_cast<int>(ea[i] * micro.m));
        cn[i] = std::min(micro.n - 1, static_cast<int>(ea[i] * micro.n));
    }
    KernelGap g;
    for (int xk = 0; xk < nx; ++xk)
        for (int xik = 0; xik <= xk; ++xik) {
            double sk = 0.0, sl = 0.0;
            for (int i = 0; i < ne; ++i)
                for (int j = 0; j < ne; ++j) {
                    double dk = cont.K(xk, xik, i, j) -
                                micro.K[cm[i] * micro.n + cn[j]](xk, xik);
                    double dl = cont.L(xk, xik, i, j) -
                                micro.L[cm[i] * micro.m + cm[j]](xk, xik);
                    sk += dk * dk;
                    sl += dl * dl;
                }
            g.k_gap = std::max(g.k_gap, std::sqrt(sk / (ne * ne)));
            g.l_gap = std::max(g.l_gap, std::sqrt(sl / (ne * ne)));
        }
    return g;
}

}  // namespace hyperctl
