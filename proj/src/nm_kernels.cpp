#include <algorithm>
#include <cmath>

#include "hyperctl/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hyperctl {

namespace {

struct Loc {
    int i;
    double w;
};

inline Loc locate(const Axis& ax, double t) {
    Loc l;
    ax.locate(t, l.i, l.w);
    return l;
}

inline double bilerp(const Field2& F, const Axis& ax, double x, double xi) {
    Loc a = locate(ax, x), b = locate(ax, xi);
    return (1 - a.w) * ((1 - b.w) * F(a.i, b.i) + b.w * F(a.i, b.i + 1)) +
           a.w * ((1 - b.w) * F(a.i + 1, b.i) + b.w * F(a.i + 1, b.i + 1));
}

void ghost_fill(Field2& F) {
    const int nx = F.n0();
    for (int k = 0; k + 1 < nx; ++k)
        F(k, k + 1) = k > 0 ? 2.0 * F(k, k) - F(k, k - 1) : F(k, k);
}

// Shared scalar-pair characteristic integrator. Speeds are tables on the
// fine axis; the integrand and boundary values are supplied by the
// caller per family.
class PairTracer {
public:
    PairTracer(const Axis& fine, double substep_len)
        : fx_(fine), h_(substep_len) {}

    template <class FaceFn, class Integrand>
    double run(bool kfam, double eps, const double* spx, const double* spxi, double x0,
               double xi0, const FaceFn& face, const Integrand& f, double& xf,
               double& xif) const {
        auto d = [&](double xx, double xxi, double& dx, double& dxi) {
            if (kfam) {
                dx = -fx_.lerp(spx, xx);
                dxi = fx_.lerp(spxi, xxi);
            } else {
                dx = eps * fx_.lerp(spx, xx);
                dxi = eps * fx_.lerp(spxi, xxi);
            }
        };
        auto rk4 = [&](double h, double& xx, double& xxi) {
            double k1x, k1s, k2x, k2s, k3x, k3s, k4x, k4s;
            d(xx, xxi, k1x, k1s);
            d(xx + 0.5 * h * k1x, xxi + 0.5 * h * k1s, k2x, k2s);
            d(xx + 0.5 * h * k2x, xxi + 0.5 * h * k2s, k3x, k3s);
            d(xx + h * k3x, xxi + h * k3s, k4x, k4s);
            xx += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
            xxi += h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
        };
        double x = x0, xi = xi0;
        xf = x;
        xif = xi;
        if (face(x, xi) <= 0.0) return 0.0;
        double acc = 0.0, fprev = f(x, xi);
        const int max_steps = 100 * fx_.n;
        for (int it = 0; it < max_steps; ++it) {
            double xp = x, xip = xi;
            rk4(h_, x, xi);
            if (face(x, xi) > 0.0) {
                double fc = f(x, xi);
                acc += 0.5 * (fprev + fc) * h_;
                fprev = fc;
                continue;
            }
            double lo = 0.0, hi = h_;
            while (hi - lo > 1e-8) {
                double mid = 0.5 * (lo + hi);
                double xm = xp, xim = xip;
                rk4(mid, xm, xim);
                (face(xm, xim) > 0.0 ? lo : hi) = mid;
            }
            double xm = xp, xim = xip;
            rk4(hi, xm, xim);
            acc += 0.5 * (fprev + f(xm, xim)) * hi;
            xf = xm;
            xif = xim;
            return acc;
        }
        throw GeometryError("component kernel characteristic exceeded the step budget");
    }

private:
    Axis fx_;
    double h_;
};

}  // namespace

NmKernels solve_nm_kernels(const NmParams& p, int nx, const KernelSolveOptions& opts) {
    const int n = p.n, m = p.m;
    ValidationReport rep = validate_nm(p, 17);
    if (!rep.ok()) throw std::invalid_argument("solve_nm_kernels: invalid family:\n" + rep.to_string());

    Axis xa = space_axis(nx);
    const int nf = (nx - 1) * opts.refine + 1;
    Axis fx = space_axis(nf);

    // Speed and derivative tables.
    Field2 lamF(n, nf), muF(m, nf);
    double vmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < nf; ++k) {
            lamF(i, k) = p.lambda[i](fx[k]);
            vmax = std::max(vmax, lamF(i, k));
        }
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < nf; ++k) {
            muF(j, k) = p.mu[j](fx[k]);
            vmax = std::max(vmax, muF(j, k));
        }
    // Coupling samples on the coarse axis, transposed for the chi sums:
    // sigT(k, j, l) = sigma_{l,j}(x_k) etc.
    Field3 sigT(nx, n, n), thT(nx, n, m), wT(nx, m, n), psT(nx, m, m);
    Field2 lam_d(n, nx), mu_d(m, nx), lamC(n, nx), muC(m, nx), thC(nx, m * n), psC(nx, m * m);
    for (int k = 0; k < nx; ++k) {
        double x = xa[k];
        for (int i = 0; i < n; ++i) {
            lamC(i, k) = p.lambda[i](x);
            lam_d(i, k) = p.lambda[i].deriv(x);
        }
        for (int j = 0; j < m; ++j) {
            muC(j, k) = p.mu[j](x);
            mu_d(j, k) = p.mu[j].deriv(x);
        }
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < n; ++j) sigT(k, j, l) = p.Sigma[l][j](x);
        for (int l = 0; l < m; ++l)
            for (int j = 0; j < n; ++j) thT(k, j, l) = p.Theta[l][j](x);
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < m; ++j) wT(k, j, l) = p.W[l][j](x);
        for (int l = 0; l < m; ++l)
            for (int j = 0; j < m; ++j) psT(k, j, l) = p.Psi[l][j](x);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) thC(k, i * n + j) = p.Theta[i][j](x);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) psC(k, i * m + j) = p.Psi[i][j](x);
    }

    // travel-time tables per leftgoing component, for face decisions
    Field2 phi(m, nf);
    for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        phi(j, 0) = 0.0;
        for (int k = 1; k < nf; ++k) {
            acc += 0.5 * (1.0 / muF(j, k - 1) + 1.0 / muF(j, k)) * fx.dx;
            phi(j, k) = acc;
        }
    }
    auto phi_at = [&](int j, double x) { return fx.lerp(phi.row(j), x); };

    NmKernels out;
    out.n = n;
    out.m = m;
    out.nx = nx;
    std::vector<Field2> Kc(m * n, Field2(nx, nx)), Lc(m * m, Field2(nx, nx));
    std::vector<Field2> Kn = Kc, Ln = Lc;

    PairTracer tracer(fx, opts.substep * xa.dx / vmax);

    auto interp_row = [&](const Field2& F, int row, double x) {
        return xa.lerp(F.row(row), x);
    };

    double last = 0.0;
    bool converged = false;
    for (int it = 0; it < opts.max_iter; ++it) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int pair = 0; pair < m * (n + m); ++pair) {
            bool is_K = pair < m * n;
            int i = is_K ? pair / n : (pair - m * n) / m;
            int j = is_K ? pair % n : (pair - m * n) % m;
            const double* spx = muF.row(i);
            auto fK = [&](double xx, double xxi) {
                double acc = 0.0;
                Loc s = locate(xa, xxi);
                for (int l = 0; l < n; ++l) {
                    double sv = (1 - s.w) * sigT(s.i, j, l) + s.w * sigT(s.i + 1, j, l);
                    acc += bilerp(Kc[i * n + l], xa, xx, xxi) * sv / n;
                }
                for (int l = 0; l < m; ++l) {
                    double tv = (1 - s.w) * thT(s.i, j, l) + s.w * thT(s.i + 1, j, l);
                    acc += bilerp(Lc[i * m + l], xa, xx, xxi) * tv / m;
                }
                return bilerp(Kc[i * n + j], xa, xx, xxi) * interp_row(lam_d, j, xxi) + acc;
            };
            auto fL = [&](double xx, double xxi) {
                double acc = 0.0;
                Loc s = locate(xa, xxi);
                for (int l = 0; l < n; ++l) {
                    double wv = (1 - s.w) * wT(s.i, j, l) + s.w * wT(s.i + 1, j, l);
                    acc += bilerp(Kc[i * n + l], xa, xx, xxi) * wv / n;
                }
                for (int l = 0; l < m; ++l) {
                    double pv = (1 - s.w) * psT(s.i, j, l) + s.w * psT(s.i + 1, j, l);
                    acc += bilerp(Lc[i * m + l], xa, xx, xxi) * pv / m;
                }
                return bilerp(Lc[i * m + j], xa, xx, xxi) * interp_row(mu_d, j, xxi) - acc;
            };
            auto xi0_value = [&](double xx) {
                Loc a = locate(xa, xx);
                double acc = 0.0;
                for (int l = 0; l < n; ++l) {
                    double kv = (1 - a.w) * Kc[i * n + l](a.i, 0) + a.w * Kc[i * n + l](a.i + 1, 0);
                    acc += lamC(l, 0) * kv * p.Q(l, j);
                }
                return acc / (n * muC(j, 0));
            };
            for (int xk = 0; xk < nx; ++xk)
                for (int xik = 0; xik <= xk; ++xik) {
                    double x0 = xa[xk], xi0 = xa[xik], xf, xif;
                    if (is_K) {
                        auto face = [](double xx, double xxi) { return xx - xxi; };
                        double acc = tracer.run(true, 0.0, spx, lamF.row(j), x0, xi0, face, fK,
                                                xf, xif);
                        double b = -xa.lerp_strided(&thC(0, i * n + j), static_cast<size_t>(m) * n, xf) /
                                   (interp_row(lamC, j, xf) + interp_row(muC, i, xf));
                        Kn[i * n + j](xk, xik) = b + acc;
                    } else {
                        double eps = i > j ? 1.0 : -1.0;
                        auto psi_quot = [&](double xx) {
                            return xa.lerp_strided(&psC(0, i * m + j), static_cast<size_t>(m) * m, xx) /
                                   (interp_row(muC, j, xx) - interp_row(muC, i, xx));
                        };
                        if (eps < 0.0) {
                            bool seg_a = i == j || phi_at(i, x0) - phi_at(j, xi0) >= 0.0;
                            auto face = [&](double xx, double xxi) {
                                return seg_a ? xxi : xx - xxi;
                            };
                            double acc = tracer.run(false, eps, spx, muF.row(j), x0, xi0, face,
                                                    fL, xf, xif);
                            double b = seg_a ? xi0_value(xf) : psi_quot(xf);
                            Ln[i * m + j](xk, xik) = b + eps * acc;
                        } else {
                            bool diag_fed = phi_at(i, x0) - phi_at(j, xi0) <=
                                            phi_at(i, 1.0) - phi_at(j, 1.0);
                            auto face = [&](double xx, double xxi) {
                                return diag_fed ? xx - xxi : 1.0 - xx;
                            };
                            double acc = tracer.run(false, eps, spx, muF.row(j), x0, xi0, face,
                                                    fL, xf, xif);
                            double b = diag_fed ? psi_quot(xf) : psi_quot(xif);
                            Ln[i * m + j](xk, xik) = b + eps * acc;
                        }
                    }
                }
        }
        // Update norm in the (1/n, 1/m)-weighted ensemble metric.
        double worst = 0.0;
        for (int xk = 0; xk < nx; ++xk)
            for (int xik = 0; xik <= xk; ++xik) {
                double sk = 0.0, sl = 0.0;
                for (int q = 0; q < m * n; ++q) {
                    double d = Kn[q](xk, xik) - Kc[q](xk, xik);
                    sk += d * d;
                }
                for (int q = 0; q < m * m; ++q) {
                    double d = Ln[q](xk, xik) - Lc[q](xk, xik);
                    sl += d * d;
                }
                worst = std::max(worst, std::max(sk / (m * n), sl / (m * m)));
            }
        double upd = std::sqrt(worst);
        out.update_norms.push_back(upd);
        std::swap(Kc, Kn);
        std::swap(Lc, Ln);
        for (auto& f : Kc) ghost_fill(f);
        for (auto& f : Lc) ghost_fill(f);
        out.iterations = it + 1;
        last = upd;
        if (upd < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError("n+m kernel successive approximations did not converge", last);
    out.final_update = last;
    out.K = std::move(Kc);
    out.L = std::move(Lc);
    return out;
}

Kernel2x2 solve_2x2_kernels(const AveragedParams& p, int nx, const KernelSolveOptions& opts) {
    if (!(p.lambda_bar(0.0) > 0.0) || !(p.mu_bar(0.0) > 0.0))
        throw std::invalid_argument("solve_2x2_kernels: averaged speeds must be positive");
    Axis xa = space_axis(nx);
    const int nf = (nx - 1) * opts.refine + 1;
    Axis fx = space_axis(nf);
    std::vector<double> lamF(nf), muF(nf);
    double vmax = 0.0;
    for (int k = 0; k < nf; ++k) {
        lamF[k] = p.lambda_bar(fx[k]);
        muF[k] = p.mu_bar(fx[k]);
        vmax = std::max(vmax, std::max(lamF[k], muF[k]));
    }
    Kernel2x2 out;
    out.nx = nx;
    Field2 Kc(nx, nx), Lc(nx, nx), Kn(nx, nx), Ln(nx, nx);
    PairTracer tracer(fx, opts.substep * xa.dx / vmax);

    double last = 0.0;
    bool converged = false;
    for (int it = 0; it < opts.max_iter; ++it) {
        auto fK = [&](double xx, double xxi) {
            return bilerp(Kc, xa, xx, xxi) *
                       (p.lambda_bar.deriv(xxi) + p.sigma_bar(xxi)) +
                   bilerp(Lc, xa, xx, xxi) * p.theta_bar(xxi);
        };
        auto fL = [&](double xx, double xxi) {
            return bilerp(Lc, xa, xx, xxi) * p.mu_bar.deriv(xxi) -
                   bilerp(Kc, xa, xx, xxi) * p.w_bar(xxi);
        };
        for (int xk = 0; xk < nx; ++xk)
            for (int xik = 0; xik <= xk; ++xik) {
                double x0 = xa[xk], xi0 = xa[xik], xf, xif;
                {
                    auto face = [](double xx, double xxi) { return xx - xxi; };
                    double acc = tracer.run(true, 0.0, muF.data(), lamF.data(), x0, xi0, face,
                                            fK, xf, xif);
                    double b = -p.theta_bar(xf) / (p.lambda_bar(xf) + p.mu_bar(xf));
                    Kn(xk, xik) = b + acc;
                }
                {
                    auto face = [](double, double xxi) { return xxi; };
                    double acc = tracer.run(false, -1.0, muF.data(), muF.data(), x0, xi0, face,
                                            fL, xf, xif);
                    double kv = xa.lerp_strided(&Kc(0, 0), static_cast<size_t>(nx), xf);
                    double b = p.q_bar * p.lambda_bar(0.0) * kv / p.mu_bar(0.0);
                    Ln(xk, xik) = b - acc;
                }
            }
        double worst = 0.0;
        for (int xk = 0; xk < nx; ++xk)
            for (int xik = 0; xik <= xk; ++xik)
                worst = std::max(worst, std::max(std::abs(Kn(xk, xik) - Kc(xk, xik)),
                                                 std::abs(Ln(xk, xik) - Lc(xk, xik))));
        out.update_norms.push_back(worst);
        std::swap(Kc, Kn);
        std::swap(Lc, Ln);
        ghost_fill(Kc);
        ghost_fill(Lc);
        out.iterations = it + 1;
        last = worst;
        if (worst < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw SolverError("2x2 kernel successive approximations did not converge", last);
    out.final_update = last;

    // Finite-difference residual of the transport equations (one-sided
    // differences, first-order truncation; a consistency diagnostic).
    double res = 0.0;
    int cnt = 0;
    for (int xk = 1; xk < nx; ++xk)
        for (int xik = 1; xik < xk; ++xik) {
            double x = xa[xk], xi = xa[xik];
            double Kx = (Kc(xk, xik) - Kc(xk - 1, xik)) / xa.dx;
            double Kxi = (Kc(xk, xik) - Kc(xk, xik - 1)) / xa.dx;
            double rK = p.mu_bar(x) * Kx - p.lambda_bar(xi) * Kxi -
                        p.lambda_bar.deriv(xi) * Kc(xk, xik) - p.sigma_bar(xi) * Kc(xk, xik) -
                        p.theta_bar(xi) * Lc(xk, xik);
            double Lx = (Lc(xk, xik) - Lc(xk - 1, xik)) / xa.dx;
            double Lxi = (Lc(xk, xik) - Lc(xk, xik - 1)) / xa.dx;
            double rL = p.mu_bar(x) * Lx + p.mu_bar(xi) * Lxi +
                        p.mu_bar.deriv(xi) * Lc(xk, xik) - p.w_bar(xi) * Kc(xk, xik);
            res += rK * rK + rL * rL;
            cnt += 2;
        }
    out.pde_residual = cnt ? std::sqrt(res / cnt) : 0.0;
    out.K = std::move(Kc);
    out.L = std::move(Lc);
    return out;
}

}  // namespace hyperctl
