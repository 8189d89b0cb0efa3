#include "hyperctl/power_series.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hyperctl {

namespace {

// Shifted Chebyshev values and derivatives on [0,1].
void cheb(double t, int order, double* T, double* dT) {
    double s = 2.0 * t - 1.0;
    T[0] = 1.0;
    if (dT) dT[0] = 0.0;
    if (order >= 1) {
        T[1] = s;
        if (dT) dT[1] = 2.0;
    }
    for (int k = 2; k <= order; ++k) {
        T[k] = 2.0 * s * T[k - 1] - T[k - 2];
        if (dT) dT[k] = 4.0 * T[k - 1] + 2.0 * s * dT[k - 1] - dT[k - 2];
    }
}

struct Term {
    int a, b, c, d;
};

// K is a single global polynomial in (x, xi, eta, zeta): it stays
// continuous across the hypersurface. The L pieces use the transport
// invariant u = phi_zeta(xi) - phi_eta(x) in place of xi: u is constant
// along the leftgoing characteristics, every face where L carries data or
// jumps becomes a coordinate plane, and the transport pair collapses to
// mu(x,eta) dP/dx. Piece order: [a, b, c diagonal-fed, c datum-fed];
// the c pieces shift u by the corner gap so their seam also lands on a
// coordinate plane.
struct PsData {
    int order = 0;
    std::vector<Term> terms;
    std::vector<Eigen::VectorXd> coef;  // [K, L_a, L_b, L_c1, L_c2]
    std::shared_ptr<CharGeometry> geo;
    double u_lo = 0.0, u_span = 1.0;  // affine map of the invariant onto [0,1]

    double phi1(double e) const { return geo->phi(1.0, e); }

    double t_of(double x, double xi, double eta, double zeta, int piece) const {
        double u = geo->phi(xi, zeta) - geo->phi(x, eta);
        if (piece >= 2) u += phi1(eta) - phi1(zeta);
        return (u - u_lo) / u_span;
    }

    int piece(double x, double xi, double eta, double zeta) const {
        if (zeta < eta) {
            double up = geo->phi(xi, zeta) - geo->phi(x, eta) + phi1(eta) - phi1(zeta);
            return up >= -1e-12 ? 2 : 3;
        }
        double u = geo->phi(xi, zeta) - geo->phi(x, eta);
        return u <= 1e-12 ? 0 : 1;
    }

    double eval_block(int block, double x, double xi, double eta, double zeta) const {
        const int N = order;
        double Tx[16], T2[16], Te[16], Tz[16];
        cheb(x, N, Tx, nullptr);
        cheb(block == 0 ? xi : t_of(x, xi, eta, zeta, block - 1), N, T2, nullptr);
        cheb(eta, N, Te, nullptr);
        cheb(zeta, N, Tz, nullptr);
        const Eigen::VectorXd& c = coef[block];
        double acc = 0.0;
        for (size_t t = 0; t < terms.size(); ++t) {
            const Term& tm = terms[t];
            acc += c[t] * Tx[tm.a] * T2[tm.b] * Te[tm.c] * Tz[tm.d];
        }
        return acc;
    }

    double eval(int which, double x, double xi, double eta, double zeta) const {
        if (which == 0) return eval_block(0, x, xi, eta, zeta);
        return eval_block(1 + piece(x, xi, eta, zeta), x, xi, eta, zeta);
    }
};

}  // namespace

ContinuumKernels solve_continuum_kernels_ps(const ContinuumParams& p, int out_nx, int out_ne,
                                            const PowerSeriesOptions& opts) {
    const int N = opts.order;
    if (N > 15) throw std::invalid_argument("power series order capped at 15");
    const int nxp = p.grid.nx, nep = p.grid.ne;
    Axis xa = space_axis(nxp), ea = ensemble_axis(nep);

    auto data = std::make_shared<PsData>();
    data->order = N;
    for (int a = 0; a <= N; ++a)
        for (int b = 0; a + b <= N; ++b)
            for (int c = 0; a + b + c <= N; ++c)
                for (int d = 0; a + b + c + d <= N; ++d) data->terms.push_back({a, b, c, d});
    const int nt = static_cast<int>(data->terms.size());
    const int nu = 5 * nt;
    data->geo = std::make_shared<CharGeometry>(p.mu, 4);
    CharGeometry& geo = *data->geo;

    std::vector<double> phi1(nep);
    double phi_max = 0.0;
    for (int e = 0; e < nep; ++e) {
        phi1[e] = geo.phi_at_node(1.0, e);
        phi_max = std::max(phi_max, phi1[e]);
    }
    data->u_lo = -2.0 * phi_max;
    data->u_span = 3.0 * phi_max;

    // node-level helpers (collocation uses the parameter nodes in the
    // ensemble slots, so phi lookups stay table-exact)
    auto u_node = [&](double x, double xi, int ie, int je) {
        return geo.phi_at_node(xi, je) - geo.phi_at_node(x, ie);
    };
    auto piece_node = [&](double x, double xi, int ie, int je) {
        if (je < ie)
            return u_node(x, xi, ie, je) + phi1[ie] - phi1[je] >= -1e-12 ? 2 : 3;
        return u_node(x, xi, ie, je) <= 1e-12 ? 0 : 1;
    };
    auto t_node = [&](double x, double xi, int ie, int je, int piece) {
        double u = u_node(x, xi, ie, je);
        if (piece >= 2) u += phi1[ie] - phi1[je];
        return (u - data->u_lo) / data->u_span;
    };

    auto interp_x2 = [&](const Field2& F, double x, int col) {
        return xa.lerp_strided(&F(0, col), nep, x);
    };
    auto interp_x3 = [&](const Field3& F, double x, int i, int j) {
        return xa.lerp_strided(&F(0, i, j), static_cast<size_t>(nep) * nep, x);
    };

    Eigen::MatrixXd AtA = Eigen::MatrixXd::Zero(nu, nu);
    Eigen::VectorXd Atb = Eigen::VectorXd::Zero(nu);
    double res_sq = 0.0;
    long nrows = 0;

    const int blk = 256;
    Eigen::MatrixXd B(blk, nu);
    Eigen::VectorXd rhs(blk);
    int fill = 0;

    auto flush = [&]() {
        if (fill == 0) return;
        AtA.noalias() += B.topRows(fill).transpose() * B.topRows(fill);
        Atb.noalias() += B.topRows(fill).transpose() * rhs.head(fill);
        nrows += fill;
        fill = 0;
    };
    auto push_row = [&](const Eigen::RowVectorXd& row, double b, double w) {
        B.row(fill) = w * row;
        rhs[fill] = w * b;
        res_sq += w * b * w * b;
        if (++fill == blk) flush();
    };

    std::mt19937 rng(opts.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> node(0, nep - 1);

    double Tx[16], dTx[16], Txi[16], dTxi[16], Te[16], Tz[16], Tchi[16], Tt[16];
    Eigen::RowVectorXd rowK(nu), rowL(nu);

    double momK[16];          // chi moments against the K block (xi basis)
    double momL[4][16][16];   // chi moments against the L pieces: [piece][b][d]

    auto add_terms = [&](Eigen::RowVectorXd& row, int block, const double* tx, const double* t2,
                         const double* te, const double* tz, double scale) {
        double* dst = row.data() + block * nt;
        for (int t = 0; t < nt; ++t) {
            const Term& tm = data->terms[t];
            dst[t] += scale * tx[tm.a] * t2[tm.b] * te[tm.c] * tz[tm.d];
        }
    };
    auto add_K_moments = [&](Eigen::RowVectorXd& row, const double* tx, const double* txi,
                             const double* te, const double* mom, double scale) {
        double* dst = row.data();
        for (int t = 0; t < nt; ++t) {
            const Term& tm = data->terms[t];
            dst[t] += scale * tx[tm.a] * txi[tm.b] * te[tm.c] * mom[tm.d];
        }
    };
    auto add_L_moments = [&](Eigen::RowVectorXd& row, const double* tx, const double* te,
                             double mom[4][16][16], double scale) {
        for (int s = 0; s < 4; ++s) {
            double* dst = row.data() + (1 + s) * nt;
            for (int t = 0; t < nt; ++t) {
                const Term& tm = data->terms[t];
                dst[t] += scale * tx[tm.a] * te[tm.c] * mom[s][tm.b][tm.d];
            }
        }
    };
    auto clear_L_moments = [&]() {
        for (int s = 0; s < 4; ++s)
            for (int b = 0; b <= N; ++b)
                for (int d = 0; d <= N; ++d) momL[s][b][d] = 0.0;
    };
    // accumulate the (eta fixed, chi integrated) L moments at (x, xi)
    auto gather_L_moments = [&](double x, double xi, int ie,
                                const std::function<double(int)>& coeff_of) {
        for (int c = 0; c < nep; ++c) {
            int pc = piece_node(x, xi, ie, c);
            cheb(t_node(x, xi, ie, c, pc), N, Tt, nullptr);
            cheb(ea[c], N, Tchi, nullptr);
            double f = coeff_of(c) / nep;
            for (int b = 0; b <= N; ++b)
                for (int d = 0; d <= N; ++d) momL[pc][b][d] += f * Tt[b] * Tchi[d];
        }
    };

    // ---- interior PDE rows ----
    for (int pt = 0; pt < opts.interior_points; ++pt) {
        double u = uni(rng), v = uni(rng);
        double x = std::max(u, v), xi = std::min(u, v);
        int ie = node(rng), je = node(rng);
        double eta = ea[ie], zeta = ea[je];
        int pc_self = piece_node(x, xi, ie, je);

        cheb(x, N, Tx, dTx);
        cheb(xi, N, Txi, dTxi);
        cheb(eta, N, Te, nullptr);
        cheb(zeta, N, Tz, nullptr);

        double mu_v = interp_x2(p.mu, x, ie);
        double lam_v = interp_x2(p.lambda, xi, je);
        double lamx_v = interp_x2(p.lambda_x, xi, je);
        double mux_v = interp_x2(p.mu_x, xi, je);

        // K equation: mu K_x - lam K_xi - lam_xi K - int K sigma - int L theta = 0
        for (int d = 0; d <= N; ++d) momK[d] = 0.0;
        clear_L_moments();
        for (int c = 0; c < nep; ++c) {
            cheb(ea[c], N, Tchi, nullptr);
            double sig_v = interp_x3(p.sigma, xi, c, je) / nep;
            for (int d = 0; d <= N; ++d) momK[d] += Tchi[d] * sig_v;
        }
        gather_L_moments(x, xi, ie, [&](int c) { return interp_x3(p.theta, xi, c, je); });
        rowK.setZero();
        add_terms(rowK, 0, dTx, Txi, Te, Tz, mu_v);
        add_terms(rowK, 0, Tx, dTxi, Te, Tz, -lam_v);
        add_terms(rowK, 0, Tx, Txi, Te, Tz, -lamx_v);
        add_K_moments(rowK, Tx, Txi, Te, momK, -1.0);
        add_L_moments(rowK, Tx, Te, momL, -1.0);
        push_row(rowK, 0.0, 1.0);

        // L equation in the invariant coordinate:
        // mu(x,eta) P_x + mu_xi(xi,zeta) P - int K W - int L psi = 0
        for (int d = 0; d <= N; ++d) momK[d] = 0.0;
        clear_L_moments();
        for (int c = 0; c < nep; ++c) {
            cheb(ea[c], N, Tchi, nullptr);
            double w_v = interp_x3(p.W, xi, c, je) / nep;
            for (int d = 0; d <= N; ++d) momK[d] += Tchi[d] * w_v;
        }
        gather_L_moments(x, xi, ie, [&](int c) { return interp_x3(p.psi, xi, c, je); });
        cheb(t_node(x, xi, ie, je, pc_self), N, Tt, nullptr);
        rowL.setZero();
        add_terms(rowL, 1 + pc_self, dTx, Tt, Te, Tz, mu_v);
        add_terms(rowL, 1 + pc_self, Tx, Tt, Te, Tz, mux_v);
        add_K_moments(rowL, Tx, Txi, Te, momK, -1.0);
        add_L_moments(rowL, Tx, Te, momL, -1.0);
        push_row(rowL, 0.0, 1.0);
    }

    auto diag_L_rhs = [&](double x, int i, int j) {
        if (p.psi_tilde) return -interp_x3(*p.psi_tilde, x, i, j);
        return interp_x3(p.psi, x, i, j) / (interp_x2(p.mu, x, j) - interp_x2(p.mu, x, i));
    };

    // ---- boundary rows ----
    for (int pt = 0; pt < opts.boundary_points; ++pt) {
        double x = uni(rng);
        int i = node(rng), j = node(rng);
        double eta = ea[i], zeta = ea[j];
        cheb(x, N, Tx, nullptr);
        cheb(x, N, Txi, nullptr);
        cheb(eta, N, Te, nullptr);
        cheb(zeta, N, Tz, nullptr);
        if (i != j || p.psi_tilde) {
            int pc = j < i ? 2 : 1;  // diagonal face: segment b, or the diag-fed c piece
            cheb(t_node(x, x, i, j, pc), N, Tt, nullptr);
            rowL.setZero();
            add_terms(rowL, 1 + pc, Tx, Tt, Te, Tz, 1.0);
            push_row(rowL, diag_L_rhs(x, i, j), opts.boundary_weight);
        }
        rowK.setZero();
        add_terms(rowK, 0, Tx, Txi, Te, Tz, 1.0);
        double b = -interp_x3(p.theta, x, i, j) /
                   (interp_x2(p.lambda, x, j) + interp_x2(p.mu, x, i));
        push_row(rowK, b, opts.boundary_weight);
    }

    // L(x,0,eta,zeta) reflection rows for eta <= zeta (piece a).
    for (int pt = 0; pt < opts.boundary_points; ++pt) {
        double x = uni(rng);
        int i = node(rng), j = node(rng);
        if (i > j) std::swap(i, j);
        cheb(x, N, Tx, nullptr);
        cheb(0.0, N, Txi, nullptr);
        cheb(ea[i], N, Te, nullptr);
        cheb(ea[j], N, Tz, nullptr);
        cheb(t_node(x, 0.0, i, j, 0), N, Tt, nullptr);
        rowL.setZero();
        add_terms(rowL, 1 + 0, Tx, Tt, Te, Tz, 1.0);
        for (int d = 0; d <= N; ++d) momK[d] = 0.0;
        double mu0 = p.mu(0, j);
        for (int c = 0; c < nep; ++c) {
            cheb(ea[c], N, Tchi, nullptr);
            double f = p.lambda(0, c) * p.Q(c, j) / (nep * mu0);
            for (int d = 0; d <= N; ++d) momK[d] += Tchi[d] * f;
        }
        add_K_moments(rowL, Tx, Txi, Te, momK, -1.0);
        push_row(rowL, 0.0, opts.boundary_weight);
    }

    // Artificial datum L(1,xi,eta,zeta) for zeta < eta (piece c2).
    for (int pt = 0; pt < opts.boundary_points; ++pt) {
        double xi = uni(rng);
        int i = node(rng), j = node(rng);
        if (i == j) continue;
        if (i < j) std::swap(i, j);
        cheb(1.0, N, Tx, nullptr);
        cheb(ea[i], N, Te, nullptr);
        cheb(ea[j], N, Tz, nullptr);
        cheb(t_node(1.0, xi, i, j, 3), N, Tt, nullptr);
        rowL.setZero();
        add_terms(rowL, 1 + 3, Tx, Tt, Te, Tz, 1.0);
        push_row(rowL, diag_L_rhs(xi, i, j), opts.boundary_weight);
    }

    // Value continuity of the two c pieces on their shared plane (the
    // characteristic through the corner (1,1)): data on both sides agree
    // there, only the derivative may kink.
    for (int pt = 0; pt < opts.boundary_points; ++pt) {
        double x = uni(rng);
        int i = node(rng), j = node(rng);
        if (i == j) continue;
        if (i < j) std::swap(i, j);
        double target = geo.phi_at_node(x, i) - (phi1[i] - phi1[j]);
        if (target < 0.0) continue;
        double xi = geo.phi_inv_at_node(target, j);
        if (xi > x) continue;
        cheb(x, N, Tx, nullptr);
        cheb(ea[i], N, Te, nullptr);
        cheb(ea[j], N, Tz, nullptr);
        cheb(t_node(x, xi, i, j, 2), N, Tt, nullptr);
        rowL.setZero();
        add_terms(rowL, 1 + 2, Tx, Tt, Te, Tz, 1.0);
        add_terms(rowL, 1 + 3, Tx, Tt, Te, Tz, -1.0);
        push_row(rowL, 0.0, opts.boundary_weight);
    }
    flush();

    double ridge = opts.ridge * AtA.diagonal().maxCoeff();
    AtA.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA);
    Eigen::VectorXd sol = ldlt.solve(Atb);

    data->coef.resize(5);
    for (int b = 0; b < 5; ++b) data->coef[b] = sol.segment(b * nt, nt);

    double rss = sol.dot(AtA * sol) - 2.0 * sol.dot(Atb) + res_sq - ridge * sol.squaredNorm();
    rss = std::max(0.0, rss);

    // ---- evaluate onto the output grid ----
    ContinuumKernels out;
    out.nx = out_nx;
    out.ne = out_ne;
    out.method = KernelMethod::PowerSeries;
    out.ps_order = N;
    out.ps_residual = std::sqrt(rss / std::max<long>(1, nrows));
    out.K = Field4(out_nx, out_nx, out_ne, out_ne);
    out.L = Field4(out_nx, out_nx, out_ne, out_ne);
    out.rho = Field3(out_nx, out_ne, out_ne);
    out.labels.assign(static_cast<size_t>(out_nx) * out_nx * out_ne * out_ne, 0);
    Axis oxa = space_axis(out_nx), oea = ensemble_axis(out_ne);
    for (int i = 0; i < out_ne; ++i)
        for (int j = i; j < out_ne; ++j)
            for (int k = 0; k < out_nx; ++k)
                out.rho(k, i, j) = geo.rho(oxa[k], oea[i], oea[j]);
    // travel times of the output nodes
    Field2 PHI(out_nx, out_ne);
    std::vector<double> PHI1(out_ne);
    for (int i = 0; i < out_ne; ++i) {
        for (int k = 0; k < out_nx; ++k) PHI(k, i) = geo.phi(oxa[k], oea[i]);
        PHI1[i] = geo.phi(1.0, oea[i]);
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int xk = 0; xk < out_nx; ++xk) {
        double TxL[16], TxiL[16], TeL[16], TzL[16], TtL[16];
        cheb(oxa[xk], N, TxL, nullptr);
        for (int xik = 0; xik <= xk; ++xik) {
            cheb(oxa[xik], N, TxiL, nullptr);
            double* kp = out.K.plane(xk, xik);
            double* lp = out.L.plane(xk, xik);
            // contract K over (a, b) once per (x, xi)
            double Dk[16][16] = {};
            for (int t = 0; t < nt; ++t) {
                const Term& tm = data->terms[t];
                Dk[tm.c][tm.d] += TxL[tm.a] * TxiL[tm.b] * data->coef[0][t];
            }
            // contract the L pieces over a only (their second slot needs t)
            for (int i = 0; i < out_ne; ++i) {
                cheb(oea[i], N, TeL, nullptr);
                double kc[16];
                for (int d = 0; d <= N; ++d) {
                    kc[d] = 0.0;
                    for (int c = 0; c <= N; ++c) kc[d] += Dk[c][d] * TeL[c];
                }
                double El[4][16][16];
                for (int s = 0; s < 4; ++s)
                    for (int b = 0; b <= N; ++b)
                        for (int d = 0; d <= N; ++d) El[s][b][d] = 0.0;
                for (int t = 0; t < nt; ++t) {
                    const Term& tm = data->terms[t];
                    double w = TxL[tm.a] * TeL[tm.c];
                    for (int s = 0; s < 4; ++s) El[s][tm.b][tm.d] += w * data->coef[1 + s][t];
                }
                for (int j = 0; j < out_ne; ++j) {
                    cheb(oea[j], N, TzL, nullptr);
                    double kv = 0.0;
                    for (int d = 0; d <= N; ++d) kv += kc[d] * TzL[d];
                    // piece decision and invariant coordinate
                    double u = PHI(xik, j) - PHI(xk, i);
                    int s;
                    if (oea[j] < oea[i]) {
                        double up = u + PHI1[i] - PHI1[j];
                        s = up >= -1e-12 ? 2 : 3;
                        u = up;
                    } else {
                        s = u <= 1e-12 ? 0 : 1;
                    }
                    cheb((u - data->u_lo) / data->u_span, N, TtL, nullptr);
                    double lv = 0.0;
                    for (int b = 0; b <= N; ++b) {
                        double inner = 0.0;
                        for (int d = 0; d <= N; ++d) inner += El[s][b][d] * TzL[d];
                        lv += TtL[b] * inner;
                    }
                    kp[i * out_ne + j] = kv;
                    lp[i * out_ne + j] = lv;
                    out.labels[((static_cast<size_t>(xk) * out_nx + xik) * out_ne + i) * out_ne +
                               j] = static_cast<signed char>(s);
                }
            }
        }
    }

    auto d = data;
    out.evaluator = [d](int which, double x, double xi, double eta, double zeta) {
        return d->eval(which, x, xi, eta, zeta);
    };
    out.seg_evaluator = [d](int which, int seg, double x, double xi, double eta, double zeta) {
        if (which == 0) return d->eval_block(0, x, xi, eta, zeta);
        return d->eval_block(1 + seg, x, xi, eta, zeta);
    };
    return out;
}

}  // namespace hyperctl
