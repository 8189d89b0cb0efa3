#include "hyperctl/lift.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace hyperctl {

namespace {

inline int cell_of(double t, int k) {
    int c = static_cast<int>(t * k);
    return std::min(k - 1, std::max(0, c));
}

// Piecewise-linear interpolation through anchors at i/k (i=1..k) with
// linear extrapolation on [0, 1/k); affine anchor data is reproduced
// exactly on the whole interval.
inline double anchor_interp(const double* values, int k, double t) {
    if (k == 1) return values[0];
    double s = t * k - 1.0;
    int i = static_cast<int>(std::floor(s));
    i = std::min(k - 2, std::max(0, i));
    double w = s - i;
    return (1.0 - w) * values[i] + w * values[i + 1];
}

}  // namespace

std::vector<double> lift(const std::vector<double>& values, int ne) {
    if (values.empty()) throw std::invalid_argument("lift: empty vector");
    const int k = static_cast<int>(values.size());
    Axis ea = ensemble_axis(ne);
    std::vector<double> out(static_cast<size_t>(ne));
    for (int i = 0; i < ne; ++i) out[static_cast<size_t>(i)] = values[static_cast<size_t>(cell_of(ea[i], k))];
    return out;
}

std::vector<double> project(const std::vector<double>& field, int k) {
    const int ne = static_cast<int>(field.size());
    if (k > ne)
        throw std::invalid_argument("project: k exceeds field resolution (" + std::to_string(k) +
                                    " > " + std::to_string(ne) + ")");
    Axis ea = ensemble_axis(ne);
    // Neumaier-compensated cell sums: keeps project(lift(b)) == b exactly
    // even when a cell count is not a power of two.
    std::vector<double> sums(static_cast<size_t>(k), 0.0), comp(static_cast<size_t>(k), 0.0);
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < ne; ++i) {
        size_t c = static_cast<size_t>(cell_of(ea[i], k));
        double v = field[static_cast<size_t>(i)];
        double t = sums[c] + v;
        comp[c] += std::abs(sums[c]) >= std::abs(v) ? (sums[c] - t) + v : (v - t) + sums[c];
        sums[c] = t;
        counts[c]++;
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<size_t>(c)] == 0)
            throw std::invalid_argument("project: cell " + std::to_string(c + 1) + " contains no node");
        sums[static_cast<size_t>(c)] =
            (sums[static_cast<size_t>(c)] + comp[static_cast<size_t>(c)]) / counts[static_cast<size_t>(c)];
    }
    return sums;
}

ContinuumParams lift_params(const NmParams& p, const EnsembleGrid& grid) {
    ContinuumParams c;
    c.grid = grid;
    const int nx = grid.nx, ne = grid.ne;
    Axis xa = space_axis(nx), ea = ensemble_axis(ne);
    std::vector<int> cn(static_cast<size_t>(ne)), cm(static_cast<size_t>(ne));
    for (int i = 0; i < ne; ++i) {
        cn[static_cast<size_t>(i)] = cell_of(ea[i], p.n);
        cm[static_cast<size_t>(i)] = cell_of(ea[i], p.m);
    }
    c.lambda = Field2(nx, ne);
    c.lambda_x = Field2(nx, ne);
    c.mu = Field2(nx, ne);
    c.mu_x = Field2(nx, ne);
    c.sigma = Field3(nx, ne, ne);
    c.W = Field3(nx, ne, ne);
    c.theta = Field3(nx, ne, ne);
    c.psi = Field3(nx, ne, ne);
    c.Q = Field2(ne, ne);
    c.R = Field2(ne, ne);
    for (int k = 0; k < nx; ++k) {
        double x = xa[k];
        for (int i = 0; i < ne; ++i) {
            c.lambda(k, i) = p.lambda[static_cast<size_t>(cn[static_cast<size_t>(i)])](x);
            c.lambda_x(k, i) = p.lambda[static_cast<size_t>(cn[static_cast<size_t>(i)])].deriv(x);
            c.mu(k, i) = p.mu[static_cast<size_t>(cm[static_cast<size_t>(i)])](x);
            c.mu_x(k, i) = p.mu[static_cast<size_t>(cm[static_cast<size_t>(i)])].deriv(x);
            for (int j = 0; j < ne; ++j) {
                c.sigma(k, i, j) = p.Sigma[static_cast<size_t>(cn[static_cast<size_t>(i)])][static_cast<size_t>(cn[static_cast<size_t>(j)])](x);
                c.W(k, i, j) = p.W[static_cast<size_t>(cn[static_cast<size_t>(i)])][static_cast<size_t>(cm[static_cast<size_t>(j)])](x);
                c.theta(k, i, j) = p.Theta[static_cast<size_t>(cm[static_cast<size_t>(i)])][static_cast<size_t>(cn[static_cast<size_t>(j)])](x);
                c.psi(k, i, j) = p.Psi[static_cast<size_t>(cm[static_cast<size_t>(i)])][static_cast<size_t>(cm[static_cast<size_t>(j)])](x);
            }
        }
    }
    for (int i = 0; i < ne; ++i)
        for (int j = 0; j < ne; ++j) {
            c.Q(i, j) = p.Q(cn[static_cast<size_t>(i)], cm[static_cast<size_t>(j)]);
            c.R(i, j) = p.R(cm[static_cast<size_t>(i)], cn[static_cast<size_t>(j)]);
        }
    return c;
}

namespace {

// Nonnegative least squares for the monotone mu fit. The basis is tiny
// (order <= 3), so enumerate active sets and keep the best feasible one.
// Returns the coefficients and the row-combination matrix that maps the
// data vector to them (used to differentiate the fit in x).
struct MuFit {
    std::array<double, 3> a{};
    int order = 0;
    // map[l][j]: a_l = sum_j map[l][j] * b_j over the m-1 data rows
    std::vector<std::array<double, 3>> map_t;  // (m-1) rows, column l
};

MuFit fit_mu_coeffs(const std::vector<double>& basis_eta, const std::vector<double>& b, int order) {
    // basis_eta holds (1 - j/m) for j = 1..m-1; design A(j,l) = basis^l+1.
    const int rows = static_cast<int>(b.size());
    MuFit best;
    best.order = order;
    double best_res = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << order); ++mask) {
        // Solve LS restricted to the columns in mask.
        std::vector<int> cols;
        for (int l = 0; l < order; ++l)
            if (mask & (1 << l)) cols.push_back(l);
        const int nc = static_cast<int>(cols.size());
        double ata[3][3] = {};
        double atb[3] = {};
        for (int r = 0; r < rows; ++r) {
            double av[3];
            for (int c = 0; c < nc; ++c) av[c] = std::pow(basis_eta[static_cast<size_t>(r)], cols[static_cast<size_t>(c)] + 1);
            for (int c = 0; c < nc; ++c) {
                atb[c] += av[c] * b[static_cast<size_t>(r)];
                for (int d = 0; d < nc; ++d) ata[c][d] += av[c] * av[d];
            }
        }
        // Tiny Gaussian elimination with the inverse retained.
        double inv[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        bool singular = false;
        double M[3][3];
        for (int c = 0; c < nc; ++c)
            for (int d = 0; d < nc; ++d) M[c][d] = ata[c][d];
        for (int c = 0; c < nc; ++c) {
            int piv = c;
            for (int r = c + 1; r < nc; ++r)
                if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
            if (std::abs(M[piv][c]) < 1e-14) {
                singular = true;
                break;
            }
            std::swap(M[c], M[piv]);
            std::swap(inv[c], inv[piv]);
            double g = M[c][c];
            for (int d = 0; d < nc; ++d) {
                M[c][d] /= g;
                inv[c][d] /= g;
            }
            for (int r = 0; r < nc; ++r) {
                if (r == c) continue;
                double f = M[r][c];
                for (int d = 0; d < nc; ++d) {
                    M[r][d] -= f * M[c][d];
                    inv[r][d] -= f * inv[c][d];
                }
            }
        }
        if (singular) continue;
        double sol[3] = {};
        for (int c = 0; c < nc; ++c)
            for (int d = 0; d < nc; ++d) sol[c] += inv[c][d] * atb[d];
        bool feasible = true;
        for (int c = 0; c < nc; ++c)
            if (sol[c] < -1e-12) feasible = false;
        if (!feasible) continue;
        // Residual.
        double res = 0.0;
        for (int r = 0; r < rows; ++r) {
            double fit = 0.0;
            for (int c = 0; c < nc; ++c)
                fit += sol[c] * std::pow(basis_eta[static_cast<size_t>(r)], cols[static_cast<size_t>(c)] + 1);
            double e = fit - b[static_cast<size_t>(r)];
            res += e * e;
        }
        if (res < best_res - 1e-15) {
            best_res = res;
            best.a = {0.0, 0.0, 0.0};
            best.map_t.assign(static_cast<size_t>(rows), {0.0, 0.0, 0.0});
            for (int c = 0; c < nc; ++c) {
                best.a[static_cast<size_t>(cols[static_cast<size_t>(c)])] = std::max(0.0, sol[c]);
                for (int r = 0; r < rows; ++r) {
                    double w = 0.0;
                    for (int d = 0; d < nc; ++d)
                        w += inv[c][d] * std::pow(basis_eta[static_cast<size_t>(r)], cols[static_cast<size_t>(d)] + 1);
                    best.map_t[static_cast<size_t>(r)][static_cast<size_t>(cols[static_cast<size_t>(c)])] = w;
                }
            }
        }
    }
    if (!std::isfinite(best_res))
        throw std::runtime_error("mu fit failed: no feasible nonnegative coefficient set");
    return best;
}

class AnchorModel final : public ContinuumModel {
public:
    explicit AnchorModel(const NmParams& p) : p_(p) {
        ValidationReport rep = validate_nm(p_, 33);
        if (!rep.ok())
            throw std::invalid_argument("build_continuum: source family invalid:\n" +
                                        rep.to_string());
        // psi-tilde anchors; the diagonal is filled from adjacent
        // off-diagonal anchors (any bounded fill keeps the ratio bound).
        psi_tilde_rows_.resize(static_cast<size_t>(p_.m) * p_.m);
    }

    ContinuumParams sample(const EnsembleGrid& grid) const override {
        ContinuumParams c;
        c.grid = grid;
        const int nx = grid.nx, ne = grid.ne;
        const int n = p_.n, m = p_.m;
        Axis xa = space_axis(nx), ea = ensemble_axis(ne);
        c.lambda = Field2(nx, ne);
        c.lambda_x = Field2(nx, ne);
        c.mu = Field2(nx, ne);
        c.mu_x = Field2(nx, ne);
        c.sigma = Field3(nx, ne, ne);
        c.W = Field3(nx, ne, ne);
        c.theta = Field3(nx, ne, ne);
        c.psi = Field3(nx, ne, ne);
        c.psi_tilde = Field3(nx, ne, ne);
        c.Q = Field2(ne, ne);
        c.R = Field2(ne, ne);

        std::vector<double> la(static_cast<size_t>(n)), lad(static_cast<size_t>(n));
        std::vector<double> muv(static_cast<size_t>(m)), mud(static_cast<size_t>(m));
        std::vector<double> srow(static_cast<size_t>(std::max(n, m)));
        const int order = std::min(3, std::max(1, m - 1));
        std::vector<double> basis(static_cast<size_t>(std::max(0, m - 1)));
        for (int j = 1; j < m; ++j) basis[static_cast<size_t>(j - 1)] = 1.0 - static_cast<double>(j) / m;

        // psi-tilde anchor table (x-dependent; recomputed per x-node).
        Field2 pt(m, m);

        for (int k = 0; k < nx; ++k) {
            const double x = xa[k];
            for (int i = 0; i < n; ++i) {
                la[static_cast<size_t>(i)] = p_.lambda[static_cast<size_t>(i)](x);
                lad[static_cast<size_t>(i)] = p_.lambda[static_cast<size_t>(i)].deriv(x);
            }
            for (int j = 0; j < m; ++j) {
                muv[static_cast<size_t>(j)] = p_.mu[static_cast<size_t>(j)](x);
                mud[static_cast<size_t>(j)] = p_.mu[static_cast<size_t>(j)].deriv(x);
            }
            // Monotone mu: mu(x,eta) = mu_m(x) + sum a_l (1-eta)^l.
            std::array<double, 3> a{}, ad{};
            if (m >= 2) {
                std::vector<double> b(static_cast<size_t>(m - 1)), bd(static_cast<size_t>(m - 1));
                for (int j = 1; j < m; ++j) {
                    b[static_cast<size_t>(j - 1)] = muv[static_cast<size_t>(j - 1)] - muv[static_cast<size_t>(m - 1)];
                    bd[static_cast<size_t>(j - 1)] = mud[static_cast<size_t>(j - 1)] - mud[static_cast<size_t>(m - 1)];
                }
                MuFit fit = fit_mu_coeffs(basis, b, order);
                a = fit.a;
                for (int r = 0; r < m - 1; ++r)
                    for (int l = 0; l < 3; ++l) ad[static_cast<size_t>(l)] += fit.map_t[static_cast<size_t>(r)][static_cast<size_t>(l)] * bd[static_cast<size_t>(r)];
            }
            for (int i = 0; i < ne; ++i) {
                double y = ea[i];
                c.lambda(k, i) = anchor_interp(la.data(), n, y);
                c.lambda_x(k, i) = anchor_interp(lad.data(), n, y);
                double me = 1.0 - y;
                double mu_val = muv[static_cast<size_t>(m - 1)], mu_dx = mud[static_cast<size_t>(m - 1)];
                double pw = 1.0;
                for (int l = 0; l < 3; ++l) {
                    pw *= me;
                    mu_val += a[static_cast<size_t>(l)] * pw;
                    mu_dx += ad[static_cast<size_t>(l)] * pw;
                }
                c.mu(k, i) = mu_val;
                c.mu_x(k, i) = mu_dx;
            }
            // psi-tilde anchors at this x.
            for (int j = 0; j < m; ++j)
                for (int q = 0; q < m; ++q)
                    if (j != q)
                        pt(j, q) = p_.Psi[static_cast<size_t>(j)][static_cast<size_t>(q)](x) /
                                   (muv[static_cast<size_t>(j)] - muv[static_cast<size_t>(q)]);
            for (int j = 0; j < m; ++j) {
                double s = 0.0;
                int cnt = 0;
                for (int d : {-1, 1}) {
                    if (j + d >= 0 && j + d < m) {
                        s += pt(j, j + d) + pt(j + d, j);
                        cnt += 2;
                    }
                }
                pt(j, j) = cnt ? s / cnt : 0.0;
            }
            // 2-D anchor interpolation for the coupling fields: build the
            // anchor tables once per x-node, then interpolate separately in
            // each ensemble slot.
            auto fill2 = [&](int rows, int cols, auto&& anchor, Field3& dst,
                             bool times_mu_gap, int k_node) {
                thread_local std::vector<double> table, colline, rowvals;
                table.assign(static_cast<size_t>(rows) * cols, 0.0);
                for (int r = 0; r < rows; ++r)
                    for (int cc = 0; cc < cols; ++cc)
                        table[static_cast<size_t>(r) * cols + cc] = anchor(r, cc);
                // interpolate each anchor row onto the zeta nodes
                thread_local std::vector<double> rowline;
                rowline.assign(static_cast<size_t>(rows) * ne, 0.0);
                for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < ne; ++j)
                        rowline[static_cast<size_t>(r) * ne + j] =
                            anchor_interp(&table[static_cast<size_t>(r) * cols], cols, ea[j]);
                rowvals.assign(static_cast<size_t>(rows), 0.0);
                for (int j = 0; j < ne; ++j) {
                    for (int r = 0; r < rows; ++r) rowvals[static_cast<size_t>(r)] = rowline[static_cast<size_t>(r) * ne + j];
                    for (int i = 0; i < ne; ++i) {
                        double v = anchor_interp(rowvals.data(), rows, ea[i]);
                        if (times_mu_gap) {
                            (*c.psi_tilde)(k_node, i, j) = v;
                            dst(k_node, i, j) = v * (c.mu(k_node, i) - c.mu(k_node, j));
                        } else {
                            dst(k_node, i, j) = v;
                        }
                    }
                }
            };
            fill2(n, n, [&](int r, int cc) { return p_.Sigma[static_cast<size_t>(r)][static_cast<size_t>(cc)](x); },
                  c.sigma, false, k);
            fill2(n, m, [&](int r, int cc) { return p_.W[static_cast<size_t>(r)][static_cast<size_t>(cc)](x); },
                  c.W, false, k);
            fill2(m, n, [&](int r, int cc) { return p_.Theta[static_cast<size_t>(r)][static_cast<size_t>(cc)](x); },
                  c.theta, false, k);
            fill2(m, m, [&](int r, int cc) { return pt(r, cc); }, c.psi, true, k);
        }
        // Boundary couplings: constant anchors, interpolated once.
        {
            thread_local std::vector<double> rowvals;
            auto fillQ = [&](const Field2& anchors, Field2& dst, int rows, int cols) {
                thread_local std::vector<double> rowline;
                rowline.assign(static_cast<size_t>(rows) * ne, 0.0);
                thread_local std::vector<double> line;
                line.assign(static_cast<size_t>(cols), 0.0);
                for (int r = 0; r < rows; ++r) {
                    for (int cc = 0; cc < cols; ++cc) line[static_cast<size_t>(cc)] = anchors(r, cc);
                    for (int j = 0; j < ne; ++j)
                        rowline[static_cast<size_t>(r) * ne + j] = anchor_interp(line.data(), cols, ea[j]);
                }
                rowvals.assign(static_cast<size_t>(rows), 0.0);
                for (int j = 0; j < ne; ++j) {
                    for (int r = 0; r < rows; ++r) rowvals[static_cast<size_t>(r)] = rowline[static_cast<size_t>(r) * ne + j];
                    for (int i = 0; i < ne; ++i) dst(i, j) = anchor_interp(rowvals.data(), rows, ea[i]);
                }
            };
            fillQ(p_.Q, c.Q, p_.n, p_.m);
            fillQ(p_.R, c.R, p_.m, p_.n);
        }
        return c;
    }

private:
    NmParams p_;
    std::vector<double> psi_tilde_rows_;
};

}  // namespace

std::unique_ptr<ContinuumModel> make_anchor_model(const NmParams& p) {
    return std::make_unique<AnchorModel>(p);
}

ContinuumParams build_continuum(const NmParams& p, const EnsembleGrid& grid) {
    return AnchorModel(p).sample(grid);
}

AveragedParams build_averaged(const NmParams& p, AveragingMode mode) {
    AveragedParams a;
    const int nxq = 129;
    Axis xa = space_axis(nxq);
    std::vector<double> lam(nxq), mu(nxq), sig(nxq), w(nxq), th(nxq);
    if (mode == AveragingMode::IndexMean) {
        for (int k = 0; k < nxq; ++k) {
            double x = xa[k];
            double s = 0;
            for (int i = 0; i < p.n; ++i) s += p.lambda[static_cast<size_t>(i)](x);
            lam[static_cast<size_t>(k)] = s / p.n;
            s = 0;
            for (int j = 0; j < p.m; ++j) s += p.mu[static_cast<size_t>(j)](x);
            mu[static_cast<size_t>(k)] = s / p.m;
            s = 0;
            for (int i = 0; i < p.n; ++i)
                for (int l = 0; l < p.n; ++l) s += p.Sigma[static_cast<size_t>(i)][static_cast<size_t>(l)](x);
            sig[static_cast<size_t>(k)] = s / (p.n * p.n);
            s = 0;
            for (int i = 0; i < p.n; ++i)
                for (int j = 0; j < p.m; ++j) s += p.W[static_cast<size_t>(i)][static_cast<size_t>(j)](x);
            w[static_cast<size_t>(k)] = s / (p.n * p.m);
            s = 0;
            for (int j = 0; j < p.m; ++j)
                for (int l = 0; l < p.n; ++l) s += p.Theta[static_cast<size_t>(j)][static_cast<size_t>(l)](x);
            th[static_cast<size_t>(k)] = s / (p.m * p.n);
        }
        double qs = 0;
        for (int i = 0; i < p.n; ++i)
            for (int j = 0; j < p.m; ++j) qs += p.Q(i, j);
        a.q_bar = qs / (p.n * p.m);
        double rs = 0;
        for (int j = 0; j < p.m; ++j)
            for (int i = 0; i < p.n; ++i) rs += p.R(j, i);
        a.r_bar = rs / (p.n * p.m);
    } else {
        // Continuum mean: quadrature means of the anchor construction.
        EnsembleGrid g;
        g.nx = nxq;
        g.ne = 64;
        ContinuumParams c = build_continuum(p, g);
        const int ne = g.ne;
        for (int k = 0; k < nxq; ++k) {
            double s = 0;
            for (int i = 0; i < ne; ++i) s += c.lambda(k, i);
            lam[static_cast<size_t>(k)] = s / ne;
            s = 0;
            for (int i = 0; i < ne; ++i) s += c.mu(k, i);
            mu[static_cast<size_t>(k)] = s / ne;
            double ss = 0, sw = 0, st = 0;
            for (int i = 0; i < ne; ++i)
                for (int j = 0; j < ne; ++j) {
                    ss += c.sigma(k, i, j);
                    sw += c.W(k, i, j);
                    st += c.theta(k, i, j);
                }
            sig[static_cast<size_t>(k)] = ss / (ne * ne);
            w[static_cast<size_t>(k)] = sw / (ne * ne);
            th[static_cast<size_t>(k)] = st / (ne * ne);
        }
        double qs = 0, rs = 0;
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < ne; ++j) {
                qs += c.Q(i, j);
                rs += c.R(i, j);
            }
        a.q_bar = qs / (ne * ne);
        a.r_bar = rs / (ne * ne);
    }
    a.lambda_bar = ScalarFn::from_samples(lam, xa);
    a.mu_bar = ScalarFn::from_samples(mu, xa);
    a.sigma_bar = ScalarFn::from_samples(sig, xa);
    a.w_bar = ScalarFn::from_samples(w, xa);
    a.theta_bar = ScalarFn::from_samples(th, xa);

    // Realized closeness radius: worst deviation of any component from
    // the averaged coefficient (velocity lines include derivatives).
    double eps = 0.0;
    for (int k = 0; k < nxq; ++k) {
        double x = xa[k];
        for (int i = 0; i < p.n; ++i)
            eps = std::max(eps, std::abs(p.lambda[static_cast<size_t>(i)](x) - a.lambda_bar(x)) +
                                    std::abs(p.lambda[static_cast<size_t>(i)].deriv(x) - a.lambda_bar.deriv(x)));
        for (int j = 0; j < p.m; ++j)
            eps = std::max(eps, std::abs(p.mu[static_cast<size_t>(j)](x) - a.mu_bar(x)) +
                                    std::abs(p.mu[static_cast<size_t>(j)].deriv(x) - a.mu_bar.deriv(x)));
        for (int i = 0; i < p.n; ++i)
            for (int l = 0; l < p.n; ++l)
                eps = std::max(eps, std::abs(p.Sigma[static_cast<size_t>(i)][static_cast<size_t>(l)](x) - a.sigma_bar(x)));
        for (int i = 0; i < p.n; ++i)
            for (int j = 0; j < p.m; ++j)
                eps = std::max(eps, std::abs(p.W[static_cast<size_t>(i)][static_cast<size_t>(j)](x) - a.w_bar(x)));
        for (int j = 0; j < p.m; ++j)
            for (int l = 0; l < p.n; ++l)
                eps = std::max(eps, std::abs(p.Theta[static_cast<size_t>(j)][static_cast<size_t>(l)](x) - a.theta_bar(x)));
        for (int j = 0; j < p.m; ++j)
            for (int q = 0; q < p.m; ++q)
                eps = std::max(eps, std::abs(p.Psi[static_cast<size_t>(j)][static_cast<size_t>(q)](x)));
    }
    for (int i = 0; i < p.n; ++i)
        for (int j = 0; j < p.m; ++j) eps = std::max(eps, std::abs(p.Q(i, j) - a.q_bar));
    for (int j = 0; j < p.m; ++j)
        for (int i = 0; i < p.n; ++i) eps = std::max(eps, std::abs(p.R(j, i) - a.r_bar));
    a.eps_bar = eps;
    return a;
}

double ClosenessNorms::max() const {
    return std::max({lambda, mu, sigma, w, theta, psi, q, r});
}

ClosenessNorms parameter_closeness(const NmParams& p, const ContinuumModel& model,
                                   const EnsembleGrid& grid) {
    ContinuumParams lifted = lift_params(p, grid);
    ContinuumParams cont = model.sample(grid);
    const int nx = grid.nx, ne = grid.ne;
    ClosenessNorms out;
    auto l2_1d = [&](const Field2& A, const Field2& B, int k) {
        double s = 0;
        for (int i = 0; i < ne; ++i) {
            double d = A(k, i) - B(k, i);
            s += d * d;
        }
        return std::sqrt(s / ne);
    };
    auto l2_2d = [&](const Field3& A, const Field3& B, int k) {
        double s = 0;
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < ne; ++j) {
                double d = A(k, i, j) - B(k, i, j);
                s += d * d;
            }
        return std::sqrt(s / (ne * ne));
    };
    for (int k = 0; k < nx; ++k) {
        out.lambda = std::max(out.lambda, l2_1d(lifted.lambda, cont.lambda, k) +
                                              l2_1d(lifted.lambda_x, cont.lambda_x, k));
        out.mu = std::max(out.mu, l2_1d(lifted.mu, cont.mu, k) + l2_1d(lifted.mu_x, cont.mu_x, k));
        out.sigma = std::max(out.sigma, l2_2d(lifted.sigma, cont.sigma, k));
        out.w = std::max(out.w, l2_2d(lifted.W, cont.W, k));
        out.theta = std::max(out.theta, l2_2d(lifted.theta, cont.theta, k));
        out.psi = std::max(out.psi, l2_2d(lifted.psi, cont.psi, k));
    }
    double sq = 0, sr = 0;
    for (int i = 0; i < ne; ++i)
        for (int j = 0; j < ne; ++j) {
            double dq = lifted.Q(i, j) - cont.Q(i, j);
            double dr = lifted.R(i, j) - cont.R(i, j);
            sq += dq * dq;
            sr += dr * dr;
        }
    out.q = std::sqrt(sq / (ne * ne));
    out.r = std::sqrt(sr / (ne * ne));
    return out;
}

}  // namespace hyperctl

// --- kernel gain sampling -------------------------------------------------

#include "hyperctl/kernels.hpp"

namespace hyperctl {

namespace {

// Cell mean of a kernel slice at x = 1 over an ensemble cell pair, by
// sub-cell midpoints through the exact evaluator when available, else by
// averaging the grid nodes that fall in the cell.
double cell_mean(const ContinuumKernels& ker, int which, double xi, int i, int ki, int j, int kj,
                 int sub) {
    if (ker.evaluator) {
        double acc = 0.0;
        for (int a = 0; a < sub; ++a)
            for (int b = 0; b < sub; ++b) {
                double eta = (i + (a + 0.5) / sub) / ki;
                double zeta = (j + (b + 0.5) / sub) / kj;
                acc += ker.evaluator(which, 1.0, xi, eta, zeta);
            }
        return acc / (sub * sub);
    }
    const Field4& F = which == 0 ? ker.K : ker.L;
    Axis ea = ensemble_axis(ker.ne);
    Axis xa = space_axis(ker.nx);
    int xb;
    double xw;
    xa.locate(xi, xb, xw);
    double acc = 0.0;
    int cnt = 0;
    for (int a = 0; a < ker.ne; ++a) {
        if (std::min(ki - 1, static_cast<int>(ea[a] * ki)) != i) continue;
        for (int b = 0; b < ker.ne; ++b) {
            if (std::min(kj - 1, static_cast<int>(ea[b] * kj)) != j) continue;
            acc += (1 - xw) * F(ker.nx - 1, xb, a, b) + xw * F(ker.nx - 1, xb + 1, a, b);
            ++cnt;
        }
    }
    return cnt ? acc / cnt : 0.0;
}

}  // namespace

MatrixGains sample_kernel_matrix(const ContinuumKernels& ker, int n, int m, const Axis& xi_axis) {
    if (ker.ne < std::max(n, m))
        throw std::invalid_argument("sample_kernel_matrix: kernel ensemble grid coarser than (n,m)");
    MatrixGains g;
    g.n = n;
    g.m = m;
    g.xi = xi_axis;
    g.K = Field3(m, n, xi_axis.n);
    g.L = Field3(m, m, xi_axis.n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < xi_axis.n; ++k)
                g.K(i, j, k) = cell_mean(ker, 0, xi_axis[k], i, m, j, n, 3);
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < xi_axis.n; ++k)
                g.L(i, j, k) = cell_mean(ker, 1, xi_axis[k], i, m, j, m, 3);
    }
    return g;
}

RowGains sample_kernel_rows(const ContinuumKernels& ker, const Field2& R_field, int m,
                            const Axis& xi_axis, int ne) {
    if (ker.ne < m)
        throw std::invalid_argument("sample_kernel_rows: kernel ensemble grid coarser than m");
    RowGains g;
    g.m = m;
    g.ne = ne;
    g.xi = xi_axis;
    g.Rtilde = Field2(m, ne);
    g.Krows = Field3(m, xi_axis.n, ne);
    g.Lrows = Field3(m, xi_axis.n, ne);
    Axis ea = ensemble_axis(ne);
    // R rows: mean over the chi-cell of the first slot.
    if (R_field.n0() != ne || R_field.n1() != ne)
        throw std::invalid_argument("sample_kernel_rows: R must be sampled on the output grid");
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < ne; ++j) {
            double acc = 0.0;
            int cnt = 0;
            for (int a = 0; a < ne; ++a) {
                if (std::min(m - 1, static_cast<int>(ea[a] * m)) != i) continue;
                acc += R_field(a, j);
                ++cnt;
            }
            g.Rtilde(i, j) = cnt ? acc / cnt : 0.0;
        }
        for (int k = 0; k < xi_axis.n; ++k)
            for (int j = 0; j < ne; ++j) {
                // eta-cell mean of the kernels at x = 1.
                if (ker.evaluator) {
                    const int sub = 3;
                    double acc = 0.0;
                    for (int a = 0; a < sub; ++a) {
                        double eta = (i + (a + 0.5) / sub) / m;
                        acc += ker.evaluator(0, 1.0, xi_axis[k], eta, ea[j]);
                    }
                    g.Krows(i, k, j) = acc / sub;
                    acc = 0.0;
                    for (int a = 0; a < sub; ++a) {
                        double eta = (i + (a + 0.5) / sub) / m;
                        acc += ker.evaluator(1, 1.0, xi_axis[k], eta, ea[j]);
                    }
                    g.Lrows(i, k, j) = acc / sub;
                } else {
                    Axis xa = space_axis(ker.nx);
                    Axis kea = ensemble_axis(ker.ne);
                    int xb;
                    double xw;
                    xa.locate(xi_axis[k], xb, xw);
                    double accK = 0.0, accL = 0.0;
                    int cnt = 0;
                    // nearest kernel-grid zeta node
                    int jz = std::min(ker.ne - 1, static_cast<int>(ea[j] * ker.ne));
                    for (int a = 0; a < ker.ne; ++a) {
                        if (std::min(m - 1, static_cast<int>(kea[a] * m)) != i) continue;
                        accK += (1 - xw) * ker.K(ker.nx - 1, xb, a, jz) +
                                xw * ker.K(ker.nx - 1, xb + 1, a, jz);
                        accL += (1 - xw) * ker.L(ker.nx - 1, xb, a, jz) +
                                xw * ker.L(ker.nx - 1, xb + 1, a, jz);
                        ++cnt;
                    }
                    g.Krows(i, k, j) = cnt ? accK / cnt : 0.0;
                    g.Lrows(i, k, j) = cnt ? accL / cnt : 0.0;
                }
            }
    }
    return g;
}

}  // namespace hyperctl
