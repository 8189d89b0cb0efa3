#include "hyperctl/characteristics.hpp"

#include <algorithm>
#include <cmath>

namespace hyperctl {

CharGeometry::CharGeometry(const Field2& mu, int refine) {
    const int nx = mu.n0();
    ne_ = mu.n1();
    ea_ = ensemble_axis(ne_);
    const int nf = (nx - 1) * refine + 1;
    fx_ = space_axis(nf);
    table_ = Field2(ne_, nf);
    Axis coarse = space_axis(nx);
    // Cumulative trapezoid of 1/mu along the fine axis, with mu linearly
    // interpolated from the sampled field.
    for (int e = 0; e < ne_; ++e) {
        double acc = 0.0;
        double prev = 1.0 / coarse.lerp_strided(&mu(0, e), static_cast<size_t>(ne_), 0.0);
        table_(e, 0) = 0.0;
        for (int k = 1; k < nf; ++k) {
            double cur = 1.0 / coarse.lerp_strided(&mu(0, e), static_cast<size_t>(ne_), fx_[k]);
            acc += 0.5 * (prev + cur) * fx_.dx;
            table_(e, k) = acc;
            prev = cur;
        }
    }
}

double CharGeometry::phi_at_node(double x, int eta_idx) const {
    return fx_.lerp(table_.row(eta_idx), x);
}

double CharGeometry::column_inv(const double* col, double tau) const {
    const int nf = fx_.n;
    if (tau <= 0.0) return 0.0;
    if (tau >= col[nf - 1]) return 1.0;
    int lo = 0, hi = nf - 1;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (col[mid] <= tau)
            lo = mid;
        else
            hi = mid;
    }
    double t = (tau - col[lo]) / (col[hi] - col[lo]);
    return fx_[lo] + t * fx_.dx;
}

double CharGeometry::phi_inv_at_node(double tau, int eta_idx) const {
    return column_inv(table_.row(eta_idx), tau);
}

double CharGeometry::rho_nodes(double x, int eta_idx, int zeta_idx) const {
    return phi_inv_at_node(phi_at_node(x, eta_idx), zeta_idx);
}

double CharGeometry::phi(double x, double eta) const {
    int i;
    double w;
    ea_.locate(eta, i, w);
    return (1.0 - w) * phi_at_node(x, i) + w * phi_at_node(x, i + 1);
}

double CharGeometry::phi_inv(double tau, double zeta) const {
    int i;
    double w;
    ea_.locate(zeta, i, w);
    if (w == 0.0) return phi_inv_at_node(tau, i);
    // Invert the eta-interpolated column by bisection in x.
    const int nf = fx_.n;
    const double* a = table_.row(i);
    const double* b = table_.row(i + 1);
    auto val = [&](int k) { return (1.0 - w) * a[k] + w * b[k]; };
    if (tau <= 0.0) return 0.0;
    if (tau >= val(nf - 1)) return 1.0;
    int lo = 0, hi = nf - 1;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (val(mid) <= tau)
            lo = mid;
        else
            hi = mid;
    }
    double t = (tau - val(lo)) / (val(hi) - val(lo));
    return fx_[lo] + t * fx_.dx;
}

double CharGeometry::rho(double x, double eta, double zeta) const {
    return phi_inv(phi(x, eta), zeta);
}

double rho(const ContinuumParams& params, double x, double eta, double zeta) {
    if (eta > zeta) throw std::invalid_argument("rho: requires eta <= zeta");
    CharGeometry geo(params.mu);
    return geo.rho(x, eta, zeta);
}

void CharTracer::deriv(CharFamily fam, double eps, const Speeds& sp, double x, double xi,
                       double& dx, double& dxi) const {
    if (fam == CharFamily::K) {
        dx = -fx_.lerp(sp.mu_x, x);
        dxi = fx_.lerp(sp.speed_xi, xi);
    } else {
        dx = eps * fx_.lerp(sp.mu_x, x);
        dxi = eps * fx_.lerp(sp.speed_xi, xi);
    }
}

void CharTracer::rk4_step(CharFamily fam, double eps, const Speeds& sp, double h, double& x,
                          double& xi) const {
    double k1x, k1s, k2x, k2s, k3x, k3s, k4x, k4s;
    deriv(fam, eps, sp, x, xi, k1x, k1s);
    deriv(fam, eps, sp, x + 0.5 * h * k1x, xi + 0.5 * h * k1s, k2x, k2s);
    deriv(fam, eps, sp, x + 0.5 * h * k2x, xi + 0.5 * h * k2s, k3x, k3s);
    deriv(fam, eps, sp, x + h * k3x, xi + h * k3s, k4x, k4s);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    xi += h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
}

CharPath CharTracer::trace(double x0, double xi0, CharFamily family, double eps,
                           const Speeds& sp,
                           const std::vector<std::function<double(double, double)>>& faces,
                           const std::vector<TerminalFace>& face_ids, int max_steps) const {
    CharPath path;
    double x = x0, xi = xi0, s = 0.0;
    path.s.push_back(0.0);
    path.x.push_back(x);
    path.xi.push_back(xi);

    auto first_hit = [&](double xx, double xxi) {
        for (size_t f = 0; f < faces.size(); ++f)
            if (faces[f](xx, xxi) <= 0.0) return static_cast<int>(f);
        return -1;
    };

    int hit0 = first_hit(x, xi);
    if (hit0 >= 0) {
        path.face = face_ids[static_cast<size_t>(hit0)];
        path.s_end = 0.0;
        return path;
    }

    for (int step = 0; step < max_steps; ++step) {
        double xp = x, xip = xi;
        rk4_step(family, eps, sp, h_, x, xi);
        int hit = first_hit(x, xi);
        if (hit < 0) {
            s += h_;
            path.s.push_back(s);
            path.x.push_back(x);
            path.xi.push_back(xi);
            continue;
        }
        // Bisect the crossing substep.
        double lo = 0.0, hi = h_;
        int face = hit;
        while (hi - lo > face_tol_) {
            double mid = 0.5 * (lo + hi);
            double xm = xp, xim = xip;
            rk4_step(family, eps, sp, mid, xm, xim);
            int h2 = first_hit(xm, xim);
            if (h2 < 0) {
                lo = mid;
            } else {
                hi = mid;
                face = h2;
            }
        }
        double xm = xp, xim = xip;
        rk4_step(family, eps, sp, hi, xm, xim);
        s += hi;
        path.s.push_back(s);
        path.x.push_back(xm);
        path.xi.push_back(xim);
        path.face = face_ids[static_cast<size_t>(face)];
        path.s_end = s;
        return path;
    }
    throw GeometryError("characteristic did not terminate within the step budget");
}

CharPath trace_characteristics(const ContinuumParams& params, double x, double xi, double eta,
                               double zeta, CharFamily family) {
    const int ne = params.grid.ne;
    CharGeometry geo(params.mu);
    const Axis& fx = geo.fine_axis();
    Axis coarse = space_axis(params.grid.nx);
    Axis ea = ensemble_axis(ne);

    // 1-D speed tables on the fine axis at the requested ensemble values.
    std::vector<double> mu_eta(static_cast<size_t>(fx.n)), sp_xi(static_cast<size_t>(fx.n));
    int ie;
    double we;
    ea.locate(eta, ie, we);
    int iz;
    double wz;
    ea.locate(zeta, iz, wz);
    for (int k = 0; k < fx.n; ++k) {
        double xx = fx[k];
        double mu_a = coarse.lerp_strided(&params.mu(0, ie), static_cast<size_t>(ne), xx);
        double mu_b = coarse.lerp_strided(&params.mu(0, ie + 1), static_cast<size_t>(ne), xx);
        mu_eta[static_cast<size_t>(k)] = (1.0 - we) * mu_a + we * mu_b;
        if (family == CharFamily::K) {
            double la = coarse.lerp_strided(&params.lambda(0, iz), static_cast<size_t>(ne), xx);
            double lb = coarse.lerp_strided(&params.lambda(0, iz + 1), static_cast<size_t>(ne), xx);
            sp_xi[static_cast<size_t>(k)] = (1.0 - wz) * la + wz * lb;
        } else {
            double ma = coarse.lerp_strided(&params.mu(0, iz), static_cast<size_t>(ne), xx);
            double mb = coarse.lerp_strided(&params.mu(0, iz + 1), static_cast<size_t>(ne), xx);
            sp_xi[static_cast<size_t>(k)] = (1.0 - wz) * ma + wz * mb;
        }
    }
    CharTracer tracer(fx, 0.4 * (1.0 / (params.grid.nx - 1)) /
                              std::max(1e-12, *std::max_element(mu_eta.begin(), mu_eta.end())));
    CharTracer::Speeds sp{mu_eta.data(), sp_xi.data()};

    std::vector<std::function<double(double, double)>> faces;
    std::vector<TerminalFace> ids;
    if (family == CharFamily::K) {
        bool seg_a = eta <= zeta && xi <= geo.rho(x, eta, zeta);
        if (seg_a) {
            faces.push_back([&geo, eta, zeta](double xx, double xxi) {
                return geo.phi(xx, eta) - geo.phi(xxi, zeta);
            });
            ids.push_back(TerminalFace::XiEqRho);
        }
        faces.push_back([](double xx, double xxi) { return xx - xxi; });
        ids.push_back(TerminalFace::Diagonal);
        return tracer.trace(x, xi, family, 0.0, sp, faces, ids);
    }
    double eps = eta > zeta ? 1.0 : -1.0;
    if (eps < 0.0) {
        faces.push_back([](double, double xxi) { return xxi; });
        ids.push_back(TerminalFace::XiZero);
        faces.push_back([](double xx, double xxi) { return xx - xxi; });
        ids.push_back(TerminalFace::Diagonal);
    } else {
        faces.push_back([](double xx, double) { return 1.0 - xx; });
        ids.push_back(TerminalFace::XEqOne);
        faces.push_back([](double xx, double xxi) { return xx - xxi; });
        ids.push_back(TerminalFace::Diagonal);
    }
    return tracer.trace(x, xi, family, eps, sp, faces, ids);
}

}  // namespace hyperctl
