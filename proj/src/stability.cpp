#include "hyperctl/stability.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hyperctl {

LyapunovConfig lyapunov_params(const TargetCoeffs& tc, const ContinuumParams& p) {
    const int nx = p.grid.nx, ne = p.grid.ne;
    LyapunovConfig cfg;
    cfg.m_lambda = cfg.m_mu = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < p.lambda.size(); ++k)
        cfg.m_lambda = std::min(cfg.m_lambda, p.lambda.data()[k]);
    for (size_t k = 0; k < p.mu.size(); ++k) cfg.m_mu = std::min(cfg.m_mu, p.mu.data()[k]);

    // Coupling bounds: second slot integrated, L2 in the first, sup over
    // the remaining coordinates.
    auto field3_norm = [&](const Field3& F) {
        double worst = 0.0;
        for (int k = 0; k < F.n0(); ++k) {
            double s = 0.0;
            for (int i = 0; i < ne; ++i) {
                double inner = 0.0;
                for (int j = 0; j < ne; ++j) inner += F(k, i, j);
                inner /= ne;
                s += inner * inner;
            }
            worst = std::max(worst, s / ne);
        }
        return std::sqrt(worst);
    };
    cfg.M_sigma = field3_norm(p.sigma);
    cfg.M_W = field3_norm(p.W);
    cfg.M_G = field3_norm(tc.G);
    auto field4_norm = [&](const Field4& F) {
        double worst = 0.0;
        for (int xk = 0; xk < tc.nx; ++xk)
            for (int xik = 0; xik <= xk; ++xik) {
                const double* pl = F.plane(xk, xik);
                double s = 0.0;
                for (int i = 0; i < ne; ++i) {
                    double inner = 0.0;
                    for (int j = 0; j < ne; ++j) inner += pl[i * ne + j];
                    inner /= ne;
                    s += inner * inner;
                }
                worst = std::max(worst, s / ne);
            }
        return std::sqrt(worst);
    };
    cfg.M_Cp = field4_norm(tc.C_plus);
    cfg.M_Cm = field4_norm(tc.C_minus);
    double s = 0.0;
    for (int i = 0; i < ne; ++i) {
        double inner = 0.0;
        for (int j = 0; j < ne; ++j) inner += p.Q(i, j);
        inner /= ne;
        s += inner * inner;
    }
    cfg.M_Q = std::sqrt(s / ne);
    (void)nx;

    double lhs1 = (2.0 * cfg.m_lambda * (cfg.M_sigma + cfg.M_Cp) + 2.0) /
                  (cfg.m_lambda * cfg.m_lambda);
    double lhs2 = (cfg.M_W * cfg.M_W + cfg.M_Cm * cfg.M_Cm) / cfg.m_mu + cfg.M_G;
    cfg.delta = 1.01 * std::max(lhs1, lhs2);
    cfg.c = 1.01 * std::max(cfg.M_Q * cfg.M_Q, 1.0);
    Axis ea = ensemble_axis(ne);
    cfg.D.resize(ne);
    cfg.rate = cfg.M_G * std::exp(cfg.delta) / (cfg.delta * cfg.m_mu);
    double rate = cfg.rate;
    for (int j = 0; j < ne; ++j) cfg.D[j] = cfg.c * std::exp(rate * (1.0 - ea[j]));

    // Verify the weight inequality on the grid.
    cfg.d_inequality_ok = true;
    for (int j = 0; j < ne; ++j) {
        double tail = 0.0;
        for (int k = j + 1; k < ne; ++k) tail += cfg.D[k] / ne;
        if (!(cfg.D[j] - rate * tail > cfg.M_Q * cfg.M_Q)) cfg.d_inequality_ok = false;
        if (!(cfg.D[j] >= 1.0)) cfg.d_inequality_ok = false;
    }
    return cfg;
}

double LyapunovConfig::D_at(double zeta) const { return c * std::exp(rate * (1.0 - zeta)); }

double lyapunov_value(const LyapunovConfig& cfg, const TargetState& ts,
                      const ContinuumParams& p) {
    const int ne = ts.alpha.n0(), nxk = ts.alpha.n1();
    if (p.grid.nx != nxk || p.grid.ne != ne)
        throw std::invalid_argument("lyapunov_value: params grid must match the target grid");
    Axis xa = space_axis(nxk);
    Axis ea = ensemble_axis(ne);
    double V = 0.0;
    for (int k = 0; k < nxk; ++k) {
        double wx = (k == 0 || k == nxk - 1) ? 0.5 * xa.dx : xa.dx;
        double ea_term = 0.0;
        double x = xa[k];
        for (int j = 0; j < ne; ++j) {
            double a = ts.alpha(j, k), b = ts.beta(j, k);
            ea_term += std::exp(-cfg.delta * x) * a * a / p.lambda(k, j) +
                       std::exp(cfg.delta * x) * cfg.D_at(ea[j]) * b * b / p.mu(k, j);
        }
        V += wx * ea_term / ne;
    }
    return V;
}

DecayFit decay_fit(const Trajectory& traj, double t0, double t1) {
    DecayFit fit;
    fit.t0 = t0;
    fit.t1 = t1;
    double n0 = traj.initial_norm();
    double peak = 0.0;
    for (double v : traj.norms) peak = std::max(peak, v);
    fit.growth = n0 > 0.0 ? peak / n0 : 0.0;

    std::vector<double> ts, ln;
    bool all_zero = true;
    for (size_t k = 0; k < traj.times.size(); ++k) {
        if (traj.times[k] < t0 - 1e-12 || traj.times[k] > t1 + 1e-12) continue;
        double v = traj.norms[k];
        if (v > 0.0) all_zero = false;
        ts.push_back(traj.times[k]);
        ln.push_back(v > 0.0 ? std::log(v) : -745.0);
    }
    if (all_zero) {
        fit.omega = std::numeric_limits<double>::infinity();
        fit.cls = StabilityClass::ExpStable;
        return fit;
    }
    if (ts.size() < 5) throw std::invalid_argument("decay_fit: fewer than 5 samples in window");
    double n = static_cast<double>(ts.size());
    double st = 0, sl = 0, stt = 0, stl = 0;
    for (size_t k = 0; k < ts.size(); ++k) {
        st += ts[k];
        sl += ln[k];
        stt += ts[k] * ts[k];
        stl += ts[k] * ln[k];
    }
    double slope = (n * stl - st * sl) / (n * stt - st * st);
    fit.omega = -slope;
    fit.amplitude = std::exp((sl - slope * st) / n);

    const double omega_tol = 1e-3;
    if (traj.blew_up || (fit.omega < 0.0 && fit.growth > 10.0))
        fit.cls = StabilityClass::Unstable;
    else if (fit.omega > omega_tol)
        fit.cls = StabilityClass::ExpStable;
    else
        fit.cls = StabilityClass::Bounded;
    return fit;
}

const char* to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::ExpStable: return "ExpStable";
        case StabilityClass::Bounded: return "Bounded";
        default: return "Unstable";
    }
}

}  // namespace hyperctl
