#include "hyperctl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hyperctl/rk45.hpp"

namespace hyperctl {

namespace {

inline double minmod(double a, double b) {
    if (a * b <= 0.0) return 0.0;
    return std::abs(a) < std::abs(b) ? a : b;
}

// Upwind x-derivative for a rightward-transported row (inflow at x=0).
// values has nx entries including the boundary column.
inline double dudx_right(const double* u, int k, double dx, SimConfig::Scheme scheme, int /*nx*/) {
    double d1 = (u[k] - u[k - 1]) / dx;
    if (scheme == SimConfig::Scheme::FirstOrderUpwind || k < 2) return d1;
    // Slope-limited second-order upwind.
    double d1m = (u[k - 1] - u[k - 2]) / dx;
    return d1 + 0.5 * minmod(d1 - d1m, d1m);
}

// Upwind x-derivative for a leftward-transported row (inflow at x=1).
inline double dvdx_left(const double* v, int k, double dx, SimConfig::Scheme scheme, int nx) {
    double d1 = (v[k + 1] - v[k]) / dx;
    if (scheme == SimConfig::Scheme::FirstOrderUpwind || k > nx - 3) return d1;
    double d1p = (v[k + 2] - v[k + 1]) / dx;
    return d1 + 0.5 * minmod(d1 - d1p, d1p);
}

}  // namespace

NmSampled sample_nm(const NmParams& p, int nx) {
    NmSampled s;
    s.n = p.n;
    s.m = p.m;
    s.nx = nx;
    Axis ax = space_axis(nx);
    s.lambda = Field2(p.n, nx);
    s.mu = Field2(p.m, nx);
    for (int i = 0; i < p.n; ++i)
        for (int k = 0; k < nx; ++k) s.lambda(i, k) = p.lambda[static_cast<size_t>(i)](ax[k]);
    for (int j = 0; j < p.m; ++j)
        for (int k = 0; k < nx; ++k) s.mu(j, k) = p.mu[static_cast<size_t>(j)](ax[k]);
    s.Sigma = Field3(nx, p.n, p.n);
    s.W = Field3(nx, p.n, p.m);
    s.Theta = Field3(nx, p.m, p.n);
    s.Psi = Field3(nx, p.m, p.m);
    for (int k = 0; k < nx; ++k) {
        double x = ax[k];
        for (int i = 0; i < p.n; ++i) {
            for (int l = 0; l < p.n; ++l) s.Sigma(k, i, l) = p.Sigma[static_cast<size_t>(i)][static_cast<size_t>(l)](x);
            for (int j = 0; j < p.m; ++j) s.W(k, i, j) = p.W[static_cast<size_t>(i)][static_cast<size_t>(j)](x);
        }
        for (int j = 0; j < p.m; ++j) {
            for (int l = 0; l < p.n; ++l) s.Theta(k, j, l) = p.Theta[static_cast<size_t>(j)][static_cast<size_t>(l)](x);
            for (int q = 0; q < p.m; ++q) s.Psi(k, j, q) = p.Psi[static_cast<size_t>(j)][static_cast<size_t>(q)](x);
        }
    }
    s.Q = p.Q;
    s.R = p.R;
    return s;
}

NmRhsCore::NmRhsCore(NmSampled ps, SimConfig::Scheme scheme) : ps_(std::move(ps)), scheme_(scheme) {}

void NmRhsCore::pack(const Field2& u, const Field2& v, double* y) const {
    const int n = ps_.n, m = ps_.m, nx = ps_.nx;
    double* p = y;
    for (int i = 0; i < n; ++i)
        for (int k = 1; k < nx; ++k) *p++ = u(i, k);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < nx - 1; ++k) *p++ = v(j, k);
}

void NmRhsCore::unpack(const double* y, Field2& u, Field2& v) const {
    const int n = ps_.n, m = ps_.m, nx = ps_.nx;
    if (u.n0() != n || u.n1() != nx) u = Field2(n, nx);
    if (v.n0() != m || v.n1() != nx) v = Field2(m, nx);
    const double* p = y;
    for (int i = 0; i < n; ++i)
        for (int k = 1; k < nx; ++k) u(i, k) = *p++;
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < nx - 1; ++k) v(j, k) = *p++;
    // u(t,0) = (1/m) Q v(t,0)
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += ps_.Q(i, j) * v(j, 0);
        u(i, 0) = s / m;
    }
    // Provisional actuated column for controllers that integrate up to
    // x=1: extrapolate from the interior; finalize_boundary overwrites.
    for (int j = 0; j < m; ++j)
        v(j, nx - 1) = nx >= 3 ? 2.0 * v(j, nx - 2) - v(j, nx - 3) : v(j, nx - 2);
}

void NmRhsCore::finalize_boundary(const Field2& u, Field2& v,
                                  const std::vector<double>& U) const {
    const int n = ps_.n, m = ps_.m, nx = ps_.nx;
    // v(t,1) = (1/n) R u(t,1) + U.
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += ps_.R(j, i) * u(i, nx - 1);
        v(j, nx - 1) = s / n + (U.empty() ? 0.0 : U[static_cast<size_t>(j)]);
    }
}

void NmRhsCore::rhs(const Field2& u, const Field2& v, double* dy) const {
    const int n = ps_.n, m = ps_.m, nx = ps_.nx;
    const double dx = 1.0 / (nx - 1);
    double* p = dy;
    for (int i = 0; i < n; ++i) {
        const double* ui = u.row(i);
        for (int k = 1; k < nx; ++k) {
            double cu = 0.0;
            const double* sig = &ps_.Sigma(k, i, 0);
            for (int l = 0; l < n; ++l) cu += sig[l] * u(l, k);
            cu /= n;
            double cw = 0.0;
            const double* wr = &ps_.W(k, i, 0);
            for (int j = 0; j < m; ++j) cw += wr[j] * v(j, k);
            cw /= m;
            *p++ = -ps_.lambda(i, k) * dudx_right(ui, k, dx, scheme_, nx) + cu + cw;
        }
    }
    for (int j = 0; j < m; ++j) {
        const double* vj = v.row(j);
        for (int k = 0; k < nx - 1; ++k) {
            double ct = 0.0;
            const double* th = &ps_.Theta(k, j, 0);
            for (int l = 0; l < n; ++l) ct += th[l] * u(l, k);
            ct /= n;
            double cp = 0.0;
            const double* ps = &ps_.Psi(k, j, 0);
            for (int q = 0; q < m; ++q) cp += ps[q] * v(q, k);
            cp /= m;
            *p++ = ps_.mu(j, k) * dvdx_left(vj, k, dx, scheme_, nx) + ct + cp;
        }
    }
}

double NmRhsCore::max_speed() const {
    double s = 0.0;
    for (size_t k = 0; k < ps_.lambda.size(); ++k) s = std::max(s, std::abs(ps_.lambda.data()[k]));
    for (size_t k = 0; k < ps_.mu.size(); ++k) s = std::max(s, std::abs(ps_.mu.data()[k]));
    return s;
}

ContinuumRhsCore::ContinuumRhsCore(const ContinuumParams* p, SimConfig::Scheme scheme)
    : p_(p), scheme_(scheme) {}

void ContinuumRhsCore::pack(const Field2& u, const Field2& v, double* y) const {
    const int nE = ne(), nX = nx();
    double* p = y;
    for (int i = 0; i < nE; ++i)
        for (int k = 1; k < nX; ++k) *p++ = u(i, k);
    for (int j = 0; j < nE; ++j)
        for (int k = 0; k < nX - 1; ++k) *p++ = v(j, k);
}

void ContinuumRhsCore::unpack(const double* y, Field2& u, Field2& v) const {
    const int nE = ne(), nX = nx();
    if (u.n0() != nE || u.n1() != nX) u = Field2(nE, nX);
    if (v.n0() != nE || v.n1() != nX) v = Field2(nE, nX);
    const double* p = y;
    for (int i = 0; i < nE; ++i)
        for (int k = 1; k < nX; ++k) u(i, k) = *p++;
    for (int j = 0; j < nE; ++j)
        for (int k = 0; k < nX - 1; ++k) v(j, k) = *p++;
    // u(t,0,y) = int Q(y,zeta) v(t,0,zeta) dzeta (midpoint).
    for (int i = 0; i < nE; ++i) {
        double s = 0.0;
        for (int j = 0; j < nE; ++j) s += p_->Q(i, j) * v(j, 0);
        u(i, 0) = s / nE;
    }
    for (int j = 0; j < nE; ++j)
        v(j, nX - 1) = nX >= 3 ? 2.0 * v(j, nX - 2) - v(j, nX - 3) : v(j, nX - 2);
}

void ContinuumRhsCore::finalize_boundary(const Field2& u, Field2& v,
                                         const std::vector<double>& U) const {
    const int nE = ne(), nX = nx();
    for (int j = 0; j < nE; ++j) {
        double s = 0.0;
        for (int i = 0; i < nE; ++i) s += p_->R(j, i) * u(i, nX - 1);
        v(j, nX - 1) = s / nE + (U.empty() ? 0.0 : U[static_cast<size_t>(j)]);
    }
}

void ContinuumRhsCore::rhs(const Field2& u, const Field2& v, double* dy) const {
    const int nE = ne(), nX = nx();
    const double dx = 1.0 / (nX - 1);
    // Transposed copies make the zeta-sums contiguous.
    scratch_.resize(2 * static_cast<size_t>(nE) * nX);
    double* uT = scratch_.data();
    double* vT = scratch_.data() + static_cast<size_t>(nE) * nX;
    for (int i = 0; i < nE; ++i)
        for (int k = 0; k < nX; ++k) {
            uT[static_cast<size_t>(k) * nE + i] = u(i, k);
            vT[static_cast<size_t>(k) * nE + i] = v(i, k);
        }
    double* p = dy;
    for (int i = 0; i < nE; ++i) {
        const double* ui = u.row(i);
        for (int k = 1; k < nX; ++k) {
            const double* su = &p_->sigma(k, i, 0);
            const double* sw = &p_->W(k, i, 0);
            const double* uk = uT + static_cast<size_t>(k) * nE;
            const double* vk = vT + static_cast<size_t>(k) * nE;
            double c = 0.0;
            for (int j = 0; j < nE; ++j) c += su[j] * uk[j] + sw[j] * vk[j];
            c /= nE;
            *p++ = -p_->lambda(k, i) * dudx_right(ui, k, dx, scheme_, nX) + c;
        }
    }
    for (int i = 0; i < nE; ++i) {
        const double* vi = v.row(i);
        for (int k = 0; k < nX - 1; ++k) {
            const double* st = &p_->theta(k, i, 0);
            const double* sp = &p_->psi(k, i, 0);
            const double* uk = uT + static_cast<size_t>(k) * nE;
            const double* vk = vT + static_cast<size_t>(k) * nE;
            double c = 0.0;
            for (int j = 0; j < nE; ++j) c += st[j] * uk[j] + sp[j] * vk[j];
            c /= nE;
            *p++ = p_->mu(k, i) * dvdx_left(vi, k, dx, scheme_, nX) + c;
        }
    }
}

double ContinuumRhsCore::max_speed() const {
    double s = 0.0;
    for (size_t k = 0; k < p_->lambda.size(); ++k) s = std::max(s, std::abs(p_->lambda.data()[k]));
    for (size_t k = 0; k < p_->mu.size(); ++k) s = std::max(s, std::abs(p_->mu.data()[k]));
    return s;
}

namespace {

// Shared integration loop for both system classes.
template <class Core>
Trajectory run_simulation(Core& core, StateKind kind, int u_rows, int v_rows, const Field2& u0,
                          const Field2& v0, const Feedback* controller, const SimConfig& cfg) {
    const int nx = cfg.grid.nx;
    if (u0.n0() != u_rows || u0.n1() != nx || v0.n0() != v_rows || v0.n1() != nx)
        throw std::invalid_argument("simulate: initial data shape mismatch");

    Trajectory traj;
    traj.kind = kind;

    std::vector<double> y(static_cast<size_t>(core.state_size()));
    core.pack(u0, v0, y.data());

    Field2 u, v;
    std::vector<double> U;
    auto eval_control = [&](double t, Field2& uu, Field2& vv) {
        if (controller) {
            U.resize(static_cast<size_t>(controller->dim()));
            controller->eval(t, uu, vv, U);
        } else {
            U.clear();
        }
    };

    auto full_fields = [&](double t, const std::vector<double>& yy) {
        core.unpack(yy.data(), u, v);
        eval_control(t, u, v);
        core.finalize_boundary(u, v, U);
    };

    auto rhs = [&](double t, const double* yy, double* dy) {
        core.unpack(yy, u, v);
        eval_control(t, u, v);
        core.finalize_boundary(u, v, U);
        core.rhs(u, v, dy);
    };

    Dopri5 stepper(core.state_size(), rhs, cfg.rtol, cfg.atol);
    const double dx = 1.0 / (nx - 1);
    stepper.initial_dt_hint = 0.25 * dx / std::max(1e-12, core.max_speed());

    full_fields(0.0, y);
    StateField s0{kind, u, v, 0.0};
    double norm0 = state_norm(s0);
    traj.times.push_back(0.0);
    traj.states.push_back(s0);
    traj.controls.push_back(U);
    traj.norms.push_back(norm0);
    traj.control_norms.push_back(control_norm(U));

    const double blow_limit = cfg.blowup_factor * std::max(norm0, 1e-12);
    double t = 0.0;
    int nout = static_cast<int>(std::round(cfg.grid.t_final / cfg.grid.output_dt));
    bool dead = false;
    for (int k = 1; k <= nout && !dead; ++k) {
        double t_target = std::min(cfg.grid.t_final, k * cfg.grid.output_dt);
        auto monitor = [&](double tt, const std::vector<double>& yy) {
            double acc = 0.0;
            for (double w : yy) {
                if (!std::isfinite(w)) {
                    traj.blew_up = true;
                    traj.blowup_time = tt;
                    return false;
                }
                acc = std::max(acc, std::abs(w));
            }
            if (acc > blow_limit) {
                traj.blew_up = true;
                traj.blowup_time = tt;
                return false;
            }
            return true;
        };
        try {
            if (!stepper.integrate(t, y, t_target, monitor)) {
                dead = true;
                break;
            }
        } catch (const IntegratorError& e) {
            traj.blew_up = true;
            traj.blowup_time = e.t;
            dead = true;
            break;
        }
        full_fields(t, y);
        StateField s{kind, u, v, t};
        traj.times.push_back(t);
        traj.states.push_back(s);
        traj.controls.push_back(U);
        traj.norms.push_back(state_norm(s));
        traj.control_norms.push_back(control_norm(U));
        if (traj.norms.back() > blow_limit) {
            traj.blew_up = true;
            traj.blowup_time = t;
            break;
        }
    }
    traj.steps = stepper.steps_accepted;
    if (stepper.steps_accepted > 0)
        traj.cfl_estimate = (t / stepper.steps_accepted) * core.max_speed() / dx;
    return traj;
}

}  // namespace

Trajectory simulate_nm(const NmParams& p, const Field2& u0, const Field2& v0,
                       const Feedback* controller, const SimConfig& cfg) {
    ValidationReport rep = validate_nm(p, 17);
    if (rep.structural_error) throw std::invalid_argument("simulate_nm: " + rep.to_string());
    NmRhsCore core(sample_nm(p, cfg.grid.nx), cfg.scheme);
    return run_simulation(core, StateKind::Nm, p.n, p.m, u0, v0, controller, cfg);
}

Trajectory simulate_continuum(const ContinuumParams& p, const Field2& u0, const Field2& v0,
                              const Feedback* controller, const SimConfig& cfg) {
    if (p.grid.nx != cfg.grid.nx || p.grid.ne != cfg.grid.ne)
        throw std::invalid_argument("simulate_continuum: params grid != sim grid");
    ContinuumRhsCore core(&p, cfg.scheme);
    return run_simulation(core, StateKind::Continuum, p.grid.ne, p.grid.ne, u0, v0, controller,
                          cfg);
}

GapCurve solution_gap(const Trajectory& traj_nm, const Trajectory& traj_c, int ne) {
    if (traj_nm.times.size() != traj_c.times.size())
        throw std::invalid_argument("solution_gap: trajectories have different time grids");
    GapCurve g;
    for (size_t k = 0; k < traj_nm.times.size(); ++k) {
        StateField lifted = lift_state(traj_nm.states[k], ne);
        double d = state_distance(lifted, traj_c.states[k]);
        g.times.push_back(traj_nm.times[k]);
        g.gap.push_back(d);
        g.max_gap = std::max(g.max_gap, d);
    }
    return g;
}

}  // namespace hyperctl
