#include "hyperctl/state.hpp"

#include <cmath>
#include <stdexcept>

namespace hyperctl {

namespace {

double weighted_sq(const Field2& f) {
    const int nc = f.n0(), nx = f.n1();
    if (nx < 2) return 0.0;
    const double dx = 1.0 / (nx - 1);
    double acc = 0.0;
    for (int i = 0; i < nc; ++i) {
        const double* row = f.row(i);
        double s = 0.5 * (row[0] * row[0] + row[nx - 1] * row[nx - 1]);
        for (int k = 1; k < nx - 1; ++k) s += row[k] * row[k];
        acc += s * dx;
    }
    return acc / nc;
}

}  // namespace

double state_norm(const StateField& s) {
    return std::sqrt(weighted_sq(s.u) + weighted_sq(s.v));
}

double control_norm(const std::vector<double>& U) {
    double acc = 0.0;
    for (double u : U) acc += u * u;
    return U.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(U.size()));
}

StateField lift_state(const StateField& micro, int ne) {
    const int nx = micro.nx();
    StateField out;
    out.kind = StateKind::Continuum;
    out.t = micro.t;
    out.u = Field2(ne, nx);
    out.v = Field2(ne, nx);
    Axis ea = ensemble_axis(ne);
    auto fill = [&](const Field2& src, Field2& dst) {
        int k = src.n0();
        for (int i = 0; i < ne; ++i) {
            int cell = std::min(k - 1, static_cast<int>(ea[i] * k));
            for (int j = 0; j < nx; ++j) dst(i, j) = src(cell, j);
        }
    };
    fill(micro.u, out.u);
    fill(micro.v, out.v);
    return out;
}

double state_distance(const StateField& a, const StateField& b) {
    if (a.u.n0() != b.u.n0() || a.u.n1() != b.u.n1() || a.v.n0() != b.v.n0())
        throw std::invalid_argument("state_distance: grid mismatch");
    const int nx = a.nx();
    const double dx = 1.0 / (nx - 1);
    auto part = [&](const Field2& fa, const Field2& fb) {
        const int nc = fa.n0();
        double acc = 0.0;
        for (int i = 0; i < nc; ++i) {
            const double *ra = fa.row(i), *rb = fb.row(i);
            double d0 = ra[0] - rb[0], dN = ra[nx - 1] - rb[nx - 1];
            double s = 0.5 * (d0 * d0 + dN * dN);
            for (int k = 1; k < nx - 1; ++k) {
                double d = ra[k] - rb[k];
                s += d * d;
            }
            acc += s * dx;
        }
        return acc / nc;
    };
    return std::sqrt(part(a.u, b.u) + part(a.v, b.v));
}

}  // namespace hyperctl
