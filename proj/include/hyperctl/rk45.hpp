#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace hyperctl {

struct IntegratorError : std::runtime_error {
    double t;
    IntegratorError(const std::string& what, double t_) : std::runtime_error(what), t(t_) {}
};

// Dormand-Prince 5(4) embedded pair with standard error-based step
// control. Steps are clipped to land exactly on requested stop times,
// which keeps output sampling deterministic.
class Dopri5 {
public:
    using Rhs = std::function<void(double, const double*, double*)>;

    Dopri5(int dim, Rhs rhs, double rtol, double atol)
        : dim_(dim), rhs_(std::move(rhs)), rtol_(rtol), atol_(atol) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &yerr_, &y5_})
            v->assign(static_cast<size_t>(dim_), 0.0);
    }

    // Advance y from t to t_end. Calls on_step(t, y) after every accepted
    // step (including the arrival at t_end). Returns false if on_step
    // requested termination.
    bool integrate(double& t, std::vector<double>& y, double t_end,
                   const std::function<bool(double, const std::vector<double>&)>& on_step = {}) {
        if (t_end <= t) return true;
        if (dt_ <= 0.0) dt_ = initial_dt_hint > 0.0 ? initial_dt_hint : (t_end - t) * 1e-3;
        rhs_(t, y.data(), k1_.data());
        bool first = true;
        while (t < t_end - 1e-14) {
            double dt = std::min(dt_, t_end - t);
            if (dt < 1e-14 * std::max(1.0, std::abs(t)))
                throw IntegratorError("step size underflow", t);
            if (!first) {
                // FSAL: k1 holds the derivative at the current point.
            }
            step(t, y, dt);
            double err = error_norm(y);
            if (err <= 1.0) {
                t += dt;
                y.swap(y5_);
                k1_.swap(k7_);
                steps_accepted++;
                double fac = err > 1e-30 ? 0.9 * std::pow(err, -0.2) : 5.0;
                dt_ = dt * std::clamp(fac, 0.2, 5.0);
                if (on_step && !on_step(t, y)) return false;
            } else {
                steps_rejected++;
                dt_ = dt * std::max(0.2, 0.9 * std::pow(err, -0.2));
            }
            first = false;
        }
        t = t_end;
        return true;
    }

    double initial_dt_hint = 0.0;
    long steps_accepted = 0;
    long steps_rejected = 0;

private:
    int dim_;
    Rhs rhs_;
    double rtol_, atol_;
    double dt_ = 0.0;
    std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, yerr_, y5_;

    void axpy(const std::vector<double>& y, double dt, std::initializer_list<double> cs,
              std::initializer_list<const std::vector<double>*> ks) {
        size_t n = y.size();
        for (size_t i = 0; i < n; ++i) ytmp_[i] = y[i];
        auto c = cs.begin();
        for (auto* k : ks) {
            double f = dt * (*c++);
            const double* kd = k->data();
            for (size_t i = 0; i < n; ++i) ytmp_[i] += f * kd[i];
        }
    }

    void step(double t, const std::vector<double>& y, double dt) {
        // Dormand-Prince coefficients.
        axpy(y, dt, {1.0 / 5}, {&k1_});
        rhs_(t + dt / 5, ytmp_.data(), k2_.data());
        axpy(y, dt, {3.0 / 40, 9.0 / 40}, {&k1_, &k2_});
        rhs_(t + 3 * dt / 10, ytmp_.data(), k3_.data());
        axpy(y, dt, {44.0 / 45, -56.0 / 15, 32.0 / 9}, {&k1_, &k2_, &k3_});
        rhs_(t + 4 * dt / 5, ytmp_.data(), k4_.data());
        axpy(y, dt, {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
             {&k1_, &k2_, &k3_, &k4_});
        rhs_(t + 8 * dt / 9, ytmp_.data(), k5_.data());
        axpy(y, dt, {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
             {&k1_, &k2_, &k3_, &k4_, &k5_});
        rhs_(t + dt, ytmp_.data(), k6_.data());
        axpy(y, dt, {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
             {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_});
        y5_ = ytmp_;
        rhs_(t + dt, y5_.data(), k7_.data());
        // Embedded 4th-order difference.
        static const double e[7] = {71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
                                    -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
        size_t n = y.size();
        for (size_t i = 0; i < n; ++i)
            yerr_[i] = dt * (e[0] * k1_[i] + e[2] * k3_[i] + e[3] * k4_[i] + e[4] * k5_[i] +
                             e[5] * k6_[i] + e[6] * k7_[i]);
    }

    double error_norm(const std::vector<double>& y_old) {
        double acc = 0.0;
        size_t n = y_old.size();
        for (size_t i = 0; i < n; ++i) {
            double sc = atol_ + rtol_ * std::max(std::abs(y_old[i]), std::abs(y5_[i]));
            double r = yerr_[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / static_cast<double>(n));
    }
};

}  // namespace hyperctl
