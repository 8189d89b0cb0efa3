#include "hyperctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hyperctl {

ScalarFn::ScalarFn(double constant) {
    value_ = [constant](double) { return constant; };
    deriv_ = [](double) { return 0.0; };
}

ScalarFn::ScalarFn(Expr value, std::optional<Expr> deriv, ExprEnv bound) {
    value_ = [value, bound](double x) {
        ExprEnv env = bound;
        env.x = x;
        return value.eval(env);
    };
    if (deriv && !deriv->empty()) {
        Expr d = *deriv;
        deriv_ = [d, bound](double x) {
            ExprEnv env = bound;
            env.x = x;
            return d.eval(env);
        };
    } else {
        // Central differences on the expression itself.
        auto f = value_;
        deriv_ = [f](double x) {
            const double h = 1e-6;
            double a = std::max(0.0, x - h), b = std::min(1.0, x + h);
            return (f(b) - f(a)) / (b - a);
        };
    }
}

ScalarFn ScalarFn::from_samples(std::vector<double> values, const Axis& ax) {
    auto data = std::make_shared<std::vector<double>>(std::move(values));
    std::vector<double> d(data->size());
    int n = static_cast<int>(data->size());
    for (int k = 0; k < n; ++k) {
        int a = std::max(0, k - 1), b = std::min(n - 1, k + 1);
        d[static_cast<size_t>(k)] = ((*data)[static_cast<size_t>(b)] - (*data)[static_cast<size_t>(a)]) / ((b - a) * ax.dx);
    }
    auto ddata = std::make_shared<std::vector<double>>(std::move(d));
    ScalarFn fn(0.0);
    fn.value_ = [data, ax](double x) { return ax.lerp(data->data(), x); };
    fn.deriv_ = [ddata, ax](double x) { return ax.lerp(ddata->data(), x); };
    return fn;
}

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    if (structural_error) os << "structural error\n";
    for (const auto& v : violations)
        os << v.code << " at " << v.location << " (value " << fmt_g(v.value) << ")\n";
    if (eq20_value != 0.0)
        os << "coupling ratio quadrature = " << fmt_g(eq20_value)
           << (eq20_divergent ? " [divergent]" : "") << "\n";
    if (ok()) os << "ok\n";
    return os.str();
}

NmParams make_nm_params(int n, int m, const NmExprSpec& spec) {
    NmParams p;
    p.n = n;
    p.m = m;
    auto bind = [&](const std::string& text, const std::string& dtext, int i, int j) {
        ExprEnv env;
        env.i = i;
        env.j = j;
        env.n = n;
        env.m = m;
        std::optional<Expr> d;
        if (!dtext.empty()) d = Expr::parse(dtext);
        return ScalarFn(Expr::parse(text), d, env);
    };
    for (int i = 1; i <= n; ++i) p.lambda.push_back(bind(spec.lambda, spec.lambda_dx, i, 0));
    for (int j = 1; j <= m; ++j) p.mu.push_back(bind(spec.mu, spec.mu_dx, j, 0));
    p.Sigma.resize(n);
    p.W.resize(n);
    for (int i = 1; i <= n; ++i) {
        for (int l = 1; l <= n; ++l) p.Sigma[i - 1].push_back(bind(spec.sigma, "", i, l));
        for (int j = 1; j <= m; ++j) p.W[i - 1].push_back(bind(spec.w, "", i, j));
    }
    p.Theta.resize(m);
    p.Psi.resize(m);
    for (int j = 1; j <= m; ++j) {
        for (int l = 1; l <= n; ++l) p.Theta[j - 1].push_back(bind(spec.theta, "", j, l));
        for (int q = 1; q <= m; ++q) p.Psi[j - 1].push_back(bind(spec.psi, "", j, q));
    }
    Expr qe = Expr::parse(spec.q.empty() ? "0" : spec.q);
    Expr re = Expr::parse(spec.r.empty() ? "0" : spec.r);
    p.Q = Field2(n, m);
    p.R = Field2(m, n);
    ExprEnv env;
    env.n = n;
    env.m = m;
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= m; ++j) {
            env.i = i;
            env.j = j;
            p.Q(i - 1, j - 1) = qe.eval(env);
        }
    for (int j = 1; j <= m; ++j)
        for (int i = 1; i <= n; ++i) {
            env.i = j;
            env.j = i;
            p.R(j - 1, i - 1) = re.eval(env);
        }
    return p;
}

ValidationReport validate_nm(const NmParams& p, int nx) {
    ValidationReport rep;
    auto structural = [&](const std::string& what) {
        rep.structural_error = true;
        rep.violations.push_back({"shape", what, 0.0});
    };
    if (p.n <= 0 || p.m <= 0) structural("n and m must be positive");
    if (static_cast<int>(p.lambda.size()) != p.n) structural("lambda size != n");
    if (static_cast<int>(p.mu.size()) != p.m) structural("mu size != m");
    if (static_cast<int>(p.Sigma.size()) != p.n) structural("Sigma rows != n");
    if (static_cast<int>(p.Theta.size()) != p.m) structural("Theta rows != m");
    if (static_cast<int>(p.Psi.size()) != p.m) structural("Psi rows != m");
    if (p.Q.n0() != p.n || p.Q.n1() != p.m) structural("Q shape != n x m");
    if (p.R.n0() != p.m || p.R.n1() != p.n) structural("R shape != m x n");
    if (rep.structural_error) return rep;

    Axis ax = space_axis(nx);
    for (int k = 0; k < nx; ++k) {
        double x = ax[k];
        for (int i = 0; i < p.n; ++i) {
            double v = p.lambda[static_cast<size_t>(i)](x);
            if (!(v > 0.0)) {
                rep.violations.push_back(
                    {"lambda_positive", "i=" + std::to_string(i + 1) + " x=" + fmt_g(x), v});
            }
        }
        double prev = std::numeric_limits<double>::infinity();
        for (int j = 0; j < p.m; ++j) {
            double v = p.mu[static_cast<size_t>(j)](x);
            if (!(v > 0.0)) {
                rep.violations.push_back(
                    {"mu_positive", "j=" + std::to_string(j + 1) + " x=" + fmt_g(x), v});
            }
            if (!(v < prev)) {
                rep.violations.push_back(
                    {"mu_ordering", "j=" + std::to_string(j) + " x=" + fmt_g(x), v});
            }
            prev = v;
        }
    }
    for (int j = 0; j < p.m; ++j) {
        for (int k = 0; k < nx; ++k) {
            double v = p.Psi[static_cast<size_t>(j)][static_cast<size_t>(j)](ax[k]);
            if (std::abs(v) > 1e-12) {
                rep.violations.push_back(
                    {"psi_diagonal", "j=" + std::to_string(j + 1) + " x=" + fmt_g(ax[k]), v});
                break;
            }
        }
    }
    // Deduplicate mu_ordering spam: one entry per (j) is enough for reporting,
    // but keep per-x entries bounded.
    if (rep.violations.size() > 200) rep.violations.resize(200);
    return rep;
}

ValidationReport validate_continuum(const ContinuumParams& p) {
    ValidationReport rep;
    const int nx = p.lambda.n0(), ne = p.lambda.n1();
    auto finite = [](const double* d, size_t n) {
        for (size_t k = 0; k < n; ++k)
            if (!std::isfinite(d[k])) return false;
        return true;
    };
    if (!finite(p.lambda.data(), p.lambda.size()) || !finite(p.mu.data(), p.mu.size()) ||
        !finite(p.sigma.data(), p.sigma.size()) || !finite(p.W.data(), p.W.size()) ||
        !finite(p.theta.data(), p.theta.size()) || !finite(p.psi.data(), p.psi.size()) ||
        !finite(p.Q.data(), p.Q.size()) || !finite(p.R.data(), p.R.size())) {
        rep.structural_error = true;
        rep.violations.push_back({"non_finite", "field data", 0.0});
        return rep;
    }
    Axis xa = space_axis(nx);
    for (int k = 0; k < nx; ++k) {
        for (int i = 0; i < ne; ++i) {
            if (!(p.lambda(k, i) > 0.0))
                rep.violations.push_back(
                    {"lambda_positive", "y-node " + std::to_string(i) + " x=" + fmt_g(xa[k]),
                     p.lambda(k, i)});
            if (!(p.mu(k, i) > 0.0))
                rep.violations.push_back(
                    {"mu_positive", "eta-node " + std::to_string(i) + " x=" + fmt_g(xa[k]),
                     p.mu(k, i)});
        }
        for (int i = 0; i < ne && rep.violations.size() < 200; ++i)
            for (int j = i + 1; j < ne; ++j)
                if (!(p.mu(k, i) > p.mu(k, j))) {
                    rep.violations.push_back({"mu_monotonicity",
                                              "eta-nodes (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ") x=" + fmt_g(xa[k]),
                                              p.mu(k, j) - p.mu(k, i)});
                    break;
                }
        if (rep.violations.size() >= 200) break;
    }

    // Ratio quadrature with the diagonal cells excised; divergence is
    // flagged when widening the excision band from one to two cells
    // changes the value by more than the heuristic factor.
    double q_r1 = 0.0, q_r2 = 0.0;
    const double cellw = 1.0 / (ne * ne);
    for (int k = 0; k < nx; ++k) {
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < ne; ++j) {
                int d = std::abs(i - j);
                if (d < 1) continue;
                double den = p.mu(k, i) - p.mu(k, j);
                double r = p.psi(k, i, j) / den;
                double v = r * r * cellw;
                s1 += v;
                if (d >= 2) s2 += v;
            }
        q_r1 = std::max(q_r1, s1);
        q_r2 = std::max(q_r2, s2);
    }
    rep.eq20_value = q_r1;
    rep.eq20_divergent = (q_r2 > 0.0 && q_r1 > 1.5 * q_r2) || (q_r2 == 0.0 && q_r1 > 1e8);
    if (rep.eq20_divergent)
        rep.violations.push_back({"eq20_growth", "excision band 1 vs 2 cells", q_r1});
    return rep;
}

namespace {

class ExprModel final : public ContinuumModel {
public:
    explicit ExprModel(const ContinuumExprSpec& s) : spec_(s) {
        lambda_ = Expr::parse(s.lambda);
        mu_ = Expr::parse(s.mu);
        sigma_ = Expr::parse(s.sigma);
        w_ = Expr::parse(s.w);
        theta_ = Expr::parse(s.theta);
        psi_ = Expr::parse(s.psi);
        q_ = Expr::parse(s.q.empty() ? "0" : s.q);
        r_ = Expr::parse(s.r.empty() ? "0" : s.r);
        if (!s.lambda_dx.empty()) lambda_dx_ = Expr::parse(s.lambda_dx);
        if (!s.mu_dx.empty()) mu_dx_ = Expr::parse(s.mu_dx);
    }

    ContinuumParams sample(const EnsembleGrid& grid) const override {
        ContinuumParams p;
        p.grid = grid;
        const int nx = grid.nx, ne = grid.ne;
        Axis xa = space_axis(nx), ea = ensemble_axis(ne);
        p.lambda = Field2(nx, ne);
        p.lambda_x = Field2(nx, ne);
        p.mu = Field2(nx, ne);
        p.mu_x = Field2(nx, ne);
        p.sigma = Field3(nx, ne, ne);
        p.W = Field3(nx, ne, ne);
        p.theta = Field3(nx, ne, ne);
        p.psi = Field3(nx, ne, ne);
        p.Q = Field2(ne, ne);
        p.R = Field2(ne, ne);
        const double h = 1e-6;
        for (int k = 0; k < nx; ++k) {
            ExprEnv env;
            env.x = xa[k];
            for (int i = 0; i < ne; ++i) {
                env.y = ea[i];
                env.eta = ea[i];
                p.lambda(k, i) = lambda_.eval(env);
                p.mu(k, i) = mu_.eval(env);
                if (lambda_dx_) {
                    p.lambda_x(k, i) = lambda_dx_->eval(env);
                } else {
                    ExprEnv e2 = env;
                    e2.x = std::min(1.0, env.x + h);
                    ExprEnv e1 = env;
                    e1.x = std::max(0.0, env.x - h);
                    p.lambda_x(k, i) = (lambda_.eval(e2) - lambda_.eval(e1)) / (e2.x - e1.x);
                }
                if (mu_dx_) {
                    p.mu_x(k, i) = mu_dx_->eval(env);
                } else {
                    ExprEnv e2 = env;
                    e2.x = std::min(1.0, env.x + h);
                    ExprEnv e1 = env;
                    e1.x = std::max(0.0, env.x - h);
                    p.mu_x(k, i) = (mu_.eval(e2) - mu_.eval(e1)) / (e2.x - e1.x);
                }
                for (int j = 0; j < ne; ++j) {
                    env.zeta = ea[j];
                    p.sigma(k, i, j) = sigma_.eval(env);
                    p.W(k, i, j) = w_.eval(env);
                    p.theta(k, i, j) = theta_.eval(env);
                    p.psi(k, i, j) = psi_.eval(env);
                }
                env.zeta = 0.0;
            }
        }
        ExprEnv env;
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < ne; ++j) {
                env.y = ea[i];
                env.eta = ea[i];
                env.zeta = ea[j];
                p.Q(i, j) = q_.eval(env);
                p.R(i, j) = r_.eval(env);
            }
        return p;
    }

private:
    ContinuumExprSpec spec_;
    Expr lambda_, mu_, sigma_, w_, theta_, psi_, q_, r_;
    std::optional<Expr> lambda_dx_, mu_dx_;
};

}  // namespace

std::unique_ptr<ContinuumModel> make_expr_model(const ContinuumExprSpec& spec) {
    return std::make_unique<ExprModel>(spec);
}

}  // namespace hyperctl
