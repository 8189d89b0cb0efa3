#include <doctest.h>

#include <cmath>
#include <random>

#include "hyperctl/presets.hpp"
#include "hyperctl/stability.hpp"

using namespace hyperctl;

namespace {

Trajectory synthetic(const std::vector<double>& norms, double dt) {
    Trajectory t;
    t.kind = StateKind::Continuum;
    for (size_t k = 0; k < norms.size(); ++k) {
        t.times.push_back(k * dt);
        t.norms.push_back(norms[k]);
        t.control_norms.push_back(0.0);
        t.controls.emplace_back();
    }
    return t;
}

}  // namespace

TEST_CASE("log-linear fit recovers exact exponential data") {
    std::vector<double> n;
    for (int k = 0; k <= 50; ++k) n.push_back(std::exp(-2.0 * 0.1 * k));
    DecayFit fit = decay_fit(synthetic(n, 0.1), 0.0, 5.0);
    CHECK(fit.omega == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.cls == StabilityClass::ExpStable);
    CHECK(fit.amplitude == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constant norms are bounded with zero rate") {
    std::vector<double> n(30, 0.7);
    DecayFit fit = decay_fit(synthetic(n, 0.05), 0.0, 2.0);
    CHECK(fit.omega == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.cls == StabilityClass::Bounded);
}

TEST_CASE("fit is scale invariant") {
    std::vector<double> a, b;
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> jitter(0.95, 1.05);
    for (int k = 0; k <= 40; ++k) {
        double v = std::exp(-1.3 * 0.1 * k) * jitter(rng);
        a.push_back(v);
        b.push_back(100.0 * v);
    }
    DecayFit fa = decay_fit(synthetic(a, 0.1), 0.0, 4.0);
    DecayFit fb = decay_fit(synthetic(b, 0.1), 0.0, 4.0);
    CHECK(fa.omega == doctest::Approx(fb.omega).epsilon(1e-12));
    CHECK(fb.amplitude == doctest::Approx(100.0 * fa.amplitude).epsilon(1e-9));
}

TEST_CASE("all-zero norms classify as stable with the sentinel rate") {
    std::vector<double> n(20, 0.0);
    DecayFit fit = decay_fit(synthetic(n, 0.1), 0.0, 1.9);
    CHECK(std::isinf(fit.omega));
    CHECK(fit.cls == StabilityClass::ExpStable);
}

TEST_CASE("growth beyond tenfold with negative rate is unstable") {
    std::vector<double> n;
    for (int k = 0; k <= 30; ++k) n.push_back(std::exp(0.9 * 0.1 * k));
    DecayFit fit = decay_fit(synthetic(n, 0.1), 0.0, 3.0);
    CHECK(fit.omega < 0.0);
    CHECK(fit.growth > 10.0);
    CHECK(fit.cls == StabilityClass::Unstable);
}

TEST_CASE("too few samples in the window is an error") {
    std::vector<double> n(3, 1.0);
    CHECK_THROWS_AS(decay_fit(synthetic(n, 0.1), 0.0, 0.3), std::invalid_argument);
}

TEST_CASE("lyapunov weights from zero coupling") {
    EnsembleGrid g{17, 6, 1.0, 0.1};
    ContinuumExprSpec s;
    s.lambda = "1";
    s.mu = "2 - eta";
    s.sigma = "0";
    s.w = "0";
    s.theta = "0";
    s.psi = "0";
    s.q = "0";
    s.r = "0";
    ContinuumParams p = make_expr_model(s)->sample(g);
    TargetCoeffs tc;
    tc.nx = g.nx;
    tc.ne = g.ne;
    tc.C_plus = Field4(g.nx, g.nx, g.ne, g.ne, 0.0);
    tc.C_minus = Field4(g.nx, g.nx, g.ne, g.ne, 0.0);
    tc.G = Field3(g.nx, g.ne, g.ne, 0.0);
    LyapunovConfig cfg = lyapunov_params(tc, p);
    CHECK(cfg.delta > 2.0);
    CHECK(cfg.M_Q == doctest::Approx(0.0));
    CHECK(cfg.c == doctest::Approx(1.01));
    for (double d : cfg.D) CHECK(d == doctest::Approx(1.01));
    CHECK(cfg.d_inequality_ok);
}

TEST_CASE("Q-column bound of the first example") {
    // int_0^1 Q(y, chi) dchi = (y + 1/2)/2 and its squared L2 norm is 13/48
    EnsembleGrid g{9, 200, 1.0, 0.1};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(g);
    TargetCoeffs tc;
    tc.nx = g.nx;
    tc.ne = g.ne;
    tc.C_plus = Field4(g.nx, g.nx, g.ne, g.ne, 0.0);
    tc.C_minus = Field4(g.nx, g.nx, g.ne, g.ne, 0.0);
    tc.G = Field3(g.nx, g.ne, g.ne, 0.0);
    LyapunovConfig cfg = lyapunov_params(tc, p);
    CHECK(cfg.M_Q == doctest::Approx(std::sqrt(13.0 / 48.0)).epsilon(1e-4));
}

TEST_CASE("lyapunov value of simple states") {
    EnsembleGrid g{33, 8, 1.0, 0.1};
    ContinuumExprSpec s = presets::example1_continuum();
    s.lambda = "1";
    ContinuumParams p = make_expr_model(s)->sample(g);
    LyapunovConfig cfg;
    cfg.delta = 1e-3;
    cfg.c = 1.0;
    cfg.rate = 0.0;
    cfg.D.assign(g.ne, 1.0);
    TargetState ts;
    ts.alpha = Field2(g.ne, g.nx, 1.0);
    ts.beta = Field2(g.ne, g.nx, 0.0);
    double V = lyapunov_value(cfg, ts, p);
    CHECK(V == doctest::Approx(1.0).epsilon(2e-3));
    TargetState tz;
    tz.alpha = Field2(g.ne, g.nx, 0.0);
    tz.beta = Field2(g.ne, g.nx, 0.0);
    CHECK(lyapunov_value(cfg, tz, p) == 0.0);
}

TEST_CASE("lyapunov functional is norm-equivalent") {
    EnsembleGrid g{33, 10, 1.0, 0.1};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(g);
    TargetCoeffs tc;
    tc.nx = g.nx;
    tc.ne = g.ne;
    tc.C_plus = Field4(g.nx, g.nx, g.ne, g.ne, 0.0);
    tc.C_minus = Field4(g.nx, g.nx, g.ne, g.ne, 0.0);
    tc.G = Field3(g.nx, g.ne, g.ne, 0.0);
    LyapunovConfig cfg = lyapunov_params(tc, p);
    double m_lam = cfg.m_lambda, m_mu = cfg.m_mu;
    double M_lam = 0, M_mu = 0, maxD = 0;
    for (size_t q = 0; q < p.lambda.size(); ++q) M_lam = std::max(M_lam, p.lambda.data()[q]);
    for (size_t q = 0; q < p.mu.size(); ++q) M_mu = std::max(M_mu, p.mu.data()[q]);
    for (double d : cfg.D) maxD = std::max(maxD, d);
    double c1 = std::min(std::exp(-cfg.delta) / M_lam, 1.0 / M_mu);
    double c2 = std::max(1.0 / m_lam, std::exp(cfg.delta) * maxD / m_mu);
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        TargetState ts;
        ts.alpha = Field2(g.ne, g.nx);
        ts.beta = Field2(g.ne, g.nx);
        for (size_t q = 0; q < ts.alpha.size(); ++q) ts.alpha.data()[q] = uni(rng);
        for (size_t q = 0; q < ts.beta.size(); ++q) ts.beta.data()[q] = uni(rng);
        StateField s2;
        s2.u = ts.alpha;
        s2.v = ts.beta;
        double nrm2 = state_norm(s2);
        nrm2 *= nrm2;
        double V = lyapunov_value(cfg, ts, p);
        CHECK(V >= c1 * nrm2 * (1.0 - 1e-9));
        CHECK(V <= c2 * nrm2 * (1.0 + 1e-9));
    }
}
