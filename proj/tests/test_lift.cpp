#include <doctest.h>

#include <random>

#include "hyperctl/lift.hpp"
#include "hyperctl/presets.hpp"

using namespace hyperctl;

TEST_CASE("step embedding evaluates exactly at cell centers") {
    auto f = lift({1.0, 3.0}, 2);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == 3.0);
    auto c = lift({2.5}, 7);
    for (double v : c) CHECK(v == 2.5);
}

TEST_CASE("projection is the exact left inverse of the embedding") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (int k : {1, 2, 5, 9}) {
        std::vector<double> b(k);
        for (double& v : b) v = uni(rng);
        auto back = project(lift(b, 6 * k), k);
        for (int i = 0; i < k; ++i) CHECK(back[i] == b[i]);
    }
}

TEST_CASE("projection of simple profiles") {
    const int ne = 50;
    Axis ea = ensemble_axis(ne);
    std::vector<double> lin(ne), quad(ne), cst(ne, 3.25);
    for (int i = 0; i < ne; ++i) {
        lin[i] = ea[i];
        quad[i] = ea[i] * ea[i];
    }
    auto p1 = project(lin, 2);
    CHECK(p1[0] == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(p1[1] == doctest::Approx(0.75).epsilon(1e-13));
    auto p2 = project(cst, 5);
    for (double v : p2) CHECK(v == doctest::Approx(3.25));
    // exact integrals 2*int_0^1/2 z^2 = 1/12, 2*int_1/2^1 z^2 = 7/12
    auto p3 = project(quad, 2);
    CHECK(std::abs(p3[0] - 1.0 / 12.0) < 1e-3);
    CHECK(std::abs(p3[1] - 7.0 / 12.0) < 1e-3);
}

TEST_CASE("projection needs at least one node per cell") {
    CHECK_THROWS_AS(project(std::vector<double>(3, 1.0), 5), std::invalid_argument);
}

TEST_CASE("embedding is an isometry in the weighted norms") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int k : {2, 7}) {
        std::vector<double> b(k);
        for (double& v : b) v = uni(rng);
        const int ne = 10 * k;
        auto f = lift(b, ne);
        double l2 = 0.0, w = 0.0;
        for (double v : f) l2 += v * v / ne;
        for (double v : b) w += v * v / k;
        CHECK(l2 == doctest::Approx(w).epsilon(1e-14));
    }
}

TEST_CASE("projection is a contraction") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const int ne = 48;
    std::vector<double> h(ne);
    for (double& v : h) v = uni(rng);
    double l2 = 0.0;
    for (double v : h) l2 += v * v / ne;
    for (int k : {2, 4, 12}) {
        auto p = project(h, k);
        double w = 0.0;
        for (double v : p) w += v * v / k;
        CHECK(w <= l2 + 1e-14);
    }
}

TEST_CASE("lifted second-example family hits the component values") {
    NmParams p = make_nm_params(10, 10, presets::example2_nm());
    EnsembleGrid g{5, 100, 1.0, 0.1};
    ContinuumParams lifted = lift_params(p, g);
    // eta = 0.05 lies in the first cell: mu = 1 - 1/(2m) = 0.95
    Axis ea = ensemble_axis(g.ne);
    int idx = -1;
    for (int i = 0; i < g.ne; ++i)
        if (std::abs(ea[i] - 0.045) < 1e-12) idx = i;  // node inside cell 1
    REQUIRE(idx >= 0);
    CHECK(lifted.mu(0, idx) == doctest::Approx(0.95));
    // single-component family lifts to constants
    NmParams p1 = make_nm_params(1, 1, presets::example2_nm());
    ContinuumParams l1 = lift_params(p1, g);
    for (int i = 1; i < g.ne; ++i) {
        CHECK(l1.mu(0, i) == doctest::Approx(l1.mu(0, 0)));
        CHECK(l1.lambda(0, i) == doctest::Approx(l1.lambda(0, 0)));
    }
}

TEST_CASE("parameter closeness shrinks as the family grows") {
    auto model5 = make_anchor_model(make_nm_params(5, 5, presets::example1_nm()));
    EnsembleGrid g{9, 40, 1.0, 0.1};
    ClosenessNorms c5 = parameter_closeness(make_nm_params(5, 5, presets::example1_nm()),
                                            *make_anchor_model(make_nm_params(5, 5, presets::example1_nm())), g);
    ClosenessNorms c10 = parameter_closeness(make_nm_params(10, 10, presets::example1_nm()),
                                             *make_anchor_model(make_nm_params(10, 10, presets::example1_nm())), g);
    ClosenessNorms c20 = parameter_closeness(make_nm_params(20, 20, presets::example1_nm()),
                                             *make_anchor_model(make_nm_params(20, 20, presets::example1_nm())), g);
    CHECK(c10.sigma < c5.sigma);
    CHECK(c20.sigma < c10.sigma);
    CHECK(c10.mu < c5.mu);
    CHECK(c20.mu < c10.mu);
    CHECK(c10.psi < c5.psi);
    CHECK(c10.max() < c5.max());
    CHECK(c20.max() < c10.max());
    // the lambda family is exactly constant, so its gap is zero throughout
    CHECK(c5.lambda == doctest::Approx(0.0));
    (void)model5;
}

TEST_CASE("anchor construction reproduces the closed-form continuum") {
    // the second example's family is affine in the index variables, so
    // the constructed continuum must match the closed forms exactly
    NmParams p = make_nm_params(10, 10, presets::example2_nm());
    EnsembleGrid g{9, 24, 1.0, 0.1};
    ContinuumParams built = build_continuum(p, g);
    ContinuumParams exact = make_expr_model(presets::example2_continuum())->sample(g);
    double worst = 0.0;
    for (size_t q = 0; q < built.mu.size(); ++q)
        worst = std::max(worst, std::abs(built.mu.data()[q] - exact.mu.data()[q]));
    CHECK(worst < 1e-12);
    worst = 0.0;
    for (size_t q = 0; q < built.psi.size(); ++q)
        worst = std::max(worst, std::abs(built.psi.data()[q] - exact.psi.data()[q]));
    CHECK(worst < 1e-12);
    worst = 0.0;
    for (size_t q = 0; q < built.sigma.size(); ++q)
        worst = std::max(worst, std::abs(built.sigma.data()[q] - exact.sigma.data()[q]));
    CHECK(worst < 1e-12);
    worst = 0.0;
    for (size_t q = 0; q < built.Q.size(); ++q)
        worst = std::max(worst, std::abs(built.Q.data()[q] - exact.Q.data()[q]));
    CHECK(worst < 1e-12);
    CHECK(built.psi_tilde.has_value());
}

TEST_CASE("constructed continuum passes validation at any resolution") {
    NmParams p = make_nm_params(5, 5, presets::example1_nm());
    for (int ne : {10, 25, 50}) {
        EnsembleGrid g{9, ne, 1.0, 0.1};
        ValidationReport rep = validate_continuum(build_continuum(p, g));
        CHECK(rep.ok());
    }
    // degenerate one-component family
    NmParams p1 = make_nm_params(1, 1, presets::example1_nm());
    EnsembleGrid g{9, 8, 1.0, 0.1};
    ContinuumParams c = build_continuum(p1, g);
    for (size_t q = 1; q < c.mu.size(); ++q) CHECK(c.mu.data()[q] > 0.0);
}

TEST_CASE("averaged coefficients of the second example") {
    NmParams p = make_nm_params(10, 10, presets::example2_nm());
    AveragedParams a = build_averaged(p);
    CHECK(a.sigma_bar(0.5) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(a.w_bar(0.8) == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(a.theta_bar(1.0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(a.q_bar == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.r_bar == doctest::Approx(0.0));
    CHECK(a.lambda_bar(0.3) == doctest::Approx(1.0));
    // continuum mean of mu = 1 - eta/2 is 3/4; the index mean differs
    CHECK(a.mu_bar(0.5) == doctest::Approx(0.75).epsilon(1e-10));
    AveragedParams ai = build_averaged(p, AveragingMode::IndexMean);
    CHECK(ai.mu_bar(0.5) == doctest::Approx(0.725).epsilon(1e-10));
}

TEST_CASE("identical components average with zero radius") {
    NmExprSpec s;
    s.lambda = "2";
    s.mu = "1 - i/(2*m)";  // still ordered
    s.sigma = "3";
    s.w = "1";
    s.theta = "1";
    s.psi = "0";
    s.q = "1";
    s.r = "0";
    NmParams p = make_nm_params(4, 4, s);
    AveragedParams a = build_averaged(p);
    // all radius contributions vanish except the mu spread
    CHECK(a.sigma_bar(0.2) == doctest::Approx(3.0));
    NmExprSpec s2 = s;
    s2.mu = "1 - i/(2*m)";
    AveragedParams a2 = build_averaged(make_nm_params(1, 1, s2));
    CHECK(a2.eps_bar == doctest::Approx(0.0).epsilon(1e-9));
}
