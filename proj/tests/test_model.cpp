#include <doctest.h>

#include "hyperctl/lift.hpp"
#include "hyperctl/model.hpp"
#include "hyperctl/presets.hpp"

using namespace hyperctl;

TEST_CASE("first example family satisfies the standing assumptions") {
    NmParams p = make_nm_params(5, 5, presets::example1_nm());
    ValidationReport rep = validate_nm(p);
    CHECK(rep.ok());
    CHECK(rep.to_string() == "ok\n");
}

TEST_CASE("equal mu components are flagged") {
    NmExprSpec s = presets::example1_nm();
    s.mu = "1";  // all components identical
    NmParams p = make_nm_params(3, 3, s);
    ValidationReport rep = validate_nm(p);
    CHECK_FALSE(rep.ok());
    bool found = false;
    for (const auto& v : rep.violations) found = found || v.code == "mu_ordering";
    CHECK(found);
}

TEST_CASE("nonzero psi diagonal is flagged") {
    NmExprSpec s = presets::example1_nm();
    s.psi = "1/2";  // diagonal no longer vanishes
    NmParams p = make_nm_params(2, 2, s);
    ValidationReport rep = validate_nm(p);
    bool found = false;
    for (const auto& v : rep.violations) found = found || v.code == "psi_diagonal";
    CHECK(found);
}

TEST_CASE("shape mismatch is a structural error") {
    NmParams p = make_nm_params(3, 3, presets::example1_nm());
    p.lambda.pop_back();
    ValidationReport rep = validate_nm(p);
    CHECK(rep.structural_error);
}

TEST_CASE("continuum validation of the first example") {
    EnsembleGrid g{17, 50, 1.0, 0.1};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(g);
    ValidationReport rep = validate_continuum(p);
    CHECK(rep.ok());
    // ratio field is identically one; the excised quadrature misses only
    // the diagonal cells
    CHECK(rep.eq20_value == doctest::Approx(1.0 - 1.0 / g.ne).epsilon(1e-12));
    CHECK_FALSE(rep.eq20_divergent);
}

TEST_CASE("increasing mu violates the ordering assumption") {
    ContinuumExprSpec s = presets::example1_continuum();
    s.mu = "1 + eta";
    EnsembleGrid g{9, 8, 1.0, 0.1};
    ContinuumParams p = make_expr_model(s)->sample(g);
    ValidationReport rep = validate_continuum(p);
    bool found = false;
    for (const auto& v : rep.violations) found = found || v.code == "mu_monotonicity";
    CHECK(found);
}

TEST_CASE("non-factoring psi makes the ratio quadrature grow without bound") {
    ContinuumExprSpec s = presets::example1_continuum();
    s.psi = "1";
    auto model = make_expr_model(s);
    EnsembleGrid g25{9, 25, 1.0, 0.1}, g50{9, 50, 1.0, 0.1};
    ValidationReport r25 = validate_continuum(model->sample(g25));
    ValidationReport r50 = validate_continuum(model->sample(g50));
    CHECK(r50.eq20_value > 1.5 * r25.eq20_value);  // grows as the grid refines
    CHECK(r25.eq20_divergent);
    CHECK(r50.eq20_divergent);
}

TEST_CASE("nan fields are structural errors") {
    EnsembleGrid g{9, 8, 1.0, 0.1};
    ContinuumParams p = make_expr_model(presets::example1_continuum())->sample(g);
    p.sigma(1, 1, 1) = std::numeric_limits<double>::quiet_NaN();
    ValidationReport rep = validate_continuum(p);
    CHECK(rep.structural_error);
}

TEST_CASE("validation reports are deterministic") {
    NmExprSpec s = presets::example1_nm();
    s.mu = "1";
    NmParams p = make_nm_params(4, 4, s);
    CHECK(validate_nm(p).to_string() == validate_nm(p).to_string());
}
