#include <doctest.h>

#include <cmath>

#include "hyperctl/characteristics.hpp"
#include "hyperctl/presets.hpp"

using namespace hyperctl;

namespace {

ContinuumParams example1_params(int nx = 33, int ne = 20) {
    EnsembleGrid g{nx, ne, 1.0, 0.1};
    return make_expr_model(presets::example1_continuum())->sample(g);
}

}  // namespace

TEST_CASE("rho endpoints") {
    ContinuumParams p = example1_params();
    for (double eta : {0.1, 0.5, 0.9}) {
        CHECK(rho(p, 0.0, eta, eta + 0.05) == doctest::Approx(0.0).epsilon(1e-10));
        for (double x : {0.3, 0.7, 1.0})
            CHECK(rho(p, x, eta, eta) == doctest::Approx(x).epsilon(1e-8));
    }
    CHECK_THROWS_AS(rho(p, 0.5, 0.9, 0.1), std::invalid_argument);
}

TEST_CASE("rho matches the x-independent closed form") {
    // mu = 2 - eta gives rho = x (2 - zeta) / (2 - eta)
    ContinuumParams p = example1_params(65, 40);
    for (double x : {0.25, 0.6, 1.0})
        for (double eta : {0.0, 0.2, 0.5})
            for (double zeta : {0.6, 0.9, 1.0}) {
                if (eta > zeta) continue;
                double expect = x * (2.0 - zeta) / (2.0 - eta);
                CHECK(rho(p, x, eta, zeta) == doctest::Approx(expect).epsilon(5e-4));
            }
    CHECK(rho(p, 1.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(5e-4));
}

TEST_CASE("rightgoing-kernel characteristic with constant speeds") {
    // From (1, 0) on the eta = zeta = 0 plane the speeds are (-2, +1);
    // the path meets the diagonal at (1/3, 1/3) after s = 1/3.
    ContinuumParams p = example1_params(65, 40);
    CharPath path = trace_characteristics(p, 1.0, 0.0, 0.0, 0.0, CharFamily::K);
    CHECK(path.s_end == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    CHECK(path.x.back() == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    CHECK(path.xi.back() == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
}

TEST_CASE("segment-a kernel characteristic terminates on the hypersurface") {
    ContinuumParams p = example1_params(65, 40);
    double eta = 0.1, zeta = 0.9;
    double x = 0.9, xi = 0.1;  // well below rho
    REQUIRE(xi < rho(p, x, eta, zeta));
    CharPath path = trace_characteristics(p, x, xi, eta, zeta, CharFamily::K);
    CHECK(path.face == TerminalFace::XiEqRho);
    double xf = path.x.back(), xif = path.xi.back();
    CHECK(xif == doctest::Approx(rho(p, xf, eta, zeta)).epsilon(1e-5));
}

TEST_CASE("leftgoing-kernel characteristics by sign") {
    ContinuumParams p = example1_params(65, 40);
    // eta <= zeta: both coordinates decrease, terminating on xi = 0 or
    // the diagonal
    CharPath a = trace_characteristics(p, 0.9, 0.2, 0.1, 0.8, CharFamily::L);
    CHECK((a.face == TerminalFace::XiZero || a.face == TerminalFace::Diagonal));
    for (size_t k = 1; k < a.x.size(); ++k) {
        CHECK(a.x[k] <= a.x[k - 1] + 1e-12);
        CHECK(a.xi[k] <= a.xi[k - 1] + 1e-12);
    }
    // zeta < eta: both increase, terminating at x = 1 or the diagonal
    CharPath c = trace_characteristics(p, 0.5, 0.2, 0.8, 0.1, CharFamily::L);
    CHECK((c.face == TerminalFace::XEqOne || c.face == TerminalFace::Diagonal));
    for (size_t k = 1; k < c.x.size(); ++k) {
        CHECK(c.x[k] >= c.x[k - 1] - 1e-12);
        CHECK(c.xi[k] >= c.xi[k - 1] - 1e-12);
    }
}
