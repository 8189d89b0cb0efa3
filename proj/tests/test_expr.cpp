#include <doctest.h>

#include "hyperctl/expr.hpp"

using namespace hyperctl;

TEST_CASE("arithmetic and precedence") {
    ExprEnv env;
    CHECK(Expr::parse("1 + 2*3").eval(env) == doctest::Approx(7.0));
    CHECK(Expr::parse("(1 + 2)*3").eval(env) == doctest::Approx(9.0));
    CHECK(Expr::parse("2^3^2").eval(env) == doctest::Approx(512.0));  // right-assoc
    CHECK(Expr::parse("-2^2").eval(env) == doctest::Approx(-4.0));
    CHECK(Expr::parse("6/3/2").eval(env) == doctest::Approx(1.0));
    CHECK(Expr::parse("1 - 2 - 3").eval(env) == doctest::Approx(-4.0));
    CHECK(Expr::parse("pi").eval(env) == doctest::Approx(3.14159265358979));
}

TEST_CASE("variables bind") {
    ExprEnv env;
    env.x = 0.5;
    env.y = 2.0;
    env.eta = 0.25;
    env.zeta = 0.75;
    env.i = 3;
    env.j = 4;
    env.n = 10;
    env.m = 20;
    CHECK(Expr::parse("(x+1)*y*(zeta+1/2)").eval(env) == doctest::Approx(1.5 * 2.0 * 1.25));
    CHECK(Expr::parse("2 - i/m").eval(env) == doctest::Approx(2.0 - 3.0 / 20.0));
    CHECK(Expr::parse("eta - zeta").eval(env) == doctest::Approx(-0.5));
    CHECK(Expr::parse("(i/n+1/2)*(j/m)").eval(env) == doctest::Approx(0.8 * 0.2));
}

TEST_CASE("parse errors are reported") {
    CHECK_THROWS_AS(Expr::parse("1 +"), ExprError);
    CHECK_THROWS_AS(Expr::parse("(1"), ExprError);
    CHECK_THROWS_AS(Expr::parse("foo + 1"), ExprError);
    CHECK_THROWS_AS(Expr::parse(""), ExprError);
    CHECK_THROWS_AS(Expr::parse("1 2"), ExprError);
}
