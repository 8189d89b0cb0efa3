#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hyperctl/expr.hpp"
#include "hyperctl/tensor.hpp"

namespace hyperctl {

// Shared grid description: nx endpoint-inclusive space samples on [0,1],
// ne cell-centered samples per ensemble variable, time horizon with
// output stride.
struct EnsembleGrid {
    int nx = 128;
    int ne = 50;
    double t_final = 5.0;
    double output_dt = 0.05;
};

// Scalar function of x in [0,1] with a derivative. Backed by an
// expression (optionally with an analytic derivative) or by samples on
// a uniform axis; sampled derivatives fall back to central differences.
class ScalarFn {
public:
    ScalarFn() : ScalarFn(0.0) {}
    explicit ScalarFn(double constant);
    ScalarFn(Expr value, std::optional<Expr> deriv, ExprEnv bound);
    static ScalarFn from_samples(std::vector<double> values, const Axis& ax);

    double operator()(double x) const { return value_(x); }
    double deriv(double x) const { return deriv_(x); }

private:
    std::function<double(double)> value_;
    std::function<double(double)> deriv_;
};

struct Violation {
    std::string code;      // e.g. "mu_ordering", "psi_diagonal", "shape"
    std::string location;  // indices / x position
    double value = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool structural_error = false;
    double eq20_value = 0.0;      // continuum only: the ratio quadrature
    bool eq20_divergent = false;  // two-radius growth heuristic fired

    bool ok() const { return violations.empty() && !structural_error; }
    std::string to_string() const;  // deterministic rendering
};

// All coefficients of the finite n+m system. Component functions are
// 1-based in the papers' index convention; storage is 0-based.
struct NmParams {
    int n = 0;
    int m = 0;
    std::vector<ScalarFn> lambda;               // n
    std::vector<ScalarFn> mu;                   // m
    std::vector<std::vector<ScalarFn>> Sigma;   // n x n
    std::vector<std::vector<ScalarFn>> W;       // n x m
    std::vector<std::vector<ScalarFn>> Theta;   // m x n
    std::vector<std::vector<ScalarFn>> Psi;     // m x m
    Field2 Q;                                   // n x m
    Field2 R;                                   // m x n
};

// Build an n+m family from expressions in {x, i, j, n, m}; i is the row
// index and j the column index, both 1-based.
struct NmExprSpec {
    std::string lambda, mu, sigma, w, theta, psi;
    std::string q, r;
    std::string lambda_dx, mu_dx;  // optional analytic x-derivatives
};
NmParams make_nm_params(int n, int m, const NmExprSpec& spec);

ValidationReport validate_nm(const NmParams& params, int nx = 65);

// Continuum coefficients sampled on an EnsembleGrid. lambda/mu carry
// x-derivative fields; psi optionally carries its factored form
// psi = psi_tilde * (mu(x,eta) - mu(x,zeta)).
struct ContinuumParams {
    EnsembleGrid grid;
    Field2 lambda, lambda_x;  // (nx, ne) over (x, y)
    Field2 mu, mu_x;          // (nx, ne) over (x, eta)
    Field3 sigma;             // (nx, ne, ne) over (x, y, zeta)
    Field3 W;                 // (nx, ne, ne)
    Field3 theta;             // (nx, ne, ne) over (x, eta, zeta)
    Field3 psi;               // (nx, ne, ne) over (x, eta, zeta)
    Field2 Q, R;              // (ne, ne)
    std::optional<Field3> psi_tilde;
};

ValidationReport validate_continuum(const ContinuumParams& params);

// A continuum system that can be materialized on any grid: either
// closed-form expressions or the anchor construction from an n+m family.
class ContinuumModel {
public:
    virtual ~ContinuumModel() = default;
    virtual ContinuumParams sample(const EnsembleGrid& grid) const = 0;
};

struct ContinuumExprSpec {
    std::string lambda, mu, sigma, w, theta, psi;
    std::string q, r;
    std::string lambda_dx, mu_dx;  // optional analytic x-derivatives
};

std::unique_ptr<ContinuumModel> make_expr_model(const ContinuumExprSpec& spec);

// Averaged (ensemble-constant) coefficients plus the realized closeness
// radius of the component family they were averaged from.
struct AveragedParams {
    ScalarFn lambda_bar, mu_bar, sigma_bar, w_bar, theta_bar;
    double q_bar = 0.0;
    double r_bar = 0.0;
    double eps_bar = 0.0;
};

}  // namespace hyperctl
