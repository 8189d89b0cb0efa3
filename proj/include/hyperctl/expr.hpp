#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperctl {

struct ExprError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Variables available to parameter expressions. Ensemble variables for
// continuum fields, 1-based component indices for n+m families.
struct ExprEnv {
    double x = 0.0;
    double y = 0.0;
    double eta = 0.0;
    double zeta = 0.0;
    double i = 0.0;
    double j = 0.0;
    double n = 0.0;
    double m = 0.0;
};

// Arithmetic expressions over {x, y, eta, zeta, i, j, n, m}:
// +, -, *, /, ^ (right-assoc), unary minus, parentheses, numeric
// literals and pi. Parsed once into a flat node list.
class Expr {
public:
    Expr() = default;

    static Expr parse(const std::string& text);

    double eval(const ExprEnv& env) const;

    bool empty() const { return nodes_.empty(); }
    const std::string& text() const { return text_; }

private:
    enum class Op : unsigned char { Const, Var, Add, Sub, Mul, Div, Pow, Neg };

    struct Node {
        Op op;
        double value = 0.0;  // Const
        int var = 0;         // Var: index into ExprEnv fields
        int lhs = -1, rhs = -1;
    };

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;

    double eval_node(int idx, const ExprEnv& env) const;

    friend class ExprParser;
};

}  // namespace hyperctl
