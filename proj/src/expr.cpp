#include "hyperctl/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace hyperctl {

namespace {

const char* kVarNames[] = {"x", "y", "eta", "zeta", "i", "j", "n", "m"};

int var_index(const std::string& name) {
    for (int k = 0; k < 8; ++k)
        if (name == kVarNames[k]) return k;
    return -1;
}

}  // namespace

class ExprParser {
public:
    ExprParser(const std::string& text, Expr& out) : s_(text), out_(out) {}

    void run() {
        out_.text_ = s_;
        out_.root_ = parse_sum();
        skip_ws();
        if (pos_ != s_.size())
            throw ExprError("unexpected trailing input at position " + std::to_string(pos_) +
                            " in '" + s_ + "'");
        if (out_.root_ < 0) throw ExprError("empty expression");
    }

private:
    const std::string& s_;
    Expr& out_;
    size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    int add(Expr::Node n) {
        out_.nodes_.push_back(n);
        return static_cast<int>(out_.nodes_.size()) - 1;
    }

    int parse_sum() {
        int lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                int rhs = parse_term();
                lhs = add({Expr::Op::Add, 0.0, 0, lhs, rhs});
            } else if (accept('-')) {
                int rhs = parse_term();
                lhs = add({Expr::Op::Sub, 0.0, 0, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                int rhs = parse_unary();
                lhs = add({Expr::Op::Mul, 0.0, 0, lhs, rhs});
            } else if (accept('/')) {
                int rhs = parse_unary();
                lhs = add({Expr::Op::Div, 0.0, 0, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_unary() {
        if (accept('-')) {
            int rhs = parse_unary();
            return add({Expr::Op::Neg, 0.0, 0, -1, rhs});
        }
        accept('+');
        return parse_power();
    }

    int parse_power() {
        int base = parse_atom();
        if (accept('^')) {
            int exp = parse_unary();  // right-associative, binds tighter than unary on the left
            return add({Expr::Op::Pow, 0.0, 0, base, exp});
        }
        return base;
    }

    int parse_atom() {
        skip_ws();
        if (pos_ >= s_.size()) throw ExprError("unexpected end of expression in '" + s_ + "'");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = parse_sum();
            if (!accept(')')) throw ExprError("missing ')' in '" + s_ + "'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            char* end = nullptr;
            double v = std::strtod(s_.c_str() + pos_, &end);
            pos_ = static_cast<size_t>(end - s_.c_str());
            return add({Expr::Op::Const, v, 0, -1, -1});
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string name = s_.substr(start, pos_ - start);
            if (name == "pi") return add({Expr::Op::Const, M_PI, 0, -1, -1});
            int vi = var_index(name);
            if (vi < 0) throw ExprError("unknown identifier '" + name + "' in '" + s_ + "'");
            return add({Expr::Op::Var, 0.0, vi, -1, -1});
        }
        throw ExprError(std::string("unexpected character '") + c + "' in '" + s_ + "'");
    }
};

Expr Expr::parse(const std::string& text) {
    Expr e;
    ExprParser(text, e).run();
    return e;
}

double Expr::eval_node(int idx, const ExprEnv& env) const {
    const Node& n = nodes_[static_cast<size_t>(idx)];
    switch (n.op) {
        case Op::Const:
            return n.value;
        case Op::Var:
            switch (n.var) {
                case 0: return env.x;
                case 1: return env.y;
                case 2: return env.eta;
                case 3: return env.zeta;
                case 4: return env.i;
                case 5: return env.j;
                case 6: return env.n;
                default: return env.m;
            }
        case Op::Add: return eval_node(n.lhs, env) + eval_node(n.rhs, env);
        case Op::Sub: return eval_node(n.lhs, env) - eval_node(n.rhs, env);
        case Op::Mul: return eval_node(n.lhs, env) * eval_node(n.rhs, env);
        case Op::Div: return eval_node(n.lhs, env) / eval_node(n.rhs, env);
        case Op::Pow: return std::pow(eval_node(n.lhs, env), eval_node(n.rhs, env));
        case Op::Neg: return -eval_node(n.rhs, env);
    }
    return 0.0;
}

double Expr::eval(const ExprEnv& env) const {
    if (root_ < 0) throw ExprError("evaluating empty expression");
    return eval_node(root_, env);
}

}  // namespace hyperctl
