#include "kst/expr.hpp"

#include "kst/errors.hpp"
#include "kst/rational.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace kst {

namespace {

Expr make(ExprKind k, Expr a = nullptr, Expr b = nullptr) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

class Parser {
public:
    Parser(const std::string& text, int n) : s_(text), n_(n) {}

    Expr run() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("empty expression", pos_);
        Expr e = expr();
        skip_ws();
        if (pos_ < s_.size()) throw ParseError(std::string("unexpected '") + s_[pos_] + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (eat('+')) e = make(ExprKind::Add, e, term());
            else if (eat('-')) e = make(ExprKind::Sub, e, term());
            else return e;
        }
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (eat('*')) e = make(ExprKind::Mul, e, unary());
            else if (eat('/')) e = make(ExprKind::Div, e, unary());
            else return e;
        }
    }

    Expr unary() {
        if (eat('-')) return make(ExprKind::Negate, unary());
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (eat('^')) return make(ExprKind::Pow, base, unary());
        return base;
    }

    Expr atom() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    Expr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t d = 0;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_, ++d;
            return d;
        };
        std::size_t nd = digits();
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            nd += digits();
        }
        if (nd == 0) throw ParseError("malformed number", start);
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (digits() == 0) throw ParseError("malformed exponent", pos_);
        }
        double v = 0.0;
        auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (res.ec != std::errc() || res.ptr != s_.data() + pos_) throw ParseError("malformed number", start);
        auto e = std::make_shared<ExprNode>();
        e->kind = ExprKind::Number;
        e->number = v;
        return e;
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        const std::string id = s_.substr(start, pos_ - start);
        if (id.size() >= 2 && id[0] == 'x' && id[1] >= '1' && id[1] <= '9') {
            bool all_digits = true;
            for (std::size_t i = 1; i < id.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(id[i]))) all_digits = false;
            if (all_digits) {
                if (id.size() > 6) throw ParseError("variable index out of range in '" + id + "'", start);
                int idx = std::stoi(id.substr(1));
                if (idx > n_)
                    throw ParseError("variable index out of range: " + id + " with n = " + std::to_string(n_), start);
                auto e = std::make_shared<ExprNode>();
                e->kind = ExprKind::Variable;
                e->var = idx;
                return e;
            }
        }
        Builtin fn;
        if (id == "sin") fn = Builtin::Sin;
        else if (id == "cos") fn = Builtin::Cos;
        else if (id == "exp") fn = Builtin::Exp;
        else if (id == "abs") fn = Builtin::Abs;
        else if (id == "sqrt") fn = Builtin::Sqrt;
        else throw ParseError("unknown identifier '" + id + "'", start);
        if (!eat('(')) throw ParseError("expected '(' after " + id, pos_);
        Expr arg = expr();
        if (!eat(')')) throw ParseError("expected ')'", pos_);
        auto e = std::make_shared<ExprNode>();
        e->kind = ExprKind::Call;
        e->fn = fn;
        e->lhs = arg;
        return e;
    }

    const std::string& s_;
    int n_;
    std::size_t pos_ = 0;
};

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite value in ") + what);
    return v;
}

}  // namespace

Expr parse_expr(const std::string& text, int n) {
    Parser p(text, n);
    return p.run();
}

double eval_expr(const ExprNode& e, const double* p) {
    switch (e.kind) {
    case ExprKind::Number: return e.number;
    case ExprKind::Variable: return p[e.var - 1];
    case ExprKind::Negate: return -eval_expr(*e.lhs, p);
    case ExprKind::Add: return checked(eval_expr(*e.lhs, p) + eval_expr(*e.rhs, p), "addition");
    case ExprKind::Sub: return checked(eval_expr(*e.lhs, p) - eval_expr(*e.rhs, p), "subtraction");
    case ExprKind::Mul: return checked(eval_expr(*e.lhs, p) * eval_expr(*e.rhs, p), "product");
    case ExprKind::Div: {
        double d = eval_expr(*e.rhs, p);
        if (d == 0.0) throw DomainError("division by zero");
        return checked(eval_expr(*e.lhs, p) / d, "division");
    }
    case ExprKind::Pow: return checked(std::pow(eval_expr(*e.lhs, p), eval_expr(*e.rhs, p)), "power");
    case ExprKind::Call: {
        double a = eval_expr(*e.lhs, p);
        switch (e.fn) {
        case Builtin::Sin: return std::sin(a);
        case Builtin::Cos: return std::cos(a);
        case Builtin::Exp: return checked(std::exp(a), "exp");
        case Builtin::Abs: return std::fabs(a);
        case Builtin::Sqrt:
            if (a < 0) throw DomainError("sqrt of a negative number");
            return std::sqrt(a);
        }
    }
    }
    throw InternalError("unhandled expression node");
}

double eval_expr(const Expr& e, const std::vector<double>& p) {
    if (static_cast<int>(p.size()) < max_variable(*e)) throw DomainError("point has too few coordinates");
    return eval_expr(*e, p.data());
}

std::string to_string(const ExprNode& e) {
    auto bin = [&](const char* op) { return "(" + to_string(*e.lhs) + op + to_string(*e.rhs) + ")"; };
    switch (e.kind) {
    case ExprKind::Number: {
        std::string s = decimal17(e.number);
        return s[0] == '-' ? "(" + s + ")" : s;
    }
    case ExprKind::Variable: return "x" + std::to_string(e.var);
    case ExprKind::Negate: return "(-" + to_string(*e.lhs) + ")";
    case ExprKind::Add: return bin("+");
    case ExprKind::Sub: return bin("-");
    case ExprKind::Mul: return bin("*");
    case ExprKind::Div: return bin("/");
    case ExprKind::Pow: return bin("^");
    case ExprKind::Call: {
        static const char* names[] = {"sin", "cos", "exp", "abs", "sqrt"};
        return std::string(names[static_cast<int>(e.fn)]) + "(" + to_string(*e.lhs) + ")";
    }
    }
    throw InternalError("unhandled expression node");
}

int max_variable(const ExprNode& e) {
    int m = e.kind == ExprKind::Variable ? e.var : 0;
    if (e.lhs) m = std::max(m, max_variable(*e.lhs));
    if (e.rhs) m = std::max(m, max_variable(*e.rhs));
    return m;
}

}  // namespace kst
