#pragma once

#include <memory>
#include <string>
#include <vector>

namespace kst {

enum class ExprKind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
enum class Builtin { Sin, Cos, Exp, Abs, Sqrt };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprKind kind;
    double number = 0.0;  // Number
    int var = 0;          // Variable, 1-based
    Builtin fn = Builtin::Sin;
    Expr lhs, rhs;        // unary operands live in lhs
};

/// Parses text over variables x1..xn. Precedence, tightest first:
/// '^' (right-assoc, exponent may carry a unary minus), unary '-', '*' '/', '+' '-'.
/// Throws ParseError carrying the byte offset of the offending token.
Expr parse_expr(const std::string& text, int n);

/// Evaluates at p[0..n-1]; DomainError on division by zero, sqrt of a
/// negative number, or any non-finite intermediate.
double eval_expr(const ExprNode& e, const double* p);
double eval_expr(const Expr& e, const std::vector<double>& p);

/// Fully parenthesized text that parses back to the same tree.
std::string to_string(const ExprNode& e);

/// Largest variable index used.
int max_variable(const ExprNode& e);

}  // namespace kst
