#pragma once

#include <map>
#include <memory>
#include <string>

#include "glehomog/matops.hpp"

namespace glehomog {

// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := number | ident | '(' expr ')' | func '(' expr ')' | '-' term
// Unary minus takes a whole term, so -a*b reads as -(a*b).
// func is one of sin cos exp tanh sqrt; ident is t, x1..x9 or a named parameter.
struct ExprNode {
    enum class Kind { number, time, coord, param, neg, add, sub, mul, div, call };
    Kind kind = Kind::number;
    double value = 0.0;  // number literal or bound parameter value
    int index = 0;       // coordinate index, 0 based
    std::string name;    // parameter or function name
    std::shared_ptr<const ExprNode> a, b;
};

using ExprPtr = std::shared_ptr<const ExprNode>;

struct FieldExpr {
    ExprPtr root;
    double eval(double t, const Vec& x) const;
    std::string print() const;
    // Largest coordinate index referenced plus one.
    int coord_count() const;
    bool uses_time() const;
};

FieldExpr parse_expr(const std::string& text, const std::map<std::string, double>& params = {});
double eval_expr(const FieldExpr& e, double t, const Vec& x);
bool same_tree(const ExprPtr& a, const ExprPtr& b);

}  // namespace glehomog
