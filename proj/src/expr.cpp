#include "glehomog/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "glehomog/errors.hpp"

namespace glehomog {

namespace {

using Kind = ExprNode::Kind;

ExprPtr node(Kind k, ExprPtr a = nullptr, ExprPtr b = nullptr) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

bool is_func(const std::string& s) { return s == "sin" || s == "cos" || s == "exp" || s == "tanh" || s == "sqrt"; }

class Parser {
public:
    Parser(const std::string& text, const std::map<std::string, double>& params) : s_(text), params_(params) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        skip();
        if (pos_ < s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    const std::string& s_;
    const std::map<std::string, double>& params_;
    size_t pos_ = 0;

    [[noreturn]] void error(const std::string& what, size_t at = std::string::npos) const {
        std::ostringstream os;
        os << "expression: " << what << " at column " << (at == std::string::npos ? pos_ : at) + 1;
        fail(ErrorKind::config, os.str());
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprPtr expr() {
        ExprPtr l = term();
        for (;;) {
            if (eat('+'))
                l = node(Kind::add, l, term());
            else if (eat('-'))
                l = node(Kind::sub, l, term());
            else
                return l;
        }
    }

    ExprPtr term() {
        ExprPtr l = factor();
        for (;;) {
            if (eat('*'))
                l = node(Kind::mul, l, factor());
            else if (eat('/'))
                l = node(Kind::div, l, factor());
            else
                return l;
        }
    }

    ExprPtr factor() {
        skip();
        if (pos_ >= s_.size()) error("unexpected end of input");
        const size_t start = pos_;
        const char c = s_[pos_];
        if (c == '-') {
            ++pos_;
            return node(Kind::neg, term());
        }
        if (c == '(') {
            ++pos_;
            ExprPtr e = expr();
            if (!eat(')')) error("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) error("malformed number");
            pos_ += size_t(end - begin);
            auto n = std::make_shared<ExprNode>();
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            if (is_func(id)) {
                if (!eat('(')) error("expected '(' after " + id);
                ExprPtr arg = expr();
                if (!eat(')')) error("expected ')'");
                auto n = std::make_shared<ExprNode>(*node(Kind::call, arg));
                n->name = id;
                return n;
            }
            auto n = std::make_shared<ExprNode>();
            n->name = id;
            if (id == "t") {
                n->kind = Kind::time;
            } else if (id.size() == 2 && id[0] == 'x' && id[1] >= '1' && id[1] <= '9') {
                n->kind = Kind::coord;
                n->index = id[1] - '1';
            } else if (auto it = params_.find(id); it != params_.end()) {
                n->kind = Kind::param;
                n->value = it->second;
            } else {
                error("unknown identifier '" + id + "'", start);
            }
            return n;
        }
        error("unexpected '" + std::string(1, c) + "'");
    }
};

double eval_node(const ExprNode& n, double t, const Vec& x) {
    switch (n.kind) {
        case Kind::number:
        case Kind::param: return n.value;
        case Kind::time: return t;
        case Kind::coord:
            if (n.index >= x.size()) fail(ErrorKind::dimension, "expression: " + n.name + " exceeds the state dimension");
            return x(n.index);
        case Kind::neg: return -eval_node(*n.a, t, x);
        case Kind::add: return eval_node(*n.a, t, x) + eval_node(*n.b, t, x);
        case Kind::sub: return eval_node(*n.a, t, x) - eval_node(*n.b, t, x);
        case Kind::mul: return eval_node(*n.a, t, x) * eval_node(*n.b, t, x);
        case Kind::div: return eval_node(*n.a, t, x) / eval_node(*n.b, t, x);
        case Kind::call: {
            const double v = eval_node(*n.a, t, x);
            if (n.name == "sin") return std::sin(v);
            if (n.name == "cos") return std::cos(v);
            if (n.name == "exp") return std::exp(v);
            if (n.name == "tanh") return std::tanh(v);
            if (v < 0) fail(ErrorKind::numerical, "expression: sqrt of a negative value");
            return std::sqrt(v);
        }
    }
    return 0.0;
}

void print_node(const ExprNode& n, std::ostringstream& os) {
    switch (n.kind) {
        case Kind::number: {
            std::ostringstream num;
            num.imbue(std::locale::classic());
            num.precision(17);
            num << n.value;
            os << num.str();
            return;
        }
        case Kind::time:
        case Kind::coord:
        case Kind::param: os << n.name; return;
        case Kind::neg:
            os << "(-";
            print_node(*n.a, os);
            os << ")";
            return;
        case Kind::call:
            os << n.name << "(";
            print_node(*n.a, os);
            os << ")";
            return;
        default: break;
    }
    const char* op = n.kind == Kind::add ? " + " : n.kind == Kind::sub ? " - " : n.kind == Kind::mul ? " * " : " / ";
    os << "(";
    print_node(*n.a, os);
    os << op;
    print_node(*n.b, os);
    os << ")";
}

void scan(const ExprNode& n, int& coords, bool& time) {
    if (n.kind == Kind::coord) coords = std::max(coords, n.index + 1);
    if (n.kind == Kind::time) time = true;
    if (n.a) scan(*n.a, coords, time);
    if (n.b) scan(*n.b, coords, time);
}

}  // namespace

FieldExpr parse_expr(const std::string& text, const std::map<std::string, double>& params) {
    Parser p(text, params);
    return FieldExpr{p.parse()};
}

double FieldExpr::eval(double t, const Vec& x) const { return eval_node(*root, t, x); }

double eval_expr(const FieldExpr& e, double t, const Vec& x) { return e.eval(t, x); }

std::string FieldExpr::print() const {
    std::ostringstream os;
    print_node(*root, os);
    return os.str();
}

int FieldExpr::coord_count() const {
    int c = 0;
    bool t = false;
    scan(*root, c, t);
    return c;
}

bool FieldExpr::uses_time() const {
    int c = 0;
    bool t = false;
    scan(*root, c, t);
    return t;
}

bool same_tree(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind || a->name != b->name || a->index != b->index) return false;
    if ((a->kind == Kind::number || a->kind == Kind::param) && a->value != b->value) return false;
    return same_tree(a->a, b->a) && same_tree(a->b, b->b);
}

}  // namespace glehomog
