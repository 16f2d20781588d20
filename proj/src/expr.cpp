#include "hopmp/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <system_error>

#include "hopmp/errors.hpp"

namespace hopmp {

// ---------------------------------------------------------------------------
// Symbol / Schema
// ---------------------------------------------------------------------------

std::string Symbol::name() const {
    switch (kind) {
        case SymbolKind::Time:
            return "t";
        case SymbolKind::State:
            return "x" + std::to_string(component + 1) + "_" + std::to_string(order);
        case SymbolKind::Control:
            if (order == 0) return "u" + std::to_string(component + 1);
            return "u" + std::to_string(component + 1) + "_" + std::to_string(order);
        case SymbolKind::Costate:
            return "p" + std::to_string(component + 1) + "_" + std::to_string(order);
    }
    return "?";
}

Schema::Schema(int order, int state_dim, int control_dim, int max_state_order,
               int max_control_order, int max_costate_order)
    : k_(order),
      n_(state_dim),
      m_(control_dim),
      max_x_(max_state_order),
      max_u_(max_control_order),
      max_p_(max_costate_order) {}

Schema Schema::dynamics(int k, int n, int m) { return Schema(k, n, m, k - 1, 0, -1); }

Schema Schema::jets(int k, int n, int m) { return Schema(k, n, m, 2 * k - 1, k - 1, k - 1); }

bool Schema::contains(const Symbol& s) const noexcept {
    switch (s.kind) {
        case SymbolKind::Time:
            return true;
        case SymbolKind::State:
            return s.component >= 0 && s.component < n_ && s.order >= 0 && s.order <= max_x_;
        case SymbolKind::Control:
            return s.component >= 0 && s.component < m_ && s.order >= 0 && s.order <= max_u_;
        case SymbolKind::Costate:
            return s.component >= 0 && s.component < n_ && s.order >= 0 && s.order <= max_p_;
    }
    return false;
}

namespace {

bool parse_index(std::string_view text, int& out) {
    if (text.empty() || text.size() > 6) return false;
    for (char c : text)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Symbol Schema::lookup(std::string_view name) const {
    const std::string str(name);
    if (name == "t") return Symbol::time();
    if (name.size() < 2) throw UnknownSymbol(str);

    const char head = name[0];
    const auto rest = name.substr(1);
    const auto underscore = rest.find('_');
    int comp = 0;
    int ord = 0;
    if (underscore == std::string_view::npos) {
        if (head != 'u' || !parse_index(rest, comp)) throw UnknownSymbol(str);
    } else {
        if (!parse_index(rest.substr(0, underscore), comp) ||
            !parse_index(rest.substr(underscore + 1), ord))
            throw UnknownSymbol(str);
    }
    if (comp < 1) throw UnknownSymbol(str);

    Symbol s;
    switch (head) {
        case 'x':
            if (comp > n_) throw UnknownSymbol(str);
            if (ord > max_x_) throw DerivativeOrderTooHigh(str);
            s = Symbol::state(comp - 1, ord);
            break;
        case 'u':
            if (comp > m_) throw UnknownSymbol(str);
            if (ord > max_u_) throw DerivativeOrderTooHigh(str);
            s = Symbol::control(comp - 1, ord);
            break;
        case 'p':
            if (!costate_enabled() || comp > n_) throw UnknownSymbol(str);
            if (ord > max_p_) throw DerivativeOrderTooHigh(str);
            s = Symbol::costate(comp - 1, ord);
            break;
        default:
            throw UnknownSymbol(str);
    }
    return s;
}

std::size_t Schema::slot(const Symbol& s) const {
    if (!contains(s)) throw UnknownSymbol(s.name());
    const auto n = static_cast<std::size_t>(n_);
    const auto m = static_cast<std::size_t>(m_);
    const std::size_t x_block = static_cast<std::size_t>(max_x_ + 1) * n;
    const std::size_t u_block = static_cast<std::size_t>(max_u_ + 1) * m;
    switch (s.kind) {
        case SymbolKind::Time:
            return 0;
        case SymbolKind::State:
            return 1 + static_cast<std::size_t>(s.order) * n + static_cast<std::size_t>(s.component);
        case SymbolKind::Control:
            return 1 + x_block + static_cast<std::size_t>(s.order) * m +
                   static_cast<std::size_t>(s.component);
        case SymbolKind::Costate:
            return 1 + x_block + u_block + static_cast<std::size_t>(s.order) * n +
                   static_cast<std::size_t>(s.component);
    }
    return 0;
}

std::size_t Schema::slot_count() const noexcept {
    const auto n = static_cast<std::size_t>(n_);
    const auto m = static_cast<std::size_t>(m_);
    return 1 + static_cast<std::size_t>(max_x_ + 1) * n + static_cast<std::size_t>(max_u_ + 1) * m +
           static_cast<std::size_t>(max_p_ + 1) * n;
}

std::vector<Symbol> Schema::symbols() const {
    std::vector<Symbol> out{Symbol::time()};
    for (int s = 0; s <= max_x_; ++s)
        for (int i = 0; i < n_; ++i) out.push_back(Symbol::state(i, s));
    for (int s = 0; s <= max_u_; ++s)
        for (int a = 0; a < m_; ++a) out.push_back(Symbol::control(a, s));
    for (int s = 0; s <= max_p_; ++s)
        for (int i = 0; i < n_; ++i) out.push_back(Symbol::costate(i, s));
    return out;
}

// ---------------------------------------------------------------------------
// Expr nodes
// ---------------------------------------------------------------------------

struct Expr::Node {
    Op op = Op::Const;
    double value = 0.0;
    Symbol symbol{};
    Expr lhs_;
    Expr rhs_;
    std::size_t size = 1;

    // Leaf constructor; avoids recursion through Expr's default constructor.
    Node(Op o, double v, Symbol s) : op(o), value(v), symbol(s), lhs_(nullptr), rhs_(nullptr) {}
    Node(Op o, double v, Expr a, Expr b, std::size_t sz)
        : op(o), value(v), lhs_(std::move(a)), rhs_(std::move(b)), size(sz) {}
};

namespace {
const std::shared_ptr<const Expr::Node>& zero_node();
}

bool is_unary(Op op) noexcept {
    return op == Op::Neg || op == Op::Sin || op == Op::Cos || op == Op::Exp || op == Op::Log ||
           op == Op::Sqrt;
}

bool is_binary(Op op) noexcept {
    return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div;
}

Expr::Expr() : node_(zero_node()) {}

Expr Expr::constant(double v) {
    return Expr(std::make_shared<const Node>(Op::Const, v, Symbol{}));
}

Expr Expr::variable(const Symbol& s) {
    return Expr(std::make_shared<const Node>(Op::Var, 0.0, s));
}

Expr Expr::unary(Op op, Expr operand) {
    const std::size_t sz = operand.size() + 1;
    return Expr(std::make_shared<const Node>(op, 0.0, std::move(operand), Expr(nullptr), sz));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
    const std::size_t sz = lhs.size() + rhs.size() + 1;
    return Expr(std::make_shared<const Node>(op, 0.0, std::move(lhs), std::move(rhs), sz));
}

Expr Expr::power(Expr base, double exponent) {
    const std::size_t sz = base.size() + 1;
    return Expr(std::make_shared<const Node>(Op::Pow, exponent, std::move(base), Expr(nullptr), sz));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
const Symbol& Expr::symbol() const noexcept { return node_->symbol; }
const Expr& Expr::lhs() const noexcept { return node_->lhs_; }
const Expr& Expr::rhs() const noexcept { return node_->rhs_; }
std::size_t Expr::size() const noexcept { return node_ ? node_->size : 0; }

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    if (a.op() != b.op() || a.size() != b.size()) return false;
    switch (a.op()) {
        case Op::Const:
            return a.value() == b.value();
        case Op::Var:
            return a.symbol() == b.symbol();
        case Op::Pow:
            return a.value() == b.value() && a.lhs() == b.lhs();
        default:
            break;
    }
    if (is_unary(a.op())) return a.lhs() == b.lhs();
    return a.lhs() == b.lhs() && a.rhs() == b.rhs();
}

namespace {

const std::shared_ptr<const Expr::Node>& zero_node() {
    static const auto node = std::make_shared<const Expr::Node>(Op::Const, 0.0, Symbol{});
    return node;
}

double apply_unary(Op op, double a) {
    switch (op) {
        case Op::Neg: return -a;
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Exp: return std::exp(a);
        case Op::Log: return std::log(a);
        case Op::Sqrt: return std::sqrt(a);
        default: return a;
    }
}

double apply_binary(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
        default: return a;
    }
}

const char* function_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        default: return "?";
    }
}

[[noreturn]] void throw_non_finite(Op op, double a, double b) {
    switch (op) {
        case Op::Div:
            if (b == 0.0) throw NonFiniteResult("division by zero");
            break;
        case Op::Log:
            if (a <= 0.0) throw NonFiniteResult("log of non-positive value");
            break;
        case Op::Sqrt:
            if (a < 0.0) throw NonFiniteResult("sqrt of negative value");
            break;
        default:
            break;
    }
    throw NonFiniteResult("non-finite intermediate value");
}

}  // namespace

// ---------------------------------------------------------------------------
// Simplifying builders
// ---------------------------------------------------------------------------

Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr::constant(-a.value());
    if (a.op() == Op::Neg) return a.lhs();
    return Expr::unary(Op::Neg, a);
}

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() + b.value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return Expr::binary(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return Expr::binary(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() * b.value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    return Expr::binary(Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) {
        const double q = a.value() / b.value();
        if (std::isfinite(q)) return Expr::constant(q);
    }
    if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr::constant(0.0);
    if (b.is_constant(1.0)) return a;
    return Expr::binary(Op::Div, a, b);
}

Expr pow(const Expr& base, double exponent) {
    if (exponent == 0.0) return Expr::constant(1.0);
    if (exponent == 1.0) return base;
    if (base.is_constant()) {
        const double v = std::pow(base.value(), exponent);
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::power(base, exponent);
}

Expr apply(Op func, const Expr& arg) {
    if (func == Op::Neg) return -arg;
    if (arg.is_constant()) {
        const double v = apply_unary(func, arg.value());
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::unary(func, arg);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    Parser(std::string_view src, const Schema& schema) : src_(src), schema_(schema) {}

    Expr parse_all() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail("end of input or operator", "unexpected character");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& expected, const std::string& detail) const {
        throw SyntaxError(pos_, expected, detail);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("'") + c + "'", "missing token");
    }

    bool at_number() {
        skip_ws();
        if (pos_ >= src_.size()) return false;
        const char c = src_[pos_];
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
    }

    double number() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                pos_ = look;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (ec != std::errc{} || ptr != src_.data() + pos_) {
            pos_ = start;
            fail("number", "malformed number");
        }
        return v;
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        for (;;) {
            if (accept('+'))
                lhs = Expr::binary(Op::Add, lhs, parse_term());
            else if (accept('-'))
                lhs = Expr::binary(Op::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    Expr parse_term() {
        Expr lhs = parse_factor();
        for (;;) {
            if (accept('*'))
                lhs = Expr::binary(Op::Mul, lhs, parse_factor());
            else if (accept('/'))
                lhs = Expr::binary(Op::Div, lhs, parse_factor());
            else
                return lhs;
        }
    }

    Expr parse_factor() {
        const bool negate = accept('-');
        const bool literal = negate && at_number();
        Expr base = parse_atom();
        if (accept('^')) {
            const Expr powered = Expr::power(base, parse_exponent());
            return negate ? Expr::unary(Op::Neg, powered) : powered;
        }
        if (literal) return Expr::constant(-base.value());
        return negate ? Expr::unary(Op::Neg, base) : base;
    }

    double parse_exponent() {
        if (accept('(')) {
            const double sign = accept('-') ? -1.0 : 1.0;
            if (!at_number()) fail("number", "exponent must be a constant");
            double v = number();
            if (accept('/')) {
                if (!at_number()) fail("number", "exponent denominator must be a constant");
                const double d = number();
                if (d == 0.0) fail("non-zero denominator", "zero exponent denominator");
                v /= d;
            }
            expect(')');
            return sign * v;
        }
        const double sign = accept('-') ? -1.0 : 1.0;
        if (!at_number()) fail("number", "exponent must be a constant");
        return sign * number();
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("number, identifier or '('", "unexpected end of input");
        if (at_number()) return Expr::constant(number());
        if (accept('(')) {
            Expr inner = parse_expr();
            expect(')');
            return inner;
        }
        const char c = src_[pos_];
        if (!std::isalpha(static_cast<unsigned char>(c)))
            fail("number, identifier or '('", std::string("unexpected '") + c + "'");
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view ident = src_.substr(start, pos_ - start);

        static constexpr std::array<std::pair<std::string_view, Op>, 5> functions{{
            {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt},
        }};
        for (const auto& [name, op] : functions) {
            if (ident == name) {
                expect('(');
                Expr arg = parse_expr();
                expect(')');
                return Expr::unary(op, arg);
            }
        }
        return Expr::variable(schema_.lookup(ident));
    }

    std::string_view src_;
    const Schema& schema_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view source, const Schema& schema) {
    return Parser(source, schema).parse_all();
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

// Binding strength of the printed form: 1 sum, 2 product, 3 factor with a
// leading '-', 4 power, 5 atom.
int precedence(const Expr& e) {
    switch (e.op()) {
        case Op::Add:
        case Op::Sub:
            return 1;
        case Op::Mul:
        case Op::Div:
            return 2;
        case Op::Neg:
            return 3;
        case Op::Pow:
            return 4;
        case Op::Const:
            return std::signbit(e.value()) ? 3 : 5;
        default:
            return 5;
    }
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, int min_prec, std::string& out) {
    if (precedence(e) < min_prec) {
        out += '(';
        print(e, out);
        out += ')';
    } else {
        print(e, out);
    }
}

void print(const Expr& e, std::string& out) {
    switch (e.op()) {
        case Op::Const:
            out += format_number(e.value());
            return;
        case Op::Var:
            out += e.symbol().name();
            return;
        case Op::Neg:
            out += '-';
            // "-2" would read back as a negative literal.
            if (e.lhs().is_constant()) {
                out += '(';
                print(e.lhs(), out);
                out += ')';
            } else {
                print_wrapped(e.lhs(), 4, out);
            }
            return;
        case Op::Sin:
        case Op::Cos:
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt:
            out += function_name(e.op());
            out += '(';
            print(e.lhs(), out);
            out += ')';
            return;
        case Op::Pow: {
            print_wrapped(e.lhs(), 5, out);
            out += '^';
            const double x = e.value();
            if (x == std::trunc(x) && std::abs(x) < 1e15)
                out += format_number(x);
            else
                out += "(" + format_number(x) + ")";
            return;
        }
        case Op::Add:
        case Op::Sub:
            print_wrapped(e.lhs(), 1, out);
            out += e.op() == Op::Add ? '+' : '-';
            print_wrapped(e.rhs(), 2, out);
            return;
        case Op::Mul:
        case Op::Div:
            print_wrapped(e.lhs(), 2, out);
            out += e.op() == Op::Mul ? '*' : '/';
            print_wrapped(e.rhs(), 3, out);
            return;
    }
}

}  // namespace

std::string to_string(const Expr& e) {
    std::string out;
    print(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Calculus
// ---------------------------------------------------------------------------

Expr differentiate(const Expr& e, const Symbol& v) {
    switch (e.op()) {
        case Op::Const:
            return Expr::constant(0.0);
        case Op::Var:
            return Expr::constant(e.symbol() == v ? 1.0 : 0.0);
        case Op::Neg:
            return -differentiate(e.lhs(), v);
        case Op::Sin:
            return apply(Op::Cos, e.lhs()) * differentiate(e.lhs(), v);
        case Op::Cos:
            return -apply(Op::Sin, e.lhs()) * differentiate(e.lhs(), v);
        case Op::Exp:
            return apply(Op::Exp, e.lhs()) * differentiate(e.lhs(), v);
        case Op::Log:
            return differentiate(e.lhs(), v) / e.lhs();
        case Op::Sqrt:
            return differentiate(e.lhs(), v) / (Expr::constant(2.0) * apply(Op::Sqrt, e.lhs()));
        case Op::Pow: {
            const double x = e.value();
            return Expr::constant(x) * pow(e.lhs(), x - 1.0) * differentiate(e.lhs(), v);
        }
        case Op::Add:
            return differentiate(e.lhs(), v) + differentiate(e.rhs(), v);
        case Op::Sub:
            return differentiate(e.lhs(), v) - differentiate(e.rhs(), v);
        case Op::Mul:
            return differentiate(e.lhs(), v) * e.rhs() + e.lhs() * differentiate(e.rhs(), v);
        case Op::Div: {
            const Expr da = differentiate(e.lhs(), v);
            const Expr db = differentiate(e.rhs(), v);
            if (db.is_constant(0.0)) return da / e.rhs();
            return (da * e.rhs() - e.lhs() * db) / pow(e.rhs(), 2.0);
        }
    }
    return Expr::constant(0.0);
}

Expr substitute(const Expr& e, const std::map<Symbol, Expr>& replacements) {
    switch (e.op()) {
        case Op::Const:
            return e;
        case Op::Var: {
            const auto it = replacements.find(e.symbol());
            return it == replacements.end() ? e : it->second;
        }
        case Op::Pow:
            return pow(substitute(e.lhs(), replacements), e.value());
        case Op::Add:
            return substitute(e.lhs(), replacements) + substitute(e.rhs(), replacements);
        case Op::Sub:
            return substitute(e.lhs(), replacements) - substitute(e.rhs(), replacements);
        case Op::Mul:
            return substitute(e.lhs(), replacements) * substitute(e.rhs(), replacements);
        case Op::Div:
            return substitute(e.lhs(), replacements) / substitute(e.rhs(), replacements);
        default:
            return apply(e.op(), substitute(e.lhs(), replacements));
    }
}

namespace {

void collect(const Expr& e, std::set<Symbol>& out) {
    switch (e.op()) {
        case Op::Const:
            return;
        case Op::Var:
            out.insert(e.symbol());
            return;
        default:
            collect(e.lhs(), out);
            if (is_binary(e.op())) collect(e.rhs(), out);
    }
}

}  // namespace

std::vector<Symbol> free_symbols(const Expr& e) {
    std::set<Symbol> s;
    collect(e, s);
    return {s.begin(), s.end()};
}

bool depends_on(const Expr& e, const Symbol& v) {
    switch (e.op()) {
        case Op::Const:
            return false;
        case Op::Var:
            return e.symbol() == v;
        default:
            return depends_on(e.lhs(), v) || (is_binary(e.op()) && depends_on(e.rhs(), v));
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double checked(double r, Op op, double a, double b) {
    if (!std::isfinite(r)) throw_non_finite(op, a, b);
    return r;
}

double eval_tree(const Expr& e, const std::map<std::string, double>& binding) {
    switch (e.op()) {
        case Op::Const:
            return e.value();
        case Op::Var: {
            const auto name = e.symbol().name();
            const auto it = binding.find(name);
            if (it == binding.end()) throw MissingBinding(name);
            return it->second;
        }
        case Op::Pow: {
            const double a = eval_tree(e.lhs(), binding);
            return checked(std::pow(a, e.value()), Op::Pow, a, e.value());
        }
        default:
            break;
    }
    const double a = eval_tree(e.lhs(), binding);
    if (is_unary(e.op())) return checked(apply_unary(e.op(), a), e.op(), a, 0.0);
    const double b = eval_tree(e.rhs(), binding);
    return checked(apply_binary(e.op(), a, b), e.op(), a, b);
}

void emit(const Expr& e, const Schema& schema, std::vector<std::pair<Op, std::pair<std::uint32_t, double>>>& code,
          std::size_t depth, std::size_t& max_depth) {
    max_depth = std::max(max_depth, depth);
    switch (e.op()) {
        case Op::Const:
            code.push_back({Op::Const, {0, e.value()}});
            return;
        case Op::Var:
            code.push_back({Op::Var, {static_cast<std::uint32_t>(schema.slot(e.symbol())), 0.0}});
            return;
        case Op::Pow:
            emit(e.lhs(), schema, code, depth, max_depth);
            code.push_back({Op::Pow, {0, e.value()}});
            return;
        default:
            break;
    }
    emit(e.lhs(), schema, code, depth, max_depth);
    if (is_binary(e.op())) emit(e.rhs(), schema, code, depth + 1, max_depth);
    code.push_back({e.op(), {0, 0.0}});
}

}  // namespace

double evaluate(const Expr& e, const std::map<std::string, double>& binding) {
    return eval_tree(e, binding);
}

Program::Program(const Expr& e, const Schema& schema) {
    std::vector<std::pair<Op, std::pair<std::uint32_t, double>>> code;
    std::size_t max_depth = 1;
    emit(e, schema, code, 1, max_depth);
    code_.reserve(code.size());
    for (const auto& [op, payload] : code) code_.push_back({op, payload.first, payload.second});
    depth_ = max_depth;
}

double Program::operator()(std::span<const double> slots) const {
    constexpr std::size_t kInline = 64;
    std::array<double, kInline> small{};
    std::vector<double> large;
    double* stack = small.data();
    if (depth_ > kInline) {
        large.resize(depth_);
        stack = large.data();
    }
    std::size_t top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case Op::Const:
                stack[top++] = in.value;
                break;
            case Op::Var:
                stack[top++] = slots[in.slot];
                break;
            case Op::Pow: {
                const double a = stack[top - 1];
                stack[top - 1] = checked(std::pow(a, in.value), Op::Pow, a, in.value);
                break;
            }
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: {
                const double b = stack[--top];
                const double a = stack[top - 1];
                stack[top - 1] = checked(apply_binary(in.op, a, b), in.op, a, b);
                break;
            }
            default: {
                const double a = stack[top - 1];
                stack[top - 1] = checked(apply_unary(in.op, a), in.op, a, 0.0);
                break;
            }
        }
    }
    return code_.empty() ? 0.0 : stack[0];
}

}  // namespace hopmp
