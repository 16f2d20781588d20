#pragma once

// Scalar expressions over jet coordinates.
//
// Variables are t, x<i>_<s> (s-th derivative of the i-th state component),
// u<a> (or u<a>_<s> for control derivatives when the schema admits them) and
// p<i>_<s> (co-state jets). Indices are 1-based in names, 0-based in Symbol.
//
// Grammar (whitespace insignificant, no implicit multiplication):
//
//   expr     := term (('+'|'-') term)*
//   term     := factor (('*'|'/') factor)*
//   factor   := ['-'] atom ['^' exponent]
//   exponent := ['-'] number | '(' ['-'] number ['/' number] ')'
//   atom     := number | ident | func '(' expr ')' | '(' expr ')'
//   func     := sin | cos | exp | log | sqrt
//
// A '-' immediately followed by a number literal with no exponent parses as a
// negative constant; otherwise it is a negation node.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hopmp {

enum class SymbolKind : std::uint8_t { Time, State, Control, Costate };

struct Symbol {
    SymbolKind kind = SymbolKind::Time;
    int component = 0;
    int order = 0;

    static constexpr Symbol time() { return {SymbolKind::Time, 0, 0}; }
    static constexpr Symbol state(int i, int s) { return {SymbolKind::State, i, s}; }
    static constexpr Symbol control(int a, int s = 0) { return {SymbolKind::Control, a, s}; }
    static constexpr Symbol costate(int i, int s) { return {SymbolKind::Costate, i, s}; }

    std::string name() const;

    auto operator<=>(const Symbol&) const = default;
};

/// The set of legal variables and their slot layout for compiled evaluation.
class Schema {
public:
    /// max_costate_order < 0 disables co-state variables.
    Schema(int order, int state_dim, int control_dim, int max_state_order, int max_control_order,
           int max_costate_order);

    /// Variables admissible in f: x-jets up to k-1 and u.
    static Schema dynamics(int k, int n, int m);
    /// Everything the jet machinery needs: x up to 2k-1, u up to k-1, p up to k-1.
    static Schema jets(int k, int n, int m);

    int order() const noexcept { return k_; }
    int state_dim() const noexcept { return n_; }
    int control_dim() const noexcept { return m_; }
    int max_state_order() const noexcept { return max_x_; }
    int max_control_order() const noexcept { return max_u_; }
    int max_costate_order() const noexcept { return max_p_; }
    bool costate_enabled() const noexcept { return max_p_ >= 0; }

    bool contains(const Symbol& s) const noexcept;
    /// Resolves a variable name; throws UnknownSymbol or DerivativeOrderTooHigh.
    Symbol lookup(std::string_view name) const;

    std::size_t slot(const Symbol& s) const;
    std::size_t slot_count() const noexcept;
    std::vector<Symbol> symbols() const;

    bool operator==(const Schema&) const = default;

private:
    int k_, n_, m_, max_x_, max_u_, max_p_;
};

enum class Op : std::uint8_t { Const, Var, Neg, Sin, Cos, Exp, Log, Sqrt, Add, Sub, Mul, Div, Pow };

bool is_unary(Op op) noexcept;
bool is_binary(Op op) noexcept;

class Expr {
public:
    Expr();  // the constant 0

    // Raw constructors; no simplification is applied.
    static Expr constant(double v);
    static Expr variable(const Symbol& s);
    static Expr unary(Op op, Expr operand);
    static Expr binary(Op op, Expr lhs, Expr rhs);
    static Expr power(Expr base, double exponent);

    Op op() const noexcept;
    /// Constant value, or the exponent of a Pow node.
    double value() const noexcept;
    const Symbol& symbol() const noexcept;
    /// Operand of a unary node, base of Pow, left side of a binary node.
    const Expr& lhs() const noexcept;
    const Expr& rhs() const noexcept;

    bool is_constant() const noexcept { return op() == Op::Const; }
    bool is_constant(double v) const noexcept { return is_constant() && value() == v; }

    std::size_t size() const noexcept;

    friend bool operator==(const Expr& a, const Expr& b);

    struct Node;

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

// Simplifying builders: constant folding and 0/1 identity elimination only.
Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr pow(const Expr& base, double exponent);
Expr apply(Op func, const Expr& arg);

Expr parse(std::string_view source, const Schema& schema);
std::string to_string(const Expr& e);

/// Exact symbolic derivative, simplified by the builders above.
Expr differentiate(const Expr& e, const Symbol& v);
Expr substitute(const Expr& e, const std::map<Symbol, Expr>& replacements);
/// Sorted, unique.
std::vector<Symbol> free_symbols(const Expr& e);
bool depends_on(const Expr& e, const Symbol& v);

/// Tree-walking evaluation by variable name.
double evaluate(const Expr& e, const std::map<std::string, double>& binding);

/// Flat postfix form of an expression, evaluated against a slot vector laid
/// out by a Schema. Throws NonFiniteResult on any non-finite intermediate.
class Program {
public:
    Program() = default;
    Program(const Expr& e, const Schema& schema);

    double operator()(std::span<const double> slots) const;
    bool is_constant() const noexcept { return code_.size() == 1 && code_[0].op == Op::Const; }

private:
    struct Instr {
        Op op;
        std::uint32_t slot;
        double value;
    };
    std::vector<Instr> code_;
    std::size_t depth_ = 1;
};

}  // namespace hopmp
