#include "hopmp/jets.hpp"

#include <map>

#include "hopmp/errors.hpp"

namespace hopmp {

namespace {

Symbol next_level(const Symbol& s) { return {s.kind, s.component, s.order + 1}; }

Expr total_derivative(const Expr& e, const Schema& schema, bool with_control) {
    // free_symbols is sorted: t, then x by (order, component), u, p.
    Expr result = Expr::constant(0.0);
    Expr control_terms = Expr::constant(0.0);
    for (const Symbol& s : free_symbols(e)) {
        const Expr partial = differentiate(e, s);
        if (partial.is_constant(0.0)) continue;
        if (s.kind == SymbolKind::Time) {
            result = result + partial;
            continue;
        }
        if (s.kind == SymbolKind::Control && !with_control) continue;
        const Symbol up = next_level(s);
        if (!schema.contains(up)) throw DerivativeOrderTooHigh(up.name());
        const Expr term = partial * Expr::variable(up);
        if (s.kind == SymbolKind::Control)
            control_terms = control_terms + term;
        else
            result = result + term;
    }
    return result + control_terms;
}

double sign(int power) { return power % 2 == 0 ? 1.0 : -1.0; }

Expr scaled(double s, const Expr& e) { return Expr::constant(s) * e; }

// sum_m p_m * df^m / dx^i_(level)
Expr costate_contraction(std::span<const Expr> f, int i, int level) {
    Expr sum = Expr::constant(0.0);
    for (std::size_t m = 0; m < f.size(); ++m) {
        const Expr partial = differentiate(f[m], Symbol::state(i, level));
        sum = sum + Expr::variable(Symbol::costate(static_cast<int>(m), 0)) * partial;
    }
    return sum;
}

Expr repeated_dt_partial(Expr e, int times, const Schema& schema) {
    for (int h = 0; h < times; ++h) e = dt_partial(e, schema);
    return e;
}

}  // namespace

Expr dt_partial(const Expr& e, const Schema& schema) { return total_derivative(e, schema, false); }

Expr dt_full(const Expr& e, const Schema& schema) { return total_derivative(e, schema, true); }

DerivedSystem build_derived_system(std::span<const Expr> f, int k, const Schema& schema) {
    const int n = static_cast<int>(f.size());
    std::map<Symbol, Expr> top;
    for (int i = 0; i < n; ++i) top.emplace(Symbol::state(i, k), f[static_cast<std::size_t>(i)]);

    std::vector<std::vector<Expr>> levels;
    levels.emplace_back(f.begin(), f.end());
    for (int l = k; l < 2 * k - 1; ++l) {
        std::vector<Expr> next;
        next.reserve(f.size());
        for (const Expr& e : levels.back()) next.push_back(substitute(dt_full(e, schema), top));
        levels.push_back(std::move(next));
    }
    return DerivedSystem(k, std::move(levels));
}

std::vector<Expr> adjoint_rhs(std::span<const Expr> f, int k, const Schema& schema) {
    const int n = static_cast<int>(f.size());
    std::vector<Expr> rhs;
    rhs.reserve(f.size());
    for (int i = 0; i < n; ++i) {
        Expr sum = Expr::constant(0.0);
        for (int h = 0; h < k; ++h) {
            const Expr term = repeated_dt_partial(costate_contraction(f, i, h), h, schema);
            sum = sum + scaled(sign(h), term);
        }
        rhs.push_back(scaled(sign(k), sum));
    }
    return rhs;
}

std::vector<std::vector<Expr>> terminal_conditions(std::span<const Expr> f, const Expr& cost, int k,
                                                   const Schema& schema,
                                                   TerminalConvention convention) {
    const int n = static_cast<int>(f.size());
    std::vector<std::vector<Expr>> chain(static_cast<std::size_t>(k));
    for (int l = 0; l < k; ++l) {
        const double cost_sign =
            convention == TerminalConvention::Derived ? sign(l + 1) : sign(l);
        for (int i = 0; i < n; ++i) {
            Expr value = scaled(cost_sign, differentiate(cost, Symbol::state(i, k - 1 - l)));
            for (int h = 0; h < l; ++h) {
                const Expr term =
                    repeated_dt_partial(costate_contraction(f, i, k - l + h), h, schema);
                value = value + scaled(sign(l + h), term);
            }
            chain[static_cast<std::size_t>(l)].push_back(value);
        }
    }
    return chain;
}

}  // namespace hopmp
