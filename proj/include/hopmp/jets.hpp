#pragma once

// Total derivatives on jet expressions and the symbolic objects built from
// them: the prolonged dynamics, the adjoint right-hand side and the terminal
// co-state chain.

#include <span>
#include <vector>

#include "hopmp/expr.hpp"

namespace hopmp {

/// Values of a curve and its first `order` derivatives at time t.
struct Jet {
    double t = 0.0;
    int dim = 0;
    int order = 0;
    std::vector<double> values;  // level-major: values[s * dim + i]

    Jet() = default;
    Jet(double time, int dimension, int max_order)
        : t(time), dim(dimension), order(max_order),
          values(static_cast<std::size_t>((max_order + 1) * dimension), 0.0) {}

    std::span<double> level(int s) {
        return {values.data() + static_cast<std::size_t>(s * dim), static_cast<std::size_t>(dim)};
    }
    std::span<const double> level(int s) const {
        return {values.data() + static_cast<std::size_t>(s * dim), static_cast<std::size_t>(dim)};
    }
};

/// Control-frozen total derivative: d/dt over t, state jets and co-state jets,
/// with no terms in the control derivatives.
Expr dt_partial(const Expr& e, const Schema& schema);

/// dt_partial plus the control-jet terms u_(s+1) * de/du_(s).
Expr dt_full(const Expr& e, const Schema& schema);

/// Expressions for x_(l), l = k..2k-1, each over x-jets below k and u-jets up
/// to l-k (every x_(k) produced by differentiation is replaced by f).
class DerivedSystem {
public:
    DerivedSystem() = default;
    DerivedSystem(int order, std::vector<std::vector<Expr>> levels)
        : k_(order), levels_(std::move(levels)) {}

    int order() const noexcept { return k_; }
    int lowest() const noexcept { return k_; }
    int highest() const noexcept { return 2 * k_ - 1; }
    /// Components of x_(l) for k <= l <= 2k-1.
    const std::vector<Expr>& at(int l) const { return levels_.at(static_cast<std::size_t>(l - k_)); }

private:
    int k_ = 0;
    std::vector<std::vector<Expr>> levels_;
};

DerivedSystem build_derived_system(std::span<const Expr> f, int k, const Schema& schema);

/// p_(k) in terms of (t, x-jets up to 2k-2, p-jets up to k-1, u); linear in p.
std::vector<Expr> adjoint_rhs(std::span<const Expr> f, int k, const Schema& schema);

enum class TerminalConvention {
    /// Natural boundary terms of the controlled Euler-Lagrange system; agrees
    /// with the classical p(T) = -dC/dx when k = 1.
    Derived,
    /// The terminal chain exactly as typeset in the source, whose cost term
    /// carries the opposite sign.
    AsPrinted,
};

/// Terminal co-state chain: result[l][i] is p_(l)i at T as an expression over
/// x-jets up to 2k-3 and p-jets of order strictly below l.
std::vector<std::vector<Expr>> terminal_conditions(std::span<const Expr> f, const Expr& cost, int k,
                                                   const Schema& schema,
                                                   TerminalConvention convention);

}  // namespace hopmp
