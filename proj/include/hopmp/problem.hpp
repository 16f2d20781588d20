#pragma once

// Problem definition, validation and the compiled form shared by the solvers.
//
// All expressions in a definition are parsed against Schema::jets(k, n, m) so
// that validation, rather than the parser, reports variables that are legal
// jet coordinates but forbidden in f or C.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hopmp/control.hpp"
#include "hopmp/expr.hpp"
#include "hopmp/jets.hpp"

namespace hopmp {

struct ControlSet {
    enum class Kind { Points, Box };

    Kind kind = Kind::Box;
    std::vector<std::vector<double>> points;
    Box box;

    static ControlSet from_points(std::vector<std::vector<double>> pts);
    static ControlSet from_box(std::vector<double> lower, std::vector<double> upper);

    /// The box itself, or the bounding box of the points.
    Box bounding_box() const;
    bool contains(std::span<const double> omega, double tol = 1e-12) const;
};

struct ProblemDefinition {
    int order = 1;
    int state_dim = 1;
    int control_dim = 1;
    double horizon = 1.0;
    std::vector<Expr> dynamics;
    Expr cost;
    ControlSet control_set;
    /// Bounds on u_(l), l = 1..k-1; missing entries are unbounded.
    std::vector<Box> derivative_bounds;
    /// Convex superset of K used for smoothed needles; defaults to the
    /// bounding box of K scaled about its center by hat_inflation.
    std::optional<Box> hat;
    double hat_inflation = 2.0;
    /// Initial jet x_(0..k-1), level-major: initial[s * n + i].
    std::vector<double> initial;
};

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;
    bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate(const ProblemDefinition& def);

/// A validated problem with every symbolic object it needs compiled once.
class Problem {
public:
    /// Throws ValidationFailed when validate(def) reports violations.
    explicit Problem(ProblemDefinition def);

    const ProblemDefinition& definition() const noexcept { return def_; }
    int order() const noexcept { return def_.order; }
    int state_dim() const noexcept { return def_.state_dim; }
    int control_dim() const noexcept { return def_.control_dim; }
    double horizon() const noexcept { return def_.horizon; }
    const Schema& schema() const noexcept { return schema_; }
    const ControlSet& control_set() const noexcept { return def_.control_set; }
    const Box& hat() const noexcept { return hat_; }
    const std::vector<Box>& derivative_bounds() const noexcept { return derivative_bounds_; }
    std::span<const double> initial() const noexcept { return def_.initial; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    const std::vector<Expr>& dynamics() const noexcept { return def_.dynamics; }
    const Expr& cost() const noexcept { return def_.cost; }
    const DerivedSystem& derived_system() const noexcept { return derived_; }
    const std::vector<Expr>& adjoint_rhs() const noexcept { return adjoint_rhs_; }
    const std::vector<std::vector<Expr>>& terminal_chain(TerminalConvention c) const {
        return c == TerminalConvention::Derived ? terminal_derived_ : terminal_printed_;
    }

    // Slot layout of the jets schema.
    std::size_t slot_count() const noexcept { return slot_count_; }
    std::size_t x_slot(int s, int i) const noexcept {
        return 1 + static_cast<std::size_t>(s * def_.state_dim + i);
    }
    std::size_t u_slot(int s, int a) const noexcept {
        return u_offset_ + static_cast<std::size_t>(s * def_.control_dim + a);
    }
    std::size_t p_slot(int s, int i) const noexcept {
        return p_offset_ + static_cast<std::size_t>(s * def_.state_dim + i);
    }

    // Compiled programs over the jets schema.
    const Program& f(int i) const { return f_.at(static_cast<std::size_t>(i)); }
    const Program& cost_program() const noexcept { return cost_program_; }
    /// x_(l)i for k <= l <= 2k-1.
    const Program& derived(int l, int i) const {
        return derived_programs_.at(static_cast<std::size_t>((l - def_.order) * def_.state_dim + i));
    }
    const Program& adjoint(int i) const { return adjoint_programs_.at(static_cast<std::size_t>(i)); }
    const Program& terminal(TerminalConvention c, int l, int i) const;
    /// d f^j / d x^i_(s).
    const Program& dfdx(int j, int i, int s) const;
    /// d C / d x^i_(s).
    const Program& dcdx(int i, int s) const;

private:
    ProblemDefinition def_;
    Schema schema_;
    Box hat_;
    std::vector<Box> derivative_bounds_;
    std::vector<std::string> warnings_;
    std::size_t slot_count_ = 0;
    std::size_t u_offset_ = 0;
    std::size_t p_offset_ = 0;

    DerivedSystem derived_;
    std::vector<Expr> adjoint_rhs_;
    std::vector<std::vector<Expr>> terminal_derived_;
    std::vector<std::vector<Expr>> terminal_printed_;

    std::vector<Program> f_;
    Program cost_program_;
    std::vector<Program> derived_programs_;
    std::vector<Program> adjoint_programs_;
    std::vector<Program> terminal_derived_programs_;
    std::vector<Program> terminal_printed_programs_;
    std::vector<Program> dfdx_;
    std::vector<Program> dcdx_;
};

/// sum_j p_j (x^j_(k) - f^j(t, x-jets, omega)). The state jet must reach
/// order k; only level 0 of the co-state jet is read.
double pontryagin_lagrangian(const Problem& problem, const Jet& state, const Jet& costate,
                             std::span<const double> omega);

}  // namespace hopmp
