#pragma once

// Co-state of the k-th order problem and of its first-order reduction.

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hopmp/forward.hpp"
#include "hopmp/jets.hpp"
#include "hopmp/problem.hpp"

namespace hopmp {

/// Co-state jets p_(0..k-1) on the grid of the generating trajectory.
class AdjointTrajectory {
public:
    int order() const noexcept { return k_; }
    int state_dim() const noexcept { return n_; }
    TerminalConvention convention() const noexcept { return convention_; }
    const std::vector<double>& times() const noexcept { return t_; }
    std::size_t node_count() const noexcept { return t_.size(); }

    /// Level-major jet at a node: p[s * n + i].
    std::span<const double> jets(std::size_t node) const;
    double p(std::size_t node, int s, int i) const { return jets(node)[static_cast<std::size_t>(s * n_ + i)]; }
    /// Level 0..max_level at t, linear between nodes.
    std::vector<double> jets_at(double t, int max_level = 0) const;

    std::optional<double> crosscheck_deviation;

private:
    friend AdjointTrajectory integrate_adjoint(const Problem&, const Trajectory&, TerminalConvention);

    int k_ = 0;
    int n_ = 0;
    TerminalConvention convention_ = TerminalConvention::Derived;
    std::vector<double> t_;
    std::vector<double> p_;
};

/// Multipliers of the reduced system, level-major per node: q[l * n + i]
/// multiplies the equation for y_l = x_(l).
class ReducedCostate {
public:
    int order() const noexcept { return k_; }
    int state_dim() const noexcept { return n_; }
    const std::vector<double>& times() const noexcept { return t_; }
    std::span<const double> values(std::size_t node) const;
    double q(std::size_t node, int l, int i) const { return values(node)[static_cast<std::size_t>(l * n_ + i)]; }

private:
    friend ReducedCostate reduced_adjoint(const Problem&, const Trajectory&);

    int k_ = 0;
    int n_ = 0;
    std::vector<double> t_;
    std::vector<double> q_;
};

/// p_(0..k-1) at T, level-major. Level l reads only levels below l.
std::vector<double> terminal_jet(const Problem& problem, const Trajectory& traj,
                                 TerminalConvention convention = TerminalConvention::Derived);

/// Backward RK4 on (p, ..., p_(k-1)) with p_(k) from the symbolic adjoint
/// right-hand side.
AdjointTrajectory integrate_adjoint(const Problem& problem, const Trajectory& traj,
                                    TerminalConvention convention = TerminalConvention::Derived);

/// Classical adjoint of the nk-dimensional reduction.
ReducedCostate reduced_adjoint(const Problem& problem, const Trajectory& traj);

/// sup |p - q_(k-1)| / sup |q_(k-1)| (0 when both vanish). Throws
/// GridMismatch unless the grids coincide exactly.
double crosscheck(const AdjointTrajectory& a, const ReducedCostate& r);

/// Columns t, p<i>_<s>, then q<l>_<i> blocks when a reduced co-state is given.
void write_csv(std::ostream& os, const AdjointTrajectory& a, const ReducedCostate* r = nullptr);

}  // namespace hopmp
