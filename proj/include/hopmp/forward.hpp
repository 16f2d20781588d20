#pragma once

// Forward integration of x_(k) = f through the first-order reduction
// y = (x, x_(1), ..., x_(k-1)), with classic RK4 on a grid that contains every
// control breakpoint as a node.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "hopmp/control.hpp"
#include "hopmp/problem.hpp"

namespace hopmp {

/// y' = (y_1, ..., y_{k-1}, f) with y level-major (y[s * n + i] = x^i_(s)).
/// The map between initial jets and reduced states is the identity.
struct ReducedSystem {
    int state_dim = 0;
    int order = 0;
    int dim = 0;

    std::vector<double> initial_state(const Problem& problem) const;
    /// `slots` is scratch space of size problem.slot_count() whose u-slots
    /// already hold the control jet at t.
    void rhs(const Problem& problem, double t, std::span<const double> y, std::span<double> slots,
             std::span<double> dy) const;
};

ReducedSystem reduce_first_order(const Problem& problem);

struct ForwardOptions {
    int grid = 2048;
    /// Relative bound on the step-halving error estimate.
    double tolerance = 1e-8;
    bool richardson = true;
    /// Minimum number of steps across any non-constant control segment.
    int steps_per_smooth_segment = 16;
};

/// Uniform nodes k*T/N merged with the breakpoints; a breakpoint within
/// 1e-13*T of a uniform node replaces it. `refine` lists segments
/// [start, end) that need at least `min_steps` intervals.
std::vector<double> build_grid(double horizon, int intervals, const std::vector<double>& breakpoints,
                               const std::vector<std::pair<double, double>>& refine = {},
                               int min_steps = 1);

class Trajectory {
public:
    Trajectory() = default;

    int order() const noexcept { return k_; }
    int state_dim() const noexcept { return n_; }
    /// Stored jet levels per node: orders 0..2k-2.
    int levels() const noexcept { return 2 * k_ - 1; }
    const std::vector<double>& times() const noexcept { return t_; }
    std::size_t node_count() const noexcept { return t_.size(); }
    std::size_t interval_count() const noexcept { return t_.empty() ? 0 : t_.size() - 1; }
    const ControlCurve& control() const noexcept { return control_; }

    /// All stored jets at a node, level-major (s * n + i). Node jets of order
    /// >= k use the control of the interval to the right (left at T).
    std::span<const double> jets(std::size_t node) const;
    double x(std::size_t node, int s, int i) const { return jets(node)[static_cast<std::size_t>(s * n_ + i)]; }
    /// Reduced state (orders 0..k-1) at the midpoint of an interval.
    std::span<const double> midpoint_state(std::size_t interval) const;
    /// Control segment index used on an interval.
    std::size_t segment_of(std::size_t interval) const { return segment_.at(interval); }
    /// Interval i with t_i <= t < t_{i+1} (the last interval for t = T).
    std::size_t interval_at(double t) const;

    /// Jets of orders 0..max_level at t, linear between nodes.
    std::vector<double> jets_at(double t, int max_level) const;

    double error_estimate() const noexcept { return error_estimate_; }
    double max_step() const noexcept { return max_step_; }
    static constexpr const char* method() noexcept { return "rk4"; }

    /// Columns t, x<i>_<s> (s = 0..2k-2), u<a>.
    void write_csv(std::ostream& os) const;

private:
    friend Trajectory integrate_forward(const Problem&, const ControlCurve&, const ForwardOptions&);

    int k_ = 0;
    int n_ = 0;
    int m_ = 0;
    std::vector<double> t_;
    std::vector<double> jets_;
    std::vector<double> mid_;
    std::vector<std::size_t> segment_;
    ControlCurve control_;
    double error_estimate_ = 0.0;
    double max_step_ = 0.0;
};

/// Throws NonFiniteState on blow-up and StepTooCoarse when the step-halving
/// estimate exceeds the tolerance.
Trajectory integrate_forward(const Problem& problem, const ControlCurve& u, const ForwardOptions& opts = {});

double terminal_cost(const Problem& problem, const Trajectory& traj);
double cost_of(const Problem& problem, const ControlCurve& u, const ForwardOptions& opts = {});

/// Where a stage value sits inside an interval.
enum class Stage { Left, Mid, Right };

/// Fills t, x-jets 0..2k-2 and the control jet (orders 0..k-1) of the
/// interval's segment at the given stage. Orders k..2k-2 come from the
/// derived system.
void fill_stage_slots(const Problem& problem, const Trajectory& traj, std::size_t interval, Stage stage,
                      std::span<double> slots);

/// Fills the derived jets x_(k..max_level) into slots that already hold t,
/// the low jets and the control jet.
void fill_derived_jets(const Problem& problem, int max_level, std::span<double> slots);

}  // namespace hopmp
