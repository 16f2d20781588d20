#pragma once

// Descent by needle modifications: locate where the applied control fails to
// maximize H and replace it there by the maximizer on a short window whose
// width is found by line search on the realized cost.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hopmp/adjoint.hpp"
#include "hopmp/control.hpp"
#include "hopmp/errors.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/pontryagin.hpp"
#include "hopmp/problem.hpp"

namespace hopmp {

struct ImproveOptions {
    /// Converged once the sup of kappa over admissible times is at most this.
    double tolerance = 1e-4;
    int max_iterations = 200;
    /// Largest needle width as a fraction of T (also capped by tau/4).
    double width_fraction = 0.05;
    double shrink = 0.5;
    int max_trials = 20;
    /// Accept a width when the realized drop is at least theta times the
    /// predicted first-order gain.
    double theta = 0.25;
    bool smoothing = false;
    /// Ramp constant used for smoothed needles is min(smoothing_cap, epsilon).
    double smoothing_cap = 0.25;
    ForwardOptions forward;
    TerminalConvention convention = TerminalConvention::Derived;
    int tau_points = 512;
    /// Pieces shorter than this fraction of T contribute no midpoint to the
    /// time grid (a left-sided needle cannot clear a piece that starts at 0).
    double min_piece_fraction = 1e-4;
    /// Number of distinct maximizers examined per step, by decreasing kappa.
    int max_ceilings = 8;
    int workers = 1;
    MaximizeOptions maximize;
};

struct StepRecord {
    int iteration = 0;
    double cost_before = 0.0;
    double cost_after = 0.0;
    double tau = 0.0;
    std::vector<double> omega;
    /// max H - H(u(tau-)) at the peak time.
    double kappa = 0.0;
    /// Predicted first-order drop of the chosen needle.
    double predicted = 0.0;
    double epsilon = 0.0;
    bool accepted = false;
    std::vector<TrialRecord> trials;
};

struct StepOutcome {
    bool converged = false;
    ControlCurve control;
    double cost = 0.0;
    StepRecord record;
    PMPReport report;
};

/// One descent step from u. Throws StepFailed when no trial width lowers the
/// cost.
StepOutcome improve_step(const Problem& problem, const ControlCurve& u, const ImproveOptions& opts = {});

struct OptimizeResult {
    enum class Termination { Converged, MaxIterations, StepFailed };

    ControlCurve control;
    /// Initial cost followed by the cost after every accepted step.
    std::vector<double> cost_history;
    std::vector<StepRecord> steps;
    Termination termination = Termination::MaxIterations;
    std::string message;
    /// Report for the final control.
    PMPReport final_report;
    /// Trial table of the failed step, when termination is StepFailed.
    std::vector<TrialRecord> failed_trials;

    double final_cost() const { return cost_history.back(); }
    /// Columns iter, cost, tau_star, omega_star<a>, kappa, epsilon, accepted.
    void write_log(std::ostream& os) const;
};

const char* to_string(OptimizeResult::Termination t);

/// Iterates improve_step. A failed step ends the loop with termination
/// StepFailed and keeps the best control reached so far.
OptimizeResult solve(const Problem& problem, const ControlCurve& u0, const ImproveOptions& opts = {});

}  // namespace hopmp
