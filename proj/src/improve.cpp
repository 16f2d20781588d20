#include "hopmp/improve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "hopmp/text.hpp"

namespace hopmp {

namespace {

// Running integral of H_t(omega) - H_t(u(t)) over the trajectory grid, using
// the interval's own control piece at both ends of every interval.
class GainIntegral {
public:
    GainIntegral(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj,
                 const std::vector<double>& omega)
        : traj_(traj), prefix_(traj.node_count(), 0.0) {
        const auto& t = traj.times();
        const auto& u = traj.control();
        const int m = problem.control_dim();
        HamiltonianEvaluator h(problem);
        std::vector<double> uv(static_cast<std::size_t>(m));
        auto delta = [&](std::size_t node, std::size_t segment) {
            h.set_node(traj, adj, node);
            u.eval_in_piece(segment, t[node], 0, uv);
            return h(omega) - h(uv);
        };
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
            const std::size_t seg = traj.segment_of(i);
            const double dl = delta(i, seg);
            const double dr = delta(i + 1, seg);
            prefix_[i + 1] = prefix_[i] + 0.5 * (t[i + 1] - t[i]) * (dl + dr);
        }
    }

    double at(double s) const {
        const auto& t = traj_.times();
        const std::size_t j = traj_.interval_at(s);
        const double w = (s - t[j]) / (t[j + 1] - t[j]);
        return prefix_[j] + w * (prefix_[j + 1] - prefix_[j]);
    }

    /// First-order cost drop of the needle [tau - eps, tau).
    double gain(double tau, double eps) const { return at(tau) - at(tau - eps); }

private:
    const Trajectory& traj_;
    std::vector<double> prefix_;
};

double max_width(const ImproveOptions& opts, double T, double tau) {
    return std::min({opts.width_fraction * T, tau / 4.0, 0.999 * (T - tau), 0.999});
}

std::vector<double> width_ladder(const ImproveOptions& opts, double eps_max, double tau,
                                 const std::vector<double>& breakpoints) {
    std::vector<double> out;
    double e = eps_max;
    for (int i = 0; i < opts.max_trials && e > 0.0; ++i, e *= opts.shrink) out.push_back(e);
    for (double b : breakpoints) {
        if (!(b > tau - eps_max && b < tau)) continue;
        // tau - (tau - b) can miss b by an ulp, which would leave a sliver.
        double w = tau - b;
        for (int i = 0; i < 4 && tau - w != b; ++i) w = tau - w > b ? std::nextafter(w, 2.0 * w) : std::nextafter(w, 0.0);
        out.push_back(w);
    }
    return out;
}

// Value of u just before tau (the piece ending at tau when tau is a breakpoint).
std::vector<double> left_value(const ControlCurve& u, double tau) {
    std::size_t seg = u.locate(tau);
    if (seg > 0 && u.start(seg) == tau) --seg;
    std::vector<double> v(static_cast<std::size_t>(u.control_dim()));
    u.eval_in_piece(seg, tau, 0, v);
    return v;
}

ControlCurve modified(const Problem& problem, const ControlCurve& u, double tau, const std::vector<double>& omega,
                      double eps, const ImproveOptions& opts) {
    NeedleParams np;
    np.tau = tau;
    np.omega = omega;
    np.epsilon = eps;
    if (!opts.smoothing) return needle(u, np);
    np.smoothing = std::min(opts.smoothing_cap, eps);
    return smooth_needle(u, np, problem.order());
}

}  // namespace

StepOutcome improve_step(const Problem& problem, const ControlCurve& u, const ImproveOptions& opts) {
    const double T = problem.horizon();
    StepOutcome out;
    const Trajectory traj = integrate_forward(problem, u, opts.forward);
    const double c0 = terminal_cost(problem, traj);
    const AdjointTrajectory adj = integrate_adjoint(problem, traj, opts.convention);
    out.report = pmp_report(problem, traj, adj, default_tau_grid(u, opts.tau_points, opts.min_piece_fraction),
                            opts.tolerance, opts.workers, opts.maximize);
    out.cost = c0;
    out.control = u;
    out.record.cost_before = c0;
    out.record.cost_after = c0;
    if (out.report.satisfied) {
        out.converged = true;
        if (out.report.has_admissible) {
            out.record.tau = out.report.tau[out.report.worst];
            out.record.omega = out.report.omega_star[out.report.worst];
            out.record.kappa = out.report.kappa[out.report.worst];
        }
        return out;
    }

    const PMPReport& rep = out.report;
    const auto breakpoints = u.breakpoints();

    // Ceilings: distinct maximizers at violating times, largest kappa first.
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < rep.tau.size(); ++j)
        if (rep.admissible[j] && rep.kappa[j] > opts.tolerance) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rep.kappa[a] > rep.kappa[b]; });
    std::vector<std::vector<double>> ceilings;
    for (std::size_t j : order) {
        if (static_cast<int>(ceilings.size()) >= opts.max_ceilings) break;
        if (std::find(ceilings.begin(), ceilings.end(), rep.omega_star[j]) == ceilings.end())
            ceilings.push_back(rep.omega_star[j]);
    }

    std::vector<double> peaks;
    for (std::size_t j = 0; j < rep.tau.size(); ++j)
        if (rep.admissible[j]) peaks.push_back(rep.tau[j]);
    for (double b : breakpoints) peaks.push_back(b);
    std::sort(peaks.begin(), peaks.end());
    peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());

    double best_gain = 0.0;
    double tau_star = rep.tau[rep.worst];
    double eps_star = max_width(opts, T, tau_star);
    std::vector<double> omega_star = rep.omega_star[rep.worst];
    for (const auto& omega : ceilings) {
        const GainIntegral gain(problem, traj, adj, omega);
        for (double tau : peaks) {
            const double eps_max = max_width(opts, T, tau);
            if (!(eps_max > 0.0)) continue;
            for (double eps : width_ladder(opts, eps_max, tau, breakpoints)) {
                const double g = gain.gain(tau, eps);
                if (g > best_gain) {
                    best_gain = g;
                    tau_star = tau;
                    eps_star = eps;
                    omega_star = omega;
                }
            }
        }
    }

    StepRecord& rec = out.record;
    rec.tau = tau_star;
    rec.omega = omega_star;
    {
        HamiltonianEvaluator h(problem);
        h.set_time(traj, adj, tau_star);
        rec.kappa = h(omega_star) - h(left_value(u, tau_star));
    }
    rec.predicted = best_gain;
    const GainIntegral gain(problem, traj, adj, omega_star);

    std::optional<std::size_t> best_trial;
    std::vector<ControlCurve> candidates;
    double eps = eps_star;
    for (int i = 0; i < opts.max_trials; ++i, eps *= opts.shrink) {
        TrialRecord trial;
        trial.epsilon = eps;
        const double predicted = best_gain > 0.0 ? gain.gain(tau_star, eps) : eps * rec.kappa;
        trial.required = opts.theta * std::max(predicted, 0.0);
        ControlCurve v;
        try {
            v = modified(problem, u, tau_star, omega_star, eps, opts);
            trial.cost = cost_of(problem, v, opts.forward);
        } catch (const Error&) {
            trial.cost = std::numeric_limits<double>::quiet_NaN();
        }
        trial.drop = c0 - trial.cost;
        rec.trials.push_back(trial);
        candidates.push_back(std::move(v));
        if (std::isfinite(trial.cost) && trial.drop > 0.0) {
            if (!best_trial || trial.drop > rec.trials[*best_trial].drop) best_trial = rec.trials.size() - 1;
            if (trial.drop >= trial.required) {
                best_trial = rec.trials.size() - 1;
                break;
            }
        }
    }

    if (!best_trial)
        throw StepFailed("no width in the line search lowers the cost at tau=" + format_double(tau_star), rec.trials);

    const TrialRecord& chosen = rec.trials[*best_trial];
    rec.epsilon = chosen.epsilon;
    rec.cost_after = chosen.cost;
    rec.accepted = true;
    out.control = std::move(candidates[*best_trial]);
    out.cost = chosen.cost;
    return out;
}

const char* to_string(OptimizeResult::Termination t) {
    switch (t) {
        case OptimizeResult::Termination::Converged: return "converged";
        case OptimizeResult::Termination::MaxIterations: return "max_iterations";
        case OptimizeResult::Termination::StepFailed: return "step_failed";
    }
    return "unknown";
}

OptimizeResult solve(const Problem& problem, const ControlCurve& u0, const ImproveOptions& opts) {
    OptimizeResult res;
    res.control = u0;
    bool have_report = false;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        StepOutcome step;
        try {
            step = improve_step(problem, res.control, opts);
        } catch (const StepFailed& e) {
            res.termination = OptimizeResult::Termination::StepFailed;
            res.message = e.what();
            res.failed_trials = e.trials();
            break;
        }
        if (res.cost_history.empty()) res.cost_history.push_back(step.record.cost_before);
        if (step.converged) {
            res.termination = OptimizeResult::Termination::Converged;
            res.final_report = std::move(step.report);
            have_report = true;
            res.message = "sup residual " + format_double(res.final_report.sup_residual) + " within tolerance";
            break;
        }
        step.record.iteration = iter + 1;
        res.cost_history.push_back(step.cost);
        res.steps.push_back(std::move(step.record));
        res.control = std::move(step.control);
        if (iter + 1 == opts.max_iterations) res.message = "iteration limit reached";
    }

    if (!have_report) {
        const Trajectory traj = integrate_forward(problem, res.control, opts.forward);
        const AdjointTrajectory adj = integrate_adjoint(problem, traj, opts.convention);
        const auto grid = default_tau_grid(res.control, opts.tau_points, opts.min_piece_fraction);
        res.final_report = pmp_report(problem, traj, adj, grid, opts.tolerance, opts.workers, opts.maximize);
        if (res.cost_history.empty()) res.cost_history.push_back(terminal_cost(problem, traj));
    }
    return res;
}

void OptimizeResult::write_log(std::ostream& os) const {
    const std::size_t m = static_cast<std::size_t>(control.control_dim());
    os << "iter,cost,tau_star";
    for (std::size_t a = 0; a < m; ++a) os << ",omega_star" << a + 1;
    os << ",kappa,epsilon,accepted\n";
    os << 0 << ',' << format_double(cost_history.front());
    for (std::size_t a = 0; a < m + 3; ++a) os << ',';
    os << "0\n";
    for (const auto& s : steps) {
        os << s.iteration << ',' << format_double(s.cost_after) << ',' << format_double(s.tau);
        for (double w : s.omega) os << ',' << format_double(w);
        os << ',' << format_double(s.kappa) << ',' << format_double(s.epsilon) << ',' << (s.accepted ? 1 : 0) << '\n';
    }
}

}  // namespace hopmp
