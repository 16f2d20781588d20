#include "hopmp/pontryagin.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hopmp/errors.hpp"
#include "hopmp/parallel.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

HamiltonianEvaluator::HamiltonianEvaluator(const Problem& problem)
    : problem_(&problem), slots_(problem.slot_count(), 0.0) {}

void HamiltonianEvaluator::set_time(const Trajectory& traj, const AdjointTrajectory& adj, double t) {
    const int k = problem_->order();
    const int n = problem_->state_dim();
    const auto x = traj.jets_at(t, k - 1);
    const auto p = adj.jets_at(t, 0);
    slots_[0] = t;
    for (int s = 0; s < k; ++s)
        for (int i = 0; i < n; ++i) slots_[problem_->x_slot(s, i)] = x[static_cast<std::size_t>(s * n + i)];
    for (int i = 0; i < n; ++i) slots_[problem_->p_slot(0, i)] = p[static_cast<std::size_t>(i)];
}

void HamiltonianEvaluator::set_node(const Trajectory& traj, const AdjointTrajectory& adj, std::size_t node) {
    const int k = problem_->order();
    const int n = problem_->state_dim();
    const auto x = traj.jets(node);
    slots_[0] = traj.times()[node];
    for (int s = 0; s < k; ++s)
        for (int i = 0; i < n; ++i) slots_[problem_->x_slot(s, i)] = x[static_cast<std::size_t>(s * n + i)];
    for (int i = 0; i < n; ++i) slots_[problem_->p_slot(0, i)] = adj.p(node, 0, i);
}

double HamiltonianEvaluator::operator()(std::span<const double> omega) {
    for (int a = 0; a < problem_->control_dim(); ++a) slots_[problem_->u_slot(0, a)] = omega[static_cast<std::size_t>(a)];
    double h = 0.0;
    for (int j = 0; j < problem_->state_dim(); ++j) h += slots_[problem_->p_slot(0, j)] * problem_->f(j)(slots_);
    return h;
}

double hamiltonian(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                   std::span<const double> omega) {
    HamiltonianEvaluator h(problem);
    h.set_time(traj, adj, tau);
    return h(omega);
}

double pfunction(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                 std::span<const double> omega) {
    const int k = problem.order();
    const int n = problem.state_dim();
    Jet state(tau, n, k);
    const auto low = traj.jets_at(tau, k - 1);
    std::copy(low.begin(), low.end(), state.values.begin());

    std::vector<double> slots(problem.slot_count(), 0.0);
    slots[0] = tau;
    for (std::size_t c = 0; c < low.size(); ++c) slots[1 + c] = low[c];
    const auto u = traj.control().eval(tau, 0);
    for (int a = 0; a < problem.control_dim(); ++a) slots[problem.u_slot(0, a)] = u[static_cast<std::size_t>(a)];
    for (int i = 0; i < n; ++i) state.level(k)[static_cast<std::size_t>(i)] = problem.f(i)(slots);

    Jet costate(tau, n, 0);
    costate.values = adj.jets_at(tau, 0);
    return -pontryagin_lagrangian(problem, state, costate, omega);
}

Maximum maximize(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                 const MaximizeOptions& opts) {
    HamiltonianEvaluator h(problem);
    h.set_time(traj, adj, tau);
    return maximize_over(problem.control_set(), h, opts);
}

std::vector<double> default_tau_grid(const ControlCurve& u, int uniform_points, double min_piece_fraction) {
    const double T = u.horizon();
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(uniform_points) + u.size());
    for (int j = 1; j <= uniform_points; ++j) grid.push_back(T * j / (uniform_points + 1));
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u.end(i) - u.start(i) >= min_piece_fraction * T) grid.push_back(0.5 * (u.start(i) + u.end(i)));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

bool admissible_time(const Problem& problem, const ControlCurve& u, double tau) {
    const double T = problem.horizon();
    if (!(tau > 0.0 && tau < T)) return false;
    if (problem.order() == 1) return true;
    for (double b : u.breakpoints())
        if (std::abs(tau - b) <= 1e-12 * T) return false;
    return true;
}

PMPReport pmp_report(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj,
                     const std::vector<double>& tau_grid, double tolerance, int workers,
                     const MaximizeOptions& opts) {
    const std::size_t count = tau_grid.size();
    PMPReport r;
    r.tau = tau_grid;
    r.h_at_u.resize(count);
    r.h_max.resize(count);
    r.omega_star.resize(count);
    r.kappa.resize(count);
    r.admissible.resize(count);
    r.tolerance = tolerance;

    std::vector<char> admissible(count);
    parallel_for(count, workers, [&](std::size_t begin, std::size_t end, int) {
        HamiltonianEvaluator h(problem);
        for (std::size_t j = begin; j < end; ++j) {
            const double tau = tau_grid[j];
            h.set_time(traj, adj, tau);
            const auto u = traj.control().eval(tau, 0);
            r.h_at_u[j] = h(u);
            auto best = maximize_over(problem.control_set(), h, opts);
            r.h_max[j] = best.value;
            r.omega_star[j] = std::move(best.omega);
            r.kappa[j] = r.h_max[j] - r.h_at_u[j];
            admissible[j] = admissible_time(problem, traj.control(), tau) ? 1 : 0;
        }
    });

    for (std::size_t j = 0; j < count; ++j) {
        r.admissible[j] = admissible[j] != 0;
        if (!r.admissible[j]) continue;
        if (!r.has_admissible || r.kappa[j] > r.kappa[r.worst]) r.worst = j;
        r.has_admissible = true;
    }
    r.sup_residual = r.has_admissible ? std::max(0.0, r.kappa[r.worst]) : 0.0;
    r.satisfied = r.sup_residual <= tolerance;
    return r;
}

void PMPReport::write_csv(std::ostream& os) const {
    const std::size_t m = omega_star.empty() ? 0 : omega_star.front().size();
    os << "tau,H_at_u,H_max";
    for (std::size_t a = 0; a < m; ++a) os << ",omega_star" << a + 1;
    os << ",kappa,admissible\n";
    for (std::size_t j = 0; j < tau.size(); ++j) {
        os << format_double(tau[j]) << ',' << format_double(h_at_u[j]) << ',' << format_double(h_max[j]);
        for (double w : omega_star[j]) os << ',' << format_double(w);
        os << ',' << format_double(kappa[j]) << ',' << (admissible[j] ? 1 : 0) << '\n';
    }
}

double v_epsilon(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                 double epsilon) {
    if (!(epsilon > 0.0 && epsilon < tau)) throw InvalidWidth("v_epsilon needs 0 < epsilon < tau");
    const double a = tau - epsilon;
    const auto& t = traj.times();
    const auto& u = traj.control();
    const auto u_tau = u.eval(tau, 0);

    HamiltonianEvaluator h(problem);
    auto integrand = [&](double s, bool at_node, std::size_t node) {
        if (at_node)
            h.set_node(traj, adj, node);
        else
            h.set_time(traj, adj, s);
        return h(u_tau) - h(u.eval(s, 0));
    };

    std::vector<double> xs{a};
    std::vector<double> ys{integrand(a, false, 0)};
    const auto first = std::upper_bound(t.begin(), t.end(), a);
    for (auto it = first; it != t.end() && *it < tau; ++it) {
        xs.push_back(*it);
        ys.push_back(integrand(*it, true, static_cast<std::size_t>(it - t.begin())));
    }
    xs.push_back(tau);
    ys.push_back(integrand(tau, false, 0));

    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) sum += 0.5 * (xs[j + 1] - xs[j]) * (ys[j] + ys[j + 1]);
    return sum / epsilon;
}

}  // namespace hopmp
