#pragma once

// Pontryagin function H(omega) = p . f(tau, x-jets, omega), its maximization
// over K, and the residual report max H - H(u(tau)) over a grid of times.

#include <iosfwd>
#include <span>
#include <vector>

#include "hopmp/adjoint.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/problem.hpp"

namespace hopmp {

/// Holds the slot vector of one time instant so H can be evaluated for many
/// omega without re-interpolating. Not thread-safe; use one per worker.
class HamiltonianEvaluator {
public:
    explicit HamiltonianEvaluator(const Problem& problem);

    /// Jets interpolated at t (exact at nodes).
    void set_time(const Trajectory& traj, const AdjointTrajectory& adj, double t);
    /// Jets of a grid node.
    void set_node(const Trajectory& traj, const AdjointTrajectory& adj, std::size_t node);

    double time() const noexcept { return slots_[0]; }
    double operator()(std::span<const double> omega);

private:
    const Problem* problem_;
    std::vector<double> slots_;
};

double hamiltonian(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                   std::span<const double> omega);

/// -L at the trajectory's order-k jet: H(omega) - p . x_(k)(tau), where
/// x_(k)(tau) = f(tau, x-jets, u(tau)).
double pfunction(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                 std::span<const double> omega);

struct Maximum {
    std::vector<double> omega;
    double value = 0.0;
};

struct MaximizeOptions {
    int grid_points = 33;
    double refine_tolerance = 1e-10;
    /// Above this many tensor-grid points, axes are searched one at a time.
    double tensor_budget = 1e5;
};

/// Maximizes an arbitrary objective over K. Finite K: enumeration. Box: grid
/// search then golden-section refinement within one cell of the best grid
/// point along each axis. Ties go to the lexicographically smallest omega.
template <class Objective>
Maximum maximize_over(const ControlSet& set, Objective&& objective, const MaximizeOptions& opts = {});

Maximum maximize(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                 const MaximizeOptions& opts = {});

struct PMPReport {
    std::vector<double> tau;
    std::vector<double> h_at_u;
    std::vector<double> h_max;
    std::vector<std::vector<double>> omega_star;
    std::vector<double> kappa;
    std::vector<bool> admissible;
    double tolerance = 0.0;
    /// Largest kappa over admissible times (0 if none).
    double sup_residual = 0.0;
    bool satisfied = true;
    /// Admissible index with the largest kappa, smallest tau among ties.
    std::size_t worst = 0;
    bool has_admissible = false;

    void write_csv(std::ostream& os) const;
};

/// `uniform_points` uniform interior times j*T/(uniform_points+1) plus the
/// midpoint of every control piece at least min_piece_fraction*T long, sorted
/// and deduplicated.
std::vector<double> default_tau_grid(const ControlCurve& u, int uniform_points = 512,
                                     double min_piece_fraction = 1e-4);

/// True unless k >= 2 and tau lies within 1e-12*T of a control breakpoint, or
/// tau is outside (0, T).
bool admissible_time(const Problem& problem, const ControlCurve& u, double tau);

PMPReport pmp_report(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj,
                     const std::vector<double>& tau_grid, double tolerance, int workers = 1,
                     const MaximizeOptions& opts = {});

/// (1/eps) * integral over [tau - eps, tau] of H_t(u(tau)) - H_t(u(t)),
/// trapezoid on the grid nodes inside the window and interpolated ends.
double v_epsilon(const Problem& problem, const Trajectory& traj, const AdjointTrajectory& adj, double tau,
                 double epsilon);

}  // namespace hopmp

#include "hopmp/detail/maximize.ipp"
