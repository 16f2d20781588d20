#pragma once

// Independent baselines: exhaustive search over piecewise-constant controls,
// finite-difference needle gains, and an empirical Lipschitz study. All of
// them integrate at twice the requested grid resolution.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hopmp/control.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/problem.hpp"

namespace hopmp {

inline constexpr double kEnumerationBudget = 1e7;

struct BruteForceResult {
    ControlCurve control;
    double cost = 0.0;
    /// Level index per piece of the minimizer.
    std::vector<std::size_t> digits;
    int pieces = 0;
    std::vector<std::vector<double>> levels;
    /// Cost of every candidate, indexed with piece 0 as the most significant
    /// digit. Failed integrations are +inf.
    std::vector<double> costs;

    /// Columns index, u<piece>_<a>, cost.
    void write_csv(std::ostream& os) const;
};

/// Enumerates all |levels|^pieces controls constant on the pieces of a
/// uniform partition of [0, T]. Ties go to the smallest index. Throws
/// BudgetExceeded when pieces * |levels|^pieces exceeds `budget`.
BruteForceResult brute_force(const Problem& problem, int pieces, const std::vector<std::vector<double>>& levels,
                             const ForwardOptions& forward = {}, int workers = 1,
                             double budget = kEnumerationBudget);

struct GainSample {
    double epsilon = 0.0;
    /// (C(u) - C(u_eps)) / eps.
    double gain = 0.0;
};

std::vector<GainSample> needle_gain_estimate(const Problem& problem, const ControlCurve& u, double tau,
                                             const std::vector<double>& omega, const std::vector<double>& epsilons,
                                             const ForwardOptions& forward = {});

struct LipschitzResult {
    std::vector<double> ratios;
    std::vector<double> distances;
    double max_ratio = 0.0;
    double median_ratio = 0.0;
    int skipped = 0;
    /// Set when the ratios of the closest third of perturbations exceed ten
    /// times those of the farthest third.
    bool growth_suspected = false;
};

/// Random needles around u_base with dist <= max_dist_fraction * T; the ratio
/// is max |x_(s)(t) - x'_(s)(t)| over s < k and 1001 uniform sample times,
/// divided by dist(u, u'). Zero-distance perturbations are skipped.
LipschitzResult lipschitz_check(const Problem& problem, const ControlCurve& u_base, int samples, std::uint64_t seed,
                                const ForwardOptions& forward = {}, double max_dist_fraction = 0.1);

}  // namespace hopmp
