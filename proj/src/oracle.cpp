#include "hopmp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "hopmp/errors.hpp"
#include "hopmp/parallel.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

namespace {

ForwardOptions doubled(ForwardOptions opts) {
    opts.grid *= 2;
    return opts;
}

std::vector<std::size_t> digits_of(std::size_t index, int pieces, std::size_t base) {
    std::vector<std::size_t> d(static_cast<std::size_t>(pieces));
    for (int j = pieces; j-- > 0;) {
        d[static_cast<std::size_t>(j)] = index % base;
        index /= base;
    }
    return d;
}

ControlCurve piecewise(double T, int m, int pieces, const std::vector<std::vector<double>>& levels,
                       const std::vector<std::size_t>& digits) {
    std::vector<ControlCurve::Segment> segs;
    segs.reserve(static_cast<std::size_t>(pieces));
    for (int j = 0; j < pieces; ++j)
        segs.push_back({T * j / pieces, Piece::constant(levels[digits[static_cast<std::size_t>(j)]])});
    return ControlCurve(T, m, std::move(segs));
}

}  // namespace

BruteForceResult brute_force(const Problem& problem, int pieces, const std::vector<std::vector<double>>& levels,
                             const ForwardOptions& forward, int workers, double budget) {
    if (pieces < 1) throw Error("brute force needs at least one piece");
    if (levels.empty()) throw Error("brute force needs at least one level");
    for (const auto& l : levels) {
        if (static_cast<int>(l.size()) != problem.control_dim() || !problem.control_set().contains(l))
            throw Error("brute-force level (" + join_doubles(l, ",") + ") is not in K");
    }
    const double count_d = std::pow(static_cast<double>(levels.size()), pieces);
    if (pieces * count_d > budget)
        throw BudgetExceeded("enumeration of " + format_double(count_d) + " candidates exceeds the budget");

    const std::size_t count = static_cast<std::size_t>(count_d);
    const double T = problem.horizon();
    const int m = problem.control_dim();
    const ForwardOptions fine = doubled(forward);

    BruteForceResult r;
    r.pieces = pieces;
    r.levels = levels;
    r.costs.assign(count, std::numeric_limits<double>::infinity());
    parallel_for(count, workers, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t c = begin; c < end; ++c) {
            try {
                r.costs[c] = cost_of(problem, piecewise(T, m, pieces, levels, digits_of(c, pieces, levels.size())), fine);
            } catch (const Error&) {
            }
        }
    });

    std::size_t best = 0;
    for (std::size_t c = 1; c < count; ++c)
        if (r.costs[c] < r.costs[best]) best = c;
    r.cost = r.costs[best];
    r.digits = digits_of(best, pieces, levels.size());
    r.control = piecewise(T, m, pieces, levels, r.digits);
    return r;
}

void BruteForceResult::write_csv(std::ostream& os) const {
    const std::size_t m = levels.front().size();
    os << "index";
    for (int j = 0; j < pieces; ++j)
        for (std::size_t a = 0; a < m; ++a) os << ",u" << j + 1 << '_' << a + 1;
    os << ",cost\n";
    for (std::size_t c = 0; c < costs.size(); ++c) {
        os << c;
        for (std::size_t d : digits_of(c, pieces, levels.size()))
            for (double v : levels[d]) os << ',' << format_double(v);
        os << ',' << format_double(costs[c]) << '\n';
    }
}

std::vector<GainSample> needle_gain_estimate(const Problem& problem, const ControlCurve& u, double tau,
                                             const std::vector<double>& omega, const std::vector<double>& epsilons,
                                             const ForwardOptions& forward) {
    const ForwardOptions fine = doubled(forward);
    const double c0 = cost_of(problem, u, fine);
    std::vector<GainSample> out;
    out.reserve(epsilons.size());
    for (double eps : epsilons) {
        NeedleParams np;
        np.tau = tau;
        np.omega = omega;
        np.epsilon = eps;
        const double c = cost_of(problem, needle(u, np), fine);
        out.push_back({eps, (c0 - c) / eps});
    }
    return out;
}

LipschitzResult lipschitz_check(const Problem& problem, const ControlCurve& u_base, int samples, std::uint64_t seed,
                                const ForwardOptions& forward, double max_dist_fraction) {
    const double T = problem.horizon();
    const int k = problem.order();
    const int n = problem.state_dim();
    const ForwardOptions fine = doubled(forward);
    const Trajectory base = integrate_forward(problem, u_base, fine);

    constexpr int kSamplePoints = 1000;
    std::vector<std::vector<double>> base_jets(kSamplePoints + 1);
    for (int j = 0; j <= kSamplePoints; ++j) base_jets[static_cast<std::size_t>(j)] = base.jets_at(T * j / kSamplePoints, k - 1);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const ControlSet& K = problem.control_set();

    LipschitzResult r;
    for (int s = 0; s < samples; ++s) {
        NeedleParams np;
        np.tau = T * (0.01 + 0.98 * unit(rng));
        const double cap = std::min({max_dist_fraction * T, 1.0, np.tau / 2.0, T - np.tau});
        np.epsilon = cap * (0.01 + 0.98 * unit(rng));
        if (K.kind == ControlSet::Kind::Points) {
            np.omega = K.points[std::min(K.points.size() - 1, static_cast<std::size_t>(unit(rng) * K.points.size()))];
        } else {
            np.omega.resize(K.box.dim());
            for (std::size_t a = 0; a < K.box.dim(); ++a)
                np.omega[a] = K.box.lower[a] + (K.box.upper[a] - K.box.lower[a]) * unit(rng);
        }
        const ControlCurve v = needle(u_base, np);
        const double d = dist(u_base, v);
        if (!(d > 0.0)) {
            ++r.skipped;
            continue;
        }
        const Trajectory other = integrate_forward(problem, v, fine);
        double diff = 0.0;
        for (int j = 0; j <= kSamplePoints; ++j) {
            const auto jets = other.jets_at(T * j / kSamplePoints, k - 1);
            const auto& ref = base_jets[static_cast<std::size_t>(j)];
            for (std::size_t c = 0; c < static_cast<std::size_t>(k * n); ++c) diff = std::max(diff, std::abs(jets[c] - ref[c]));
        }
        r.ratios.push_back(diff / d);
        r.distances.push_back(d);
    }

    if (!r.ratios.empty()) {
        r.max_ratio = *std::max_element(r.ratios.begin(), r.ratios.end());
        std::vector<double> sorted = r.ratios;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t h = sorted.size() / 2;
        r.median_ratio = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);

        std::vector<std::size_t> by_dist(r.ratios.size());
        for (std::size_t i = 0; i < by_dist.size(); ++i) by_dist[i] = i;
        std::sort(by_dist.begin(), by_dist.end(), [&](std::size_t a, std::size_t b) { return r.distances[a] < r.distances[b]; });
        const std::size_t third = by_dist.size() / 3;
        if (third > 0) {
            double near = 0.0;
            double far = 0.0;
            for (std::size_t i = 0; i < third; ++i) {
                near += r.ratios[by_dist[i]];
                far += r.ratios[by_dist[by_dist.size() - 1 - i]];
            }
            r.growth_suspected = near > 10.0 * far;
        }
    }
    return r;
}

}  // namespace hopmp
