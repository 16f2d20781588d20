#pragma once

#include <algorithm>
#include <cmath>

namespace hopmp {

namespace detail {

template <class Objective>
double golden_max(Objective& along, double a, double b, double tol) {
    constexpr double r = 0.6180339887498949;
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = along(c);
    double fd = along(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = along(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = along(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

template <class Objective>
Maximum maximize_over(const ControlSet& set, Objective&& objective, const MaximizeOptions& opts) {
    Maximum best;
    if (set.kind == ControlSet::Kind::Points) {
        auto points = set.points;
        std::sort(points.begin(), points.end());
        bool first = true;
        for (const auto& w : points) {
            const double v = objective(std::span<const double>(w));
            if (first || v > best.value) {
                best.omega = w;
                best.value = v;
                first = false;
            }
        }
        return best;
    }

    const Box& box = set.box;
    const std::size_t m = box.dim();
    const int g = std::max(2, opts.grid_points);
    auto node = [&](std::size_t a, int j) {
        if (box.upper[a] == box.lower[a]) return box.lower[a];
        return j == g - 1 ? box.upper[a] : box.lower[a] + (box.upper[a] - box.lower[a]) * j / (g - 1);
    };
    auto points_on = [&](std::size_t a) { return box.upper[a] == box.lower[a] ? 1 : g; };

    std::vector<double> w(m);
    for (std::size_t a = 0; a < m; ++a) w[a] = box.lower[a];

    if (std::pow(static_cast<double>(g), static_cast<double>(m)) <= opts.tensor_budget) {
        std::vector<int> idx(m, 0);
        bool first = true;
        while (true) {
            for (std::size_t a = 0; a < m; ++a) w[a] = node(a, idx[a]);
            const double v = objective(std::span<const double>(w));
            if (first || v > best.value) {
                best.omega = w;
                best.value = v;
                first = false;
            }
            // Odometer with the last axis fastest keeps the visit order lexicographic.
            std::size_t a = m;
            while (a > 0) {
                --a;
                if (++idx[a] < points_on(a)) break;
                idx[a] = 0;
                if (a == 0) {
                    a = m + 1;
                    break;
                }
            }
            if (a == m + 1 || m == 0) break;
        }
    } else {
        best.omega = w;
        best.value = objective(std::span<const double>(w));
        for (int sweep = 0; sweep < 8; ++sweep) {
            bool moved = false;
            for (std::size_t a = 0; a < m; ++a) {
                std::vector<double> trial = best.omega;
                for (int j = 0; j < points_on(a); ++j) {
                    trial[a] = node(a, j);
                    const double v = objective(std::span<const double>(trial));
                    if (v > best.value) {
                        best.value = v;
                        best.omega = trial;
                        moved = true;
                    }
                }
            }
            if (!moved) break;
        }
    }

    for (int sweep = 0; sweep < (m > 1 ? 2 : 1); ++sweep) {
        for (std::size_t a = 0; a < m; ++a) {
            if (box.upper[a] == box.lower[a]) continue;
            const double cell = (box.upper[a] - box.lower[a]) / (g - 1);
            const double lo = std::max(box.lower[a], best.omega[a] - cell);
            const double hi = std::min(box.upper[a], best.omega[a] + cell);
            std::vector<double> trial = best.omega;
            auto along = [&](double x) {
                trial[a] = x;
                return objective(std::span<const double>(trial));
            };
            const double x = detail::golden_max(along, lo, hi, opts.refine_tolerance);
            trial[a] = x;
            const double v = objective(std::span<const double>(trial));
            if (v > best.value) {
                best.value = v;
                best.omega = trial;
            }
        }
    }
    return best;
}

}  // namespace hopmp
