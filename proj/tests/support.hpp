#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hopmp/control.hpp"
#include "hopmp/expr.hpp"
#include "hopmp/problem.hpp"
#include "hopmp/specfile.hpp"

#ifndef HOPMP_SOURCE_DIR
#define HOPMP_SOURCE_DIR "."
#endif

namespace testing {

inline std::string benchmark_path(const std::string& name) {
    return std::string(HOPMP_SOURCE_DIR) + "/benchmarks/" + name + ".spec";
}

inline const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names{"linear_k1",         "decay_k1",  "sine_k1",
                                                "double_integrator", "damped_k2", "triple_integrator"};
    return names;
}

/// Scalar problem (n = m = 1) with K = [lo, hi] unless points are given.
inline hopmp::Problem scalar_problem(int k, const std::string& f, const std::string& cost, double T,
                                     std::vector<double> init, double lo = -1.0, double hi = 1.0) {
    hopmp::ProblemDefinition d;
    d.order = k;
    d.horizon = T;
    const auto schema = hopmp::Schema::jets(k, 1, 1);
    d.dynamics = {hopmp::parse(f, schema)};
    d.cost = hopmp::parse(cost, schema);
    d.control_set = hopmp::ControlSet::from_box({lo}, {hi});
    d.initial = std::move(init);
    return hopmp::Problem(std::move(d));
}

inline hopmp::Problem double_integrator() { return scalar_problem(2, "u1", "x1_0", 1.0, {0, 0}); }

inline hopmp::ControlCurve constant(double T, double v) { return hopmp::ControlCurve::constant(T, {v}); }

inline bool close(double a, double b, double rel, double abs = 0.0) {
    return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

/// Random well-conditioned expressions over the given variable names: every
/// denominator, log and sqrt argument is bounded away from zero.
class ExprGenerator {
public:
    ExprGenerator(std::vector<std::string> vars, std::uint64_t seed) : vars_(std::move(vars)), rng_(seed) {}

    std::string text(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
        switch (pick(rng_)) {
            case 0: return number();
            case 1: return var();
            case 2: return "(" + text(depth - 1) + " + " + text(depth - 1) + ")";
            case 3: return "(" + text(depth - 1) + " - " + text(depth - 1) + ")";
            case 4: return "(" + text(depth - 1) + " * " + text(depth - 1) + ")";
            case 5: return "(" + text(depth - 1) + " / (1.5 + " + var() + "^2))";
            case 6: return "sin(" + text(depth - 1) + ")";
            case 7: return "cos(" + text(depth - 1) + ")";
            case 8: return "exp(0.3*" + var() + ")";
            case 9: return "log(2 + " + var() + "^2)";
            case 10: return "sqrt(1 + " + var() + "^2)";
            default: return "(" + text(depth - 1) + ")^" + std::to_string(2 + static_cast<int>(rng_() % 2));
        }
    }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::mt19937_64& rng() { return rng_; }

private:
    // Constants in [0.1, 1.9]: larger ones nest into curvatures that a
    // central difference at step 1e-5 cannot resolve to 1e-6.
    std::string number() {
        std::uniform_int_distribution<int> lead(0, 1), d(1, 9);
        return std::to_string(lead(rng_)) + "." + std::to_string(d(rng_));
    }
    std::string var() { return vars_[rng_() % vars_.size()]; }

    std::vector<std::string> vars_;
    std::mt19937_64 rng_;
};

}  // namespace testing
