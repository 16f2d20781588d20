#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "hopmp/adjoint.hpp"
#include "hopmp/errors.hpp"
#include "support.hpp"

using namespace hopmp;

namespace {

// Frozen values from tests/oracles/derive_values.py (independent mpmath solve).
constexpr double kDampedP0 = 0.25376677970873922;
constexpr double kDampedP2 = -0.58500021359668361;

double sup_deviation(const AdjointTrajectory& adj, const std::function<double(double)>& exact) {
    double worst = 0.0;
    for (std::size_t i = 0; i < adj.node_count(); ++i)
        worst = std::max(worst, std::abs(adj.p(i, 0, 0) - exact(adj.times()[i])));
    return worst;
}

}  // namespace

TEST_SUITE("adjoint") {

TEST_CASE("terminal jets") {
    const auto k1 = testing::scalar_problem(1, "u1", "x1_0", 1.0, {0.0});
    const auto t1 = integrate_forward(k1, testing::constant(1.0, 0.0));
    CHECK(terminal_jet(k1, t1) == std::vector<double>{-1.0});
    CHECK(terminal_jet(k1, t1, TerminalConvention::AsPrinted) == std::vector<double>{1.0});

    const auto di = testing::double_integrator();
    const auto t2 = integrate_forward(di, testing::constant(1.0, 0.3));
    CHECK(terminal_jet(di, t2) == std::vector<double>{0.0, 1.0});

    for (auto conv : {TerminalConvention::Derived, TerminalConvention::AsPrinted}) {
        const auto flat = testing::scalar_problem(2, "-x1_0 + u1", "2", 1.0, {1.0, 0.0});
        const auto tf = integrate_forward(flat, testing::constant(1.0, 0.3));
        CHECK(terminal_jet(flat, tf, conv) == std::vector<double>{0.0, 0.0});
    }
}

TEST_CASE("terminal jets need a trajectory of the same problem") {
    const auto di = testing::double_integrator();
    const auto k1 = testing::scalar_problem(1, "u1", "x1_0", 1.0, {0.0});
    const auto t1 = integrate_forward(k1, testing::constant(1.0, 0.0));
    CHECK_THROWS_AS(terminal_jet(di, t1), MissingJets);
    CHECK_THROWS_AS(integrate_adjoint(di, t1), MissingJets);
}

TEST_CASE("closed-form co-states") {
    {
        const auto di = testing::double_integrator();
        for (double c : {-1.0, 0.0, 0.6}) {
            const auto traj = integrate_forward(di, parse_control_descriptor("poly:" + std::to_string(c) + ",0.2", 1.0, 1));
            const auto adj = integrate_adjoint(di, traj);
            CHECK(sup_deviation(adj, [](double t) { return t - 1.0; }) <= 1e-8);
        }
    }
    {
        const auto p = testing::scalar_problem(1, "u1", "x1_0", 1.0, {0.0});
        const auto adj = integrate_adjoint(p, integrate_forward(p, testing::constant(1.0, 0.4)));
        for (std::size_t i = 0; i < adj.node_count(); ++i) CHECK(adj.p(i, 0, 0) == -1.0);
    }
    {
        const auto p = testing::scalar_problem(1, "-x1_0+u1", "x1_0", 1.0, {1.0});
        const auto adj = integrate_adjoint(p, integrate_forward(p, testing::constant(1.0, 0.4)));
        CHECK(sup_deviation(adj, [](double t) { return -std::exp(t - 1.0); }) <= 1e-8);
    }
    {
        const auto spec = parse_spec(testing::benchmark_path("damped_k2"));
        const auto traj = integrate_forward(spec.problem, spec.control0, spec.numerics.forward);
        const auto adj = integrate_adjoint(spec.problem, traj);
        CHECK(adj.p(0, 0, 0) == doctest::Approx(kDampedP0).epsilon(1e-9));
        CHECK(adj.jets_at(2.0)[0] == doctest::Approx(kDampedP2).epsilon(1e-9));
    }
}

TEST_CASE("reduced co-state") {
    const auto di = testing::double_integrator();
    const auto traj = integrate_forward(di, testing::constant(1.0, 0.5));
    const auto r = reduced_adjoint(di, traj);
    for (std::size_t i = 0; i < r.times().size(); i += 31) {
        CHECK(r.q(i, 0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(r.q(i, 1, 0) == doctest::Approx(r.times()[i] - 1.0).epsilon(1e-10).scale(1.0));
    }
    const auto adj = integrate_adjoint(di, traj);
    CHECK(crosscheck(adj, r) <= 1e-8);

    const auto flat = testing::scalar_problem(2, "-x1_0 + u1", "7", 1.0, {1.0, 0.0});
    const auto tf = integrate_forward(flat, testing::constant(1.0, 0.5));
    const auto rf = reduced_adjoint(flat, tf);
    for (std::size_t i = 0; i < rf.times().size(); ++i) {
        CHECK(rf.q(i, 0, 0) == 0.0);
        CHECK(rf.q(i, 1, 0) == 0.0);
    }
    CHECK(crosscheck(integrate_adjoint(flat, tf), rf) == 0.0);
}

TEST_CASE("first-order co-state equals the reduced co-state") {
    for (const auto& name : testing::benchmark_names()) {
        const auto spec = parse_spec(testing::benchmark_path(name));
        if (spec.problem.order() != 1) continue;
        const auto u = parse_control_descriptor("expr:0.7*sin(5*t)", spec.problem.horizon(), 1);
        const auto traj = integrate_forward(spec.problem, u, spec.numerics.forward);
        CHECK_MESSAGE(crosscheck(integrate_adjoint(spec.problem, traj), reduced_adjoint(spec.problem, traj)) <= 1e-10,
                      name);
    }
}

TEST_CASE("crosscheck on every benchmark") {
    for (const auto& name : testing::benchmark_names()) {
        const auto spec = parse_spec(testing::benchmark_path(name));
        const auto u = parse_control_descriptor("expr:0.5*sin(t)", spec.problem.horizon(), 1);
        const auto traj = integrate_forward(spec.problem, u, spec.numerics.forward);
        const double dev = crosscheck(integrate_adjoint(spec.problem, traj), reduced_adjoint(spec.problem, traj));
        CHECK_MESSAGE(dev <= 1e-6, name << " deviation " << dev);
    }
}

TEST_CASE("mismatched grids are rejected") {
    const auto di = testing::double_integrator();
    ForwardOptions a, b;
    a.grid = 64;
    b.grid = 128;
    const auto ta = integrate_forward(di, testing::constant(1.0, 0.0), a);
    const auto tb = integrate_forward(di, testing::constant(1.0, 0.0), b);
    CHECK_THROWS_AS(crosscheck(integrate_adjoint(di, ta), reduced_adjoint(di, tb)), GridMismatch);
}

TEST_CASE("scaling the cost scales the co-state") {
    const std::string f = "-sin(x1_0) - 0.3*x1_1*x1_2 + u1";
    const std::string c = "x1_0^2 + sin(x1_1) - x1_2";
    const auto base = testing::scalar_problem(3, f, c, 1.0, {0.2, 0.1, -0.3});
    const auto scaled = testing::scalar_problem(3, f, "4*(" + c + ")", 1.0, {0.2, 0.1, -0.3});
    const auto u = parse_control_descriptor("expr:0.5*cos(t)", 1.0, 1);
    const auto tb = integrate_forward(base, u);
    const auto ts = integrate_forward(scaled, u);
    const auto ab = integrate_adjoint(base, tb);
    const auto as = integrate_adjoint(scaled, ts);
    REQUIRE(ab.node_count() == as.node_count());
    for (std::size_t i = 0; i < ab.node_count(); ++i)
        for (int s = 0; s < 3; ++s) CHECK(as.p(i, s, 0) == 4.0 * ab.p(i, s, 0));
}

TEST_CASE("terminal node holds the terminal jet") {
    const auto p = testing::scalar_problem(2, "-x1_0 - 0.5*x1_1 + u1*x1_0", "x1_0*x1_1", 1.0, {1.0, 0.0});
    const auto traj = integrate_forward(p, testing::constant(1.0, 0.5));
    const auto adj = integrate_adjoint(p, traj);
    const auto tj = terminal_jet(p, traj);
    const auto last = adj.jets(adj.node_count() - 1);
    CHECK(std::vector<double>(last.begin(), last.end()) == tj);
    CHECK(adj.convention() == TerminalConvention::Derived);
}

TEST_CASE("co-state CSV") {
    const auto di = testing::double_integrator();
    ForwardOptions small;
    small.grid = 4;
    const auto traj = integrate_forward(di, testing::constant(1.0, 0.0), small);
    const auto adj = integrate_adjoint(di, traj);
    const auto red = reduced_adjoint(di, traj);
    std::ostringstream a, b;
    write_csv(a, adj);
    write_csv(b, adj, &red);
    CHECK(a.str().substr(0, a.str().find('\n')) == "t,p1_0,p1_1");
    CHECK(b.str().substr(0, b.str().find('\n')) == "t,p1_0,p1_1,q0_1,q1_1");
}

}  // TEST_SUITE
