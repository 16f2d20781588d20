#include <doctest.h>

#include <algorithm>

#include "hopmp/errors.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/problem.hpp"
#include "support.hpp"

using namespace hopmp;

namespace {

ProblemDefinition scalar_definition(int k, const std::string& f, const std::string& cost) {
    ProblemDefinition d;
    d.order = k;
    const auto s = Schema::jets(k, 1, 1);
    d.dynamics = {parse(f, s)};
    d.cost = parse(cost, s);
    d.control_set = ControlSet::from_box({-1.0}, {1.0});
    d.initial.assign(static_cast<std::size_t>(k), 0.0);
    return d;
}

bool mentions(const ValidationReport& r, const std::string& word) {
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const std::string& v) { return v.find(word) != std::string::npos; });
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("validation") {
    CHECK(validate(scalar_definition(2, "u1", "x1_0")).ok());

    const auto costate = validate(scalar_definition(2, "p1_0*u1", "x1_0"));
    CHECK_FALSE(costate.ok());
    CHECK(mentions(costate, "co-state"));

    const auto control_cost = validate(scalar_definition(2, "u1", "u1"));
    CHECK_FALSE(control_cost.ok());
    CHECK(mentions(control_cost, "control"));

    CHECK_FALSE(validate(scalar_definition(2, "x1_2", "x1_0")).ok());
    CHECK_FALSE(validate(scalar_definition(2, "u1", "x1_2")).ok());
    CHECK_FALSE(validate(scalar_definition(2, "u1_1", "x1_0")).ok());

    auto empty = scalar_definition(1, "u1", "x1_0");
    empty.control_set = ControlSet::from_points({});
    CHECK_FALSE(validate(empty).ok());

    auto inverted = scalar_definition(1, "u1", "x1_0");
    inverted.control_set = ControlSet::from_box({1.0}, {-1.0});
    CHECK_FALSE(validate(inverted).ok());

    auto outside = scalar_definition(1, "u1", "x1_0");
    outside.hat = Box{{-0.5}, {0.5}};
    CHECK_FALSE(validate(outside).ok());

    auto bad_init = scalar_definition(2, "u1", "x1_0");
    bad_init.initial = {0.0};
    CHECK_FALSE(validate(bad_init).ok());

    auto bad_horizon = scalar_definition(1, "u1", "x1_0");
    bad_horizon.horizon = 0.0;
    CHECK_FALSE(validate(bad_horizon).ok());

    CHECK_THROWS_AS(Problem(scalar_definition(2, "p1_0*u1", "x1_0")), ValidationFailed);
}

TEST_CASE("singular points are reported as warnings") {
    const auto r = validate(scalar_definition(1, "1/x1_0 + u1", "x1_0"));
    CHECK(r.ok());
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("control sets") {
    const auto pts = ControlSet::from_points({{-1.0, 0.0}, {2.0, 1.0}});
    const auto bb = pts.bounding_box();
    CHECK(bb.lower == std::vector<double>{-1.0, 0.0});
    CHECK(bb.upper == std::vector<double>{2.0, 1.0});
    const std::vector<double> in{2.0, 1.0}, out{0.0, 0.0};
    CHECK(pts.contains(in));
    CHECK_FALSE(pts.contains(out));

    const Problem p(scalar_definition(1, "u1", "x1_0"));
    CHECK(p.hat().lower[0] == -2.0);
    CHECK(p.hat().upper[0] == 2.0);
}

TEST_CASE("controlled Lagrangian") {
    const Problem di = testing::double_integrator();
    Jet x(0.5, 1, 2), p(0.5, 1, 0);
    x.values = {-0.125, -0.5, -1.0};
    const std::vector<double> minus{-1.0};
    CHECK(pontryagin_lagrangian(di, x, p, minus) == 0.0);
    p.values = {0.5 - 1.0};
    CHECK(pontryagin_lagrangian(di, x, p, minus) == 0.0);
    const std::vector<double> plus{1.0};
    CHECK(pontryagin_lagrangian(di, x, p, plus) == doctest::Approx(-0.5 * (-1.0 - 1.0)));

    const Problem k1 = testing::scalar_problem(1, "u1", "x1_0", 1.0, {0.0}, -5.0, 5.0);
    Jet y(0.0, 1, 1), q(0.0, 1, 0);
    y.values = {0.0, 3.0};
    q.values = {2.0};
    CHECK(pontryagin_lagrangian(k1, y, q, plus) == 4.0);
}

TEST_CASE("controlled Lagrangian vanishes along forward trajectories") {
    for (const auto& name : testing::benchmark_names()) {
        const auto spec = parse_spec(testing::benchmark_path(name));
        const auto& pr = spec.problem;
        const auto u = parse_control_descriptor("expr:0.6*cos(2*t)", pr.horizon(), 1);
        const auto traj = integrate_forward(pr, u, spec.numerics.forward);
        const int k = pr.order(), n = pr.state_dim();
        // x_(k) by central differences of the integrated x_(k-1), not from f.
        const auto& t = traj.times();
        double worst = 0.0;
        for (std::size_t node = 1; node + 1 < traj.node_count(); node += 13) {
            Jet x(t[node], n, k), p(t[node], n, 0);
            const auto jets = traj.jets(node);
            std::copy_n(jets.begin(), static_cast<std::ptrdiff_t>(k * n), x.values.begin());
            x.values[static_cast<std::size_t>(k * n)] =
                (traj.x(node + 1, k - 1, 0) - traj.x(node - 1, k - 1, 0)) / (t[node + 1] - t[node - 1]);
            std::fill(p.values.begin(), p.values.end(), 1.0);
            worst = std::max(worst, std::abs(pontryagin_lagrangian(pr, x, p, u.eval(t[node]))));
        }
        CHECK_MESSAGE(worst <= 1e-5, name << " " << worst);
    }
}

TEST_CASE("compiled derivative programs") {
    const Problem p = testing::scalar_problem(2, "-sin(x1_0) - 0.5*x1_1*u1", "x1_0^2 + 3*x1_1", 1.0, {0.0, 0.0});
    std::vector<double> slots(p.slot_count(), 0.0);
    slots[p.x_slot(0, 0)] = 0.3;
    slots[p.x_slot(1, 0)] = -0.2;
    slots[p.u_slot(0, 0)] = 0.7;
    CHECK(p.dfdx(0, 0, 0)(slots) == doctest::Approx(-std::cos(0.3)));
    CHECK(p.dfdx(0, 0, 1)(slots) == doctest::Approx(-0.35));
    CHECK(p.dcdx(0, 0)(slots) == doctest::Approx(0.6));
    CHECK(p.dcdx(0, 1)(slots) == doctest::Approx(3.0));
    CHECK(p.f(0)(slots) == doctest::Approx(-std::sin(0.3) + 0.07));
}

}  // TEST_SUITE
