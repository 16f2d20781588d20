#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hopmp/errors.hpp"
#include "hopmp/forward.hpp"
#include "support.hpp"

using namespace hopmp;

namespace {

/// Largest central-difference mismatch between stored level s and s+1 over
/// interior nodes, relative to the sup of level s+1.
double jet_consistency(const Trajectory& traj, int s) {
    const auto& t = traj.times();
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        const double fd = (traj.x(i + 1, s, 0) - traj.x(i - 1, s, 0)) / (t[i + 1] - t[i - 1]);
        err = std::max(err, std::abs(fd - traj.x(i, s + 1, 0)));
        scale = std::max(scale, std::abs(traj.x(i, s + 1, 0)));
    }
    return err / std::max(scale, 1e-300);
}

}  // namespace

TEST_SUITE("forward") {

TEST_CASE("first-order reduction") {
    const auto di = testing::double_integrator();
    const auto r = reduce_first_order(di);
    CHECK(r.dim == 2);
    std::vector<double> slots(di.slot_count(), 0.0), dy(2);
    slots[di.u_slot(0, 0)] = 0.75;
    const std::vector<double> y{3.0, -2.0};
    r.rhs(di, 0.1, y, slots, dy);
    CHECK(dy == std::vector<double>{-2.0, 0.75});

    const auto k1 = testing::scalar_problem(1, "u1", "x1_0", 1.0, {0.4});
    CHECK(reduce_first_order(k1).dim == 1);
    CHECK(reduce_first_order(k1).initial_state(k1) == std::vector<double>{0.4});

    ProblemDefinition d;
    d.order = 3;
    d.state_dim = 2;
    const auto s = Schema::jets(3, 2, 1);
    d.dynamics = {parse("u1", s), parse("x1_2", s)};
    d.cost = parse("x1_0", s);
    d.control_set = ControlSet::from_box({-1.0}, {1.0});
    d.initial = {1, 2, 3, 4, 5, 6};
    const Problem k3(std::move(d));
    CHECK(reduce_first_order(k3).dim == 6);
    CHECK(reduce_first_order(k3).initial_state(k3) == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("double integrator under full braking") {
    const auto traj = integrate_forward(testing::double_integrator(), testing::constant(1.0, -1.0));
    const auto last = traj.node_count() - 1;
    CHECK(std::abs(traj.x(last, 0, 0) + 0.5) <= 1e-8);
    CHECK(std::abs(traj.x(last, 1, 0) + 1.0) <= 1e-8);
    CHECK(traj.x(last, 2, 0) == -1.0);
    CHECK(traj.x(0, 0, 0) == 0.0);
    CHECK(traj.x(0, 1, 0) == 0.0);
    CHECK(traj.levels() == 3);
}

TEST_CASE("constant-rate first-order dynamics are integrated exactly") {
    for (double c : {-1.0, 0.3, 0.9}) {
        const auto p = testing::scalar_problem(1, "u1", "x1_0", 1.0, {0.25});
        const auto traj = integrate_forward(p, testing::constant(1.0, c));
        for (std::size_t i = 0; i < traj.node_count(); i += 97)
            CHECK(std::abs(traj.x(i, 0, 0) - (0.25 + c * traj.times()[i])) <= 1e-13);
    }
}

TEST_CASE("exponential decay") {
    const auto p = testing::scalar_problem(1, "-x1_0", "x1_0", 1.0, {1.0});
    const auto traj = integrate_forward(p, testing::constant(1.0, 0.0));
    CHECK(std::abs(traj.x(traj.node_count() - 1, 0, 0) - std::exp(-1.0)) <= 1e-8);
}

TEST_CASE("grid contains every breakpoint") {
    const auto u = parse_control_descriptor("const:0", 1.0, 1);
    NeedleParams np;
    np.tau = 0.5123;
    np.omega = {1.0};
    np.epsilon = 0.0111;
    const auto n = needle(u, np);
    const auto traj = integrate_forward(testing::double_integrator(), n);
    for (double b : n.breakpoints())
        CHECK(std::find(traj.times().begin(), traj.times().end(), b) != traj.times().end());
    CHECK(traj.times().front() == 0.0);
    CHECK(traj.times().back() == 1.0);

    const auto grid = build_grid(1.0, 4, {0.3, 0.5 + 1e-15});
    CHECK(grid == std::vector<double>{0.0, 0.25, 0.3, 0.5 + 1e-15, 0.75, 1.0});
    const auto refined = build_grid(1.0, 2, {}, {{0.0, 0.5}}, 4);
    CHECK(refined.size() >= 6);
}

TEST_CASE("stored jets are mutually consistent to second order") {
    const auto p = testing::scalar_problem(3, "-sin(x1_0) - 0.3*x1_1 + x1_2*u1", "x1_0", 1.0, {0.4, -0.2, 0.1});
    const auto u = parse_control_descriptor("expr:0.5*cos(2*t)", 1.0, 1);
    for (int s = 0; s <= 2 * 3 - 3; ++s) {
        ForwardOptions coarse, fine;
        coarse.grid = 128;
        fine.grid = 256;
        coarse.tolerance = fine.tolerance = 1e-6;
        const double e1 = jet_consistency(integrate_forward(p, u, coarse), s);
        const double e2 = jet_consistency(integrate_forward(p, u, fine), s);
        const double slope = std::log2(e1 / e2);
        CHECK_MESSAGE(slope >= 1.8, "level " << s << " slope " << slope);
    }
}

TEST_CASE("step halving moves terminal jets within the reported estimate") {
    const auto p = testing::scalar_problem(2, "-sin(x1_0) - 0.3*x1_1 + u1", "x1_0", 2.0, {0.4, -0.2});
    const auto u = parse_control_descriptor("expr:0.5*cos(2*t)", 2.0, 1);
    ForwardOptions a, b;
    a.grid = 256;
    b.grid = 512;
    const auto ta = integrate_forward(p, u, a);
    const auto tb = integrate_forward(p, u, b);
    double change = 0.0;
    for (int s = 0; s < 2; ++s)
        change = std::max(change, std::abs(ta.x(ta.node_count() - 1, s, 0) - tb.x(tb.node_count() - 1, s, 0)));
    CHECK(ta.error_estimate() > 0.0);
    CHECK(change <= 16.0 * ta.error_estimate());
}

TEST_CASE("integration failures") {
    const auto blowup = testing::scalar_problem(1, "x1_0^2", "x1_0", 2.0, {1.0});
    CHECK_THROWS_AS(integrate_forward(blowup, testing::constant(2.0, 0.0)), NonFiniteState);

    const auto forced = testing::scalar_problem(1, "30*cos(30*t)*x1_0 + u1", "x1_0", 1.0, {1.0});
    ForwardOptions coarse;
    coarse.grid = 16;
    CHECK_THROWS_AS(integrate_forward(forced, testing::constant(1.0, 0.0), coarse), StepTooCoarse);
    coarse.richardson = false;
    CHECK_NOTHROW(integrate_forward(forced, testing::constant(1.0, 0.0), coarse));
}

TEST_CASE("cost and CSV export") {
    const auto di = testing::double_integrator();
    CHECK(cost_of(di, testing::constant(1.0, -1.0)) == doctest::Approx(-0.5).epsilon(1e-12));
    ForwardOptions small;
    small.grid = 4;
    const auto traj = integrate_forward(di, testing::constant(1.0, 1.0), small);
    std::ostringstream os;
    traj.write_csv(os);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,x1_0,x1_1,x1_2,u1");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 5);
    CHECK(std::string(Trajectory::method()) == "rk4");
}

TEST_CASE("interpolated jets") {
    const auto di = testing::double_integrator();
    const auto traj = integrate_forward(di, testing::constant(1.0, -1.0));
    const auto j = traj.jets_at(0.5, 1);
    CHECK(j[0] == doctest::Approx(-0.125).epsilon(1e-9));
    CHECK(j[1] == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(traj.interval_at(1.0) == traj.interval_count() - 1);
}

}  // TEST_SUITE
