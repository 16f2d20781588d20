#include <doctest.h>

#include <cmath>
#include <map>

#include "hopmp/errors.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/jets.hpp"
#include "support.hpp"

using namespace hopmp;

namespace {

std::vector<double> random_slots(const Schema& s, testing::ExprGenerator& gen) {
    std::vector<double> slots(s.slot_count());
    for (auto& v : slots) v = gen.uniform(-1.0, 1.0);
    return slots;
}

double eval(const Expr& e, const Schema& s, const std::vector<double>& slots) { return Program(e, s)(slots); }

std::vector<Expr> parse_all(const std::vector<std::string>& src, const Schema& s) {
    std::vector<Expr> out;
    for (const auto& x : src) out.push_back(parse(x, s));
    return out;
}

}  // namespace

TEST_SUITE("jets") {

TEST_CASE("dt_partial examples") {
    const auto s = Schema::jets(2, 1, 1);
    CHECK(dt_partial(parse("x1_0", s), s) == parse("x1_1", s));
    CHECK(dt_partial(parse("t*u1", s), s) == parse("u1", s));

    const Expr d = dt_partial(parse("p1_0*x1_1", s), s);
    testing::ExprGenerator gen({"t"}, 5);
    for (int i = 0; i < 20; ++i) {
        const auto slots = random_slots(s, gen);
        CHECK(eval(d, s, slots) == doctest::Approx(eval(parse("p1_1*x1_1 + p1_0*x1_2", s), s, slots)).epsilon(1e-15));
    }
    const auto fs = free_symbols(d);
    CHECK(fs == std::vector<Symbol>{Symbol::state(0, 1), Symbol::state(0, 2), Symbol::costate(0, 0),
                                    Symbol::costate(0, 1)});
}

TEST_CASE("dt_full examples") {
    const auto s = Schema::jets(2, 1, 1);
    CHECK(dt_full(parse("x1_0", s), s) == parse("x1_1", s));
    testing::ExprGenerator gen({"t"}, 6);
    for (int i = 0; i < 20; ++i) {
        const auto slots = random_slots(s, gen);
        CHECK(eval(dt_full(parse("t*u1", s), s), s, slots) ==
              doctest::Approx(eval(parse("u1 + t*u1_1", s), s, slots)).epsilon(1e-15));
        CHECK(eval(dt_full(parse("u1^2", s), s), s, slots) ==
              doctest::Approx(eval(parse("2*u1*u1_1", s), s, slots)).epsilon(1e-15));
    }
}

TEST_CASE("jet cap is enforced") {
    const auto s = Schema::jets(2, 1, 1);  // x-jets up to 3, p-jets up to 1
    CHECK_THROWS_AS(dt_partial(parse("x1_3", s), s), DerivativeOrderTooHigh);
    CHECK_THROWS_AS(dt_partial(parse("p1_1", s), s), DerivativeOrderTooHigh);
    CHECK_THROWS_AS(dt_full(parse("u1_1", s), s), DerivativeOrderTooHigh);
}

TEST_CASE("full and frozen total derivatives differ only by control-derivative terms") {
    const auto s = Schema::jets(3, 1, 1);
    testing::ExprGenerator gen({"t", "x1_0", "x1_1", "x1_2", "u1", "p1_0"}, 31);
    for (int trial = 0; trial < 100; ++trial) {
        const Expr e = parse(gen.text(3), s);
        const Expr diff = dt_full(e, s) - dt_partial(e, s);
        auto slots = random_slots(s, gen);
        for (int l = 1; l <= s.max_control_order(); ++l) slots[s.slot(Symbol::control(0, l))] = 0.0;
        CHECK(eval(diff, s, slots) == 0.0);
        // With e free of control derivatives the difference is u1_1 * de/du1:
        // linear in u1_1.
        slots[s.slot(Symbol::control(0, 1))] = 0.75;
        const double once = eval(diff, s, slots);
        slots[s.slot(Symbol::control(0, 1))] = 1.5;
        CHECK(eval(diff, s, slots) == doctest::Approx(2.0 * once).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("derived system examples") {
    const auto s = Schema::jets(2, 1, 1);
    {
        const auto f = parse_all({"u1"}, s);
        const auto d = build_derived_system(f, 2, s);
        CHECK(d.at(2)[0] == parse("u1", s));
        CHECK(d.at(3)[0] == parse("u1_1", s));
    }
    {
        const auto f = parse_all({"-x1_0"}, s);
        CHECK(build_derived_system(f, 2, s).at(3)[0] == parse("-x1_1", s));
    }
    {
        const auto s1 = Schema::jets(1, 1, 1);
        const auto d = build_derived_system(parse_all({"u1"}, s1), 1, s1);
        CHECK(d.lowest() == 1);
        CHECK(d.highest() == 1);
        CHECK(d.at(1)[0] == parse("u1", s1));
    }
    {
        // Every x_(k) produced by differentiation is replaced by f.
        const auto f = parse_all({"-x1_0 - 0.5*x1_1 + u1"}, s);
        const Expr x3 = build_derived_system(f, 2, s).at(3)[0];
        CHECK_FALSE(depends_on(x3, Symbol::state(0, 2)));
        testing::ExprGenerator gen({"t"}, 1);
        const auto slots = random_slots(s, gen);
        const double x0 = slots[s.slot(Symbol::state(0, 0))], x1 = slots[s.slot(Symbol::state(0, 1))];
        const double u = slots[s.slot(Symbol::control(0))], u1 = slots[s.slot(Symbol::control(0, 1))];
        const double x2 = -x0 - 0.5 * x1 + u;
        CHECK(eval(x3, s, slots) == doctest::Approx(-x1 - 0.5 * x2 + u1));
    }
}

TEST_CASE("adjoint right-hand side examples") {
    const auto s2 = Schema::jets(2, 1, 1);
    CHECK(adjoint_rhs(parse_all({"u1"}, s2), 2, s2)[0].is_constant(0.0));
    CHECK(adjoint_rhs(parse_all({"-x1_0+u1"}, s2), 2, s2)[0] == parse("-p1_0", s2));

    const auto s1 = Schema::jets(1, 2, 1);
    const auto f = parse_all({"sin(x1_0)*u1 + x2_0", "x1_0*x2_0"}, s1);
    const auto rhs = adjoint_rhs(f, 1, s1);
    testing::ExprGenerator gen({"t"}, 8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto slots = random_slots(s1, gen);
        const auto at = [&](const char* n) { return slots[s1.slot(s1.lookup(n))]; };
        const double p1 = at("p1_0"), p2 = at("p2_0"), x1 = at("x1_0"), x2 = at("x2_0"), u = at("u1");
        CHECK(eval(rhs[0], s1, slots) == doctest::Approx(-(p1 * std::cos(x1) * u + p2 * x2)));
        CHECK(eval(rhs[1], s1, slots) == doctest::Approx(-(p1 + p2 * x1)));
    }
}

TEST_CASE("first-order adjoint is the classical co-state equation on every k=1 benchmark") {
    for (const auto& name : testing::benchmark_names()) {
        const auto spec = parse_spec(testing::benchmark_path(name));
        const auto& pr = spec.problem;
        if (pr.order() != 1) continue;
        const auto& s = pr.schema();
        const Expr expected = -(Expr::variable(Symbol::costate(0, 0)) * differentiate(pr.dynamics()[0], Symbol::state(0, 0)));
        CHECK_MESSAGE(pr.adjoint_rhs()[0] == expected, name);
        testing::ExprGenerator gen({"t"}, 3);
        const auto slots = random_slots(s, gen);
        CHECK(eval(pr.adjoint_rhs()[0], s, slots) == eval(expected, s, slots));
    }
}

TEST_CASE("adjoint right-hand side is linear in the co-state jets") {
    const auto s = Schema::jets(3, 2, 1);
    const auto f = parse_all({"sin(x1_0)*x2_1 + u1*x1_2", "x1_1*x2_0 - cos(t*x2_2) + u1^2"}, s);
    const auto rhs = adjoint_rhs(f, 3, s);
    testing::ExprGenerator gen({"t"}, 17);
    for (int trial = 0; trial < 50; ++trial) {
        auto slots = random_slots(s, gen);
        auto scaled = slots;
        for (int l = 0; l <= s.max_costate_order(); ++l)
            for (int i = 0; i < 2; ++i) scaled[s.slot(Symbol::costate(i, l))] *= 2.0;
        for (const auto& e : rhs) CHECK(eval(e, s, scaled) == 2.0 * eval(e, s, slots));
        for (int l = 0; l <= s.max_costate_order(); ++l)
            for (int i = 0; i < 2; ++i) slots[s.slot(Symbol::costate(i, l))] = 0.0;
        for (const auto& e : rhs) CHECK(eval(e, s, slots) == 0.0);
    }
}

TEST_CASE("terminal chain examples and triangularity") {
    const auto s1 = Schema::jets(1, 1, 1);
    {
        const auto f = parse_all({"u1"}, s1);
        const auto d = terminal_conditions(f, parse("x1_0", s1), 1, s1, TerminalConvention::Derived);
        CHECK(d[0][0].is_constant(-1.0));
        const auto p = terminal_conditions(f, parse("x1_0", s1), 1, s1, TerminalConvention::AsPrinted);
        CHECK(p[0][0].is_constant(1.0));
    }
    const auto s2 = Schema::jets(2, 1, 1);
    {
        const auto f = parse_all({"u1"}, s2);
        const auto d = terminal_conditions(f, parse("x1_0", s2), 2, s2, TerminalConvention::Derived);
        CHECK(d[0][0].is_constant(0.0));
        CHECK(d[1][0].is_constant(1.0));
    }
    for (auto conv : {TerminalConvention::Derived, TerminalConvention::AsPrinted}) {
        const auto f = parse_all({"-x1_0 + u1"}, s2);
        const auto z = terminal_conditions(f, parse("3.5", s2), 2, s2, conv);
        for (const auto& level : z)
            for (const auto& e : level) CHECK(e.is_constant(0.0));
    }
    const auto s3 = Schema::jets(3, 2, 1);
    const auto f3 = parse_all({"sin(x1_0)*x2_1 + u1*x1_2", "x1_1*x2_0 - cos(t*x2_2) + u1^2"}, s3);
    const Expr cost = parse("x1_0*x2_2 + x1_1^2 + sin(x2_0)", s3);
    for (auto conv : {TerminalConvention::Derived, TerminalConvention::AsPrinted}) {
        const auto chain = terminal_conditions(f3, cost, 3, s3, conv);
        REQUIRE(chain.size() == 3);
        for (int l = 0; l < 3; ++l)
            for (const auto& e : chain[static_cast<std::size_t>(l)])
                for (const auto& sym : free_symbols(e)) {
                    if (sym.kind == SymbolKind::Costate) CHECK(sym.order < l);
                    if (sym.kind == SymbolKind::State) CHECK(sym.order <= 2 * 3 - 3);
                    if (sym.kind == SymbolKind::Control) CHECK(sym.order == 0);
                }
    }
}

TEST_CASE("full total derivative matches finite differences along trajectories") {
    // Nonlinear second-order dynamics under constant and smooth controls.
    auto problem = testing::scalar_problem(2, "-sin(x1_0) - 0.3*x1_1 + u1", "x1_0", 1.0, {0.4, -0.2});
    const auto& s = problem.schema();
    const std::vector<Expr> probes{parse("x1_0*x1_1 + sin(x1_0)", s), parse("t*x1_1^2 - exp(x1_0)", s),
                                   parse("x1_0*u1 + cos(x1_1)", s)};
    const std::vector<ControlCurve> controls{testing::constant(1.0, 0.7),
                                             parse_control_descriptor("expr:0.5*sin(3*t)", 1.0, 1)};
    ForwardOptions fo;
    fo.grid = 2048;
    double worst = 0.0;
    for (const auto& u : controls) {
        const auto traj = integrate_forward(problem, u, fo);
        const auto& times = traj.times();
        std::vector<double> slots(problem.slot_count(), 0.0);
        auto load = [&](std::size_t node) {
            std::fill(slots.begin(), slots.end(), 0.0);
            slots[0] = times[node];
            const auto jets = traj.jets(node);
            for (int l = 0; l < traj.levels(); ++l) slots[problem.x_slot(l, 0)] = jets[static_cast<std::size_t>(l)];
            const auto uj = u.eval(times[node], 1);
            slots[problem.u_slot(0, 0)] = uj[0];
            slots[problem.u_slot(1, 0)] = uj[1];
        };
        for (const auto& e : probes) {
            const Program value(e, s), rate(dt_full(e, s), s);
            for (std::size_t node = 1; node + 1 < times.size(); node += 37) {
                load(node + 1);
                const double up = value(slots);
                load(node - 1);
                const double down = value(slots);
                load(node);
                const double fd = (up - down) / (times[node + 1] - times[node - 1]);
                const double exact = rate(slots);
                const double rel = std::abs(fd - exact) / std::max(1.0, std::abs(exact));
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst <= 1e-5);
}

}  // TEST_SUITE
