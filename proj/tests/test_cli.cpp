#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hopmp/cli.hpp"
#include "hopmp/errors.hpp"
#include "hopmp/specfile.hpp"
#include "support.hpp"

using namespace hopmp;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(# minimal
[problem]
order = 2
horizon = 1
[dynamics]
f1 = u1
[cost]
C = x1_0
[control]
kind = box
lower = -1
upper = 1
)";

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hopmp_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

double value_after(const std::string& text, const std::string& key) {
    const auto at = text.find(key + " = ");
    REQUIRE(at != std::string::npos);
    return std::stod(text.substr(at + key.size() + 3));
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    return s.replace(at, from.size(), to);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("bundled double integrator spec") {
    const auto spec = parse_spec(testing::benchmark_path("double_integrator"));
    const auto& p = spec.problem;
    CHECK(p.order() == 2);
    CHECK(p.horizon() == 1.0);
    CHECK(p.dynamics()[0] == parse("u1", p.schema()));
    CHECK(p.cost() == parse("x1_0", p.schema()));
    CHECK(p.control_set().kind == ControlSet::Kind::Box);
    CHECK(p.control_set().box.lower == std::vector<double>{-1.0});
    CHECK(p.control_set().box.upper == std::vector<double>{1.0});
    CHECK(std::vector<double>(p.initial().begin(), p.initial().end()) == std::vector<double>{0.0, 0.0});
    CHECK(spec.control0 == testing::constant(1.0, 0.0));
}

TEST_CASE("every bundled benchmark parses") {
    for (const auto& name : testing::benchmark_names()) CHECK_NOTHROW(parse_spec(testing::benchmark_path(name)));
}

TEST_CASE("defaults are applied and listed") {
    const auto spec = parse_spec_text(kMinimal);
    CHECK(spec.numerics.forward.grid == 2048);
    CHECK(spec.numerics.pmp_tolerance == 1e-4);
    CHECK(spec.numerics.convention == TerminalConvention::Derived);
    CHECK(spec.problem.state_dim() == 1);
    CHECK_FALSE(spec.defaults.empty());
    const bool listed = std::any_of(spec.defaults.begin(), spec.defaults.end(),
                                    [](const std::string& d) { return d.rfind("numerics.grid", 0) == 0; });
    CHECK(listed);
}

TEST_CASE("finite control sets and derivative bounds") {
    const std::string text = replace(kMinimal, "kind = box\nlower = -1\nupper = 1\n",
                                     "kind = points\npoints = -1; 0; 1\nd1_lower = -5\nd1_upper = 5\n");
    const auto spec = parse_spec_text(text);
    CHECK(spec.problem.control_set().kind == ControlSet::Kind::Points);
    CHECK(spec.problem.control_set().points.size() == 3);
    CHECK(spec.problem.derivative_bounds().at(0).upper == std::vector<double>{5.0});
}

TEST_CASE("spec errors") {
    CHECK_THROWS_AS(parse_spec_text(replace(kMinimal, "[cost]\nC = x1_0\n", "")), SpecSyntaxError);
    CHECK_THROWS_AS(parse_spec_text(replace(kMinimal, "f1 = u1", "f1 = x1_2")), ValidationFailed);
    CHECK_THROWS_AS(parse_spec_text(replace(kMinimal, "C = x1_0", "C = u1")), ValidationFailed);
    CHECK_THROWS_AS(parse_spec_text(replace(kMinimal, "horizon = 1", "horizon = 1\ncolour = red")), SpecSyntaxError);
    CHECK_THROWS_AS(parse_spec_text(std::string(kMinimal) + "[extra]\n"), SpecSyntaxError);
    CHECK_THROWS_AS(parse_spec_text(replace(kMinimal, "order = 2", "order = 2\norder = 3")), SpecSyntaxError);
    CHECK_THROWS_AS(parse_spec("/nonexistent/problem.spec"), SpecSyntaxError);
    try {
        parse_spec_text(replace(kMinimal, "f1 = u1", "f1 = u1 +* 2"));
        FAIL("expected SpecSyntaxError");
    } catch (const SpecSyntaxError& e) {
        CHECK(e.line() == 6);
        CHECK(e.column() == 10);
    }
    try {
        parse_spec_text(replace(kMinimal, "horizon = 1", "horizon 1"));
        FAIL("expected SpecSyntaxError");
    } catch (const SpecSyntaxError& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("file controls resolve next to the spec") {
    const auto dir = scratch("filecontrol");
    std::ofstream(dir / "u.txt") << serialize(testing::constant(1.0, -0.5));
    std::ofstream(dir / "p.spec") << std::string(kMinimal) << "[control0]\ndesc = file:u.txt\n";
    const auto spec = parse_spec(dir / "p.spec");
    CHECK(spec.control0 == testing::constant(1.0, -0.5));
}

TEST_CASE("verify and solve") {
    const auto dir = scratch("verify");
    const auto spec = testing::benchmark_path("double_integrator");
    auto r = run_cli({"verify", spec, "--control", "const:-1", "--out", dir.string()});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("pmp: satisfied") != std::string::npos);
    CHECK(fs::exists(dir / "pmp_report.csv"));

    r = run_cli({"verify", spec, "--control", "const:0", "--out", dir.string()});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("pmp: violated") != std::string::npos);

    r = run_cli({"solve", spec, "--out", dir.string()});
    CHECK(r.code == cli::kOk);
    for (const char* f : {"trajectory.csv", "adjoint.csv", "pmp_report.csv"}) CHECK(fs::exists(dir / f));
    CHECK(value_after(r.out, "crosscheck") <= 1e-8);
}

TEST_CASE("improve reaches the analytic optimum") {
    const auto dir = scratch("improve");
    const auto r = run_cli({"improve", testing::benchmark_path("double_integrator"), "--control", "const:0", "--out",
                            dir.string()});
    CHECK(r.code == cli::kOk);
    CHECK(value_after(r.out, "final_cost") == doctest::Approx(-0.5).epsilon(2e-3));
    CHECK(fs::exists(dir / "improve_log.csv"));
    const auto u = deserialize(slurp(dir / "control_final.txt"));
    CHECK(dist(u, testing::constant(1.0, -1.0)) <= 0.05);
}

TEST_CASE("sweep and oracle") {
    const auto dir = scratch("sweep");
    const auto spec = testing::benchmark_path("double_integrator");
    auto r = run_cli({"sweep", spec, "--out", dir.string(), "--tau-points", "16", "--omega-points", "5"});
    CHECK(r.code == cli::kOk);
    std::istringstream rows(slurp(dir / "sweep.csv"));
    std::string header;
    std::getline(rows, header);
    CHECK(header == "tau,omega1,H,gap");
    int n = 0;
    for (std::string line; std::getline(rows, line);) ++n;
    CHECK(n % 5 == 0);
    CHECK(n >= 16 * 5);

    r = run_cli({"oracle", spec, "--out", dir.string(), "--seed", "3"});
    CHECK(r.code == cli::kOk);
    CHECK(value_after(r.out, "brute_force_cost") == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(r.out.find("dominates = yes") != std::string::npos);
    CHECK(fs::exists(dir / "oracle.csv"));
    CHECK(fs::exists(dir / "lipschitz.csv"));
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    const auto spec = testing::benchmark_path("double_integrator");
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"frobnicate", spec}).code == cli::kUsage);
    CHECK(run_cli({"verify"}).code == cli::kUsage);
    CHECK(run_cli({"verify", spec, "--grid", "many"}).code == cli::kUsage);
    CHECK(run_cli({"verify", spec, "--control", "nonsense", "--out", dir.string()}).code == cli::kUsage);
    CHECK(run_cli({"verify", spec, "--convention", "sideways"}).code == cli::kUsage);
    CHECK(run_cli({"oracle", spec, "--pieces", "40", "--out", dir.string()}).code == cli::kUsage);

    std::ofstream(dir / "broken.spec") << "[problem]\norder = 2\n";
    CHECK(run_cli({"verify", (dir / "broken.spec").string()}).code == cli::kValidation);
    CHECK(run_cli({"verify", (dir / "missing.spec").string()}).code == cli::kValidation);
    std::ofstream(dir / "invalid.spec") << replace(kMinimal, "C = x1_0", "C = u1");
    CHECK(run_cli({"verify", (dir / "invalid.spec").string()}).code == cli::kValidation);

    std::ofstream(dir / "blowup.spec") << replace(replace(replace(kMinimal, "order = 2", "order = 1"), "f1 = u1",
                                                          "f1 = x1_0^2 + u1"),
                                                  "horizon = 1", "horizon = 3")
                                       << "[init]\nx1_0 = 1\n";
    CHECK(run_cli({"solve", (dir / "blowup.spec").string(), "--out", dir.string()}).code == cli::kNumeric);

    const auto printed = run_cli({"improve", spec, "--convention", "printed", "--out", dir.string()});
    CHECK(printed.code == cli::kNumeric);
    CHECK(printed.out.find("termination = step_failed") != std::string::npos);
}

TEST_CASE("identical inputs give byte-identical outputs") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto spec = testing::benchmark_path("damped_k2");
    for (const auto& cmd : {"solve", "improve"}) {
        CHECK(run_cli({cmd, spec, "--out", a.string(), "--workers", "1", "--max-iter", "10"}).code != cli::kUsage);
        CHECK(run_cli({cmd, spec, "--out", b.string(), "--workers", "3", "--max-iter", "10"}).code != cli::kUsage);
    }
    CHECK(run_cli({"oracle", spec, "--out", a.string(), "--seed", "5", "--max-iter", "10"}).code == cli::kOk);
    CHECK(run_cli({"oracle", spec, "--out", b.string(), "--seed", "5", "--max-iter", "10"}).code == cli::kOk);
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        CHECK_MESSAGE(slurp(entry.path()) == slurp(b / name), name.string());
    }
}

}  // TEST_SUITE
