#include "hopmp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "hopmp/adjoint.hpp"
#include "hopmp/errors.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/improve.hpp"
#include "hopmp/oracle.hpp"
#include "hopmp/parallel.hpp"
#include "hopmp/pontryagin.hpp"
#include "hopmp/specfile.hpp"
#include "hopmp/text.hpp"

namespace hopmp::cli {

namespace {

namespace fs = std::filesystem;

struct Flags {
    std::string command;
    std::string spec;
    std::optional<std::string> control;
    std::optional<int> grid;
    std::optional<double> tol;
    std::optional<double> ode_tol;
    std::optional<std::string> convention;
    std::string out_dir = ".";
    int workers = 0;
    std::uint64_t seed = 1;
    int pieces = 4;
    std::optional<std::string> levels;
    std::optional<int> max_iterations;
    bool smooth = false;
    int tau_points = 512;
    int omega_points = 33;
};

class UsageError : public Error {
public:
    using Error::Error;
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    fill(os);
    if (!os) throw Error("failed writing " + path.string());
}

std::string vec(const std::vector<double>& v) { return join_doubles(v, ","); }

struct Context {
    Flags flags;
    SpecFile spec;
    ControlCurve control;
    fs::path out;
    int workers;

    ImproveOptions improve_options() const {
        ImproveOptions o;
        o.tolerance = spec.numerics.pmp_tolerance;
        o.forward = spec.numerics.forward;
        o.convention = spec.numerics.convention;
        o.workers = workers;
        o.tau_points = flags.tau_points;
        o.smoothing = flags.smooth;
        if (flags.max_iterations) o.max_iterations = *flags.max_iterations;
        return o;
    }
};

void print_report(std::ostream& out, const PMPReport& r) {
    out << "pmp: " << (r.satisfied ? "satisfied" : "violated") << " sup_residual=" << format_double(r.sup_residual)
        << " tolerance=" << format_double(r.tolerance);
    if (r.has_admissible)
        out << " worst_tau=" << format_double(r.tau[r.worst]) << " omega_star=" << vec(r.omega_star[r.worst]);
    out << '\n';
}

int cmd_solve(Context& c, std::ostream& out, bool full) {
    const Problem& p = c.spec.problem;
    const Trajectory traj = integrate_forward(p, c.control, c.spec.numerics.forward);
    const AdjointTrajectory adj = integrate_adjoint(p, traj, c.spec.numerics.convention);
    const PMPReport report = pmp_report(p, traj, adj, default_tau_grid(c.control, c.flags.tau_points),
                                        c.spec.numerics.pmp_tolerance, c.workers);
    write_file(c.out / "pmp_report.csv", [&](std::ostream& os) { report.write_csv(os); });
    out << "cost = " << format_double(terminal_cost(p, traj)) << '\n';
    if (full) {
        const ReducedCostate reduced = reduced_adjoint(p, traj);
        write_file(c.out / "trajectory.csv", [&](std::ostream& os) { traj.write_csv(os); });
        write_file(c.out / "adjoint.csv", [&](std::ostream& os) { write_csv(os, adj, &reduced); });
        out << "crosscheck = " << format_double(crosscheck(adj, reduced)) << '\n';
    }
    print_report(out, report);
    return kOk;
}

int cmd_improve(Context& c, std::ostream& out) {
    const OptimizeResult res = solve(c.spec.problem, c.control, c.improve_options());
    write_file(c.out / "improve_log.csv", [&](std::ostream& os) { res.write_log(os); });
    write_file(c.out / "control_final.txt", [&](std::ostream& os) { os << serialize(res.control); });
    write_file(c.out / "pmp_report.csv", [&](std::ostream& os) { res.final_report.write_csv(os); });
    out << "termination = " << to_string(res.termination) << '\n';
    out << "iterations = " << res.steps.size() << '\n';
    out << "initial_cost = " << format_double(res.cost_history.front()) << '\n';
    out << "final_cost = " << format_double(res.final_cost()) << '\n';
    print_report(out, res.final_report);
    if (res.termination == OptimizeResult::Termination::StepFailed) {
        out << res.message << '\n';
        return kNumeric;
    }
    return kOk;
}

std::vector<std::vector<double>> omega_grid(const ControlSet& K, int per_axis) {
    if (K.kind == ControlSet::Kind::Points) return K.points;
    const std::size_t m = K.box.dim();
    std::vector<std::vector<double>> out{{}};
    for (std::size_t a = 0; a < m; ++a) {
        std::vector<std::vector<double>> next;
        const int g = K.box.lower[a] == K.box.upper[a] ? 1 : std::max(2, per_axis);
        for (const auto& prefix : out) {
            for (int j = 0; j < g; ++j) {
                auto w = prefix;
                w.push_back(g == 1 ? K.box.lower[a]
                                   : K.box.lower[a] + (K.box.upper[a] - K.box.lower[a]) * j / (g - 1));
                next.push_back(std::move(w));
            }
        }
        out = std::move(next);
    }
    return out;
}

int cmd_sweep(Context& c, std::ostream& out) {
    const Problem& p = c.spec.problem;
    const Trajectory traj = integrate_forward(p, c.control, c.spec.numerics.forward);
    const AdjointTrajectory adj = integrate_adjoint(p, traj, c.spec.numerics.convention);
    const auto taus = default_tau_grid(c.control, c.flags.tau_points);
    const auto omegas = omega_grid(p.control_set(), c.flags.omega_points);
    if (static_cast<double>(taus.size()) * static_cast<double>(omegas.size()) > 5e6)
        throw UsageError("sweep grid too large; lower --tau-points or --omega-points");

    std::vector<double> h(taus.size() * omegas.size());
    std::vector<double> h_u(taus.size());
    parallel_for(taus.size(), c.workers, [&](std::size_t begin, std::size_t end, int) {
        HamiltonianEvaluator ev(p);
        for (std::size_t j = begin; j < end; ++j) {
            ev.set_time(traj, adj, taus[j]);
            h_u[j] = ev(c.control.eval(taus[j], 0));
            for (std::size_t w = 0; w < omegas.size(); ++w) h[j * omegas.size() + w] = ev(omegas[w]);
        }
    });
    write_file(c.out / "sweep.csv", [&](std::ostream& os) {
        os << "tau";
        for (int a = 0; a < p.control_dim(); ++a) os << ",omega" << a + 1;
        os << ",H,gap\n";
        for (std::size_t j = 0; j < taus.size(); ++j) {
            for (std::size_t w = 0; w < omegas.size(); ++w) {
                const double v = h[j * omegas.size() + w];
                os << format_double(taus[j]) << ',' << vec(omegas[w]) << ',' << format_double(v) << ','
                   << format_double(v - h_u[j]) << '\n';
            }
        }
    });
    out << "sweep: " << taus.size() << " times x " << omegas.size() << " values\n";
    return kOk;
}

std::vector<std::vector<double>> oracle_levels(const Context& c) {
    const ControlSet& K = c.spec.problem.control_set();
    if (c.flags.levels) {
        std::vector<std::vector<double>> out;
        for (auto field : split(*c.flags.levels, ';')) {
            std::vector<double> point;
            for (auto v : split(field, ',')) point.push_back(parse_double(v));
            out.push_back(std::move(point));
        }
        if (c.spec.problem.control_dim() == 1 && out.size() == 1 && out.front().size() > 1) {
            std::vector<std::vector<double>> scalar;
            for (double v : out.front()) scalar.push_back({v});
            return scalar;
        }
        return out;
    }
    if (K.kind == ControlSet::Kind::Points) return K.points;
    return omega_grid(K, 3);
}

int cmd_oracle(Context& c, std::ostream& out) {
    const Problem& p = c.spec.problem;
    std::vector<std::vector<double>> levels;
    try {
        levels = oracle_levels(c);
    } catch (const Error& e) {
        throw UsageError(std::string("--levels: ") + e.what());
    }
    BruteForceResult bf;
    try {
        bf = brute_force(p, c.flags.pieces, levels, c.spec.numerics.forward, c.workers);
    } catch (const BudgetExceeded& e) {
        throw UsageError(e.what());
    }
    write_file(c.out / "oracle.csv", [&](std::ostream& os) { bf.write_csv(os); });
    const OptimizeResult res = solve(p, c.control, c.improve_options());
    out << "brute_force_cost = " << format_double(bf.cost) << '\n';
    out << "brute_force_control = " << serialize(bf.control);
    out << "improve_cost = " << format_double(res.final_cost()) << '\n';
    out << "improve_termination = " << to_string(res.termination) << '\n';
    out << "dominates = " << (res.final_cost() <= bf.cost + 1e-3 ? "yes" : "no") << '\n';

    const LipschitzResult lip = lipschitz_check(p, c.control, 100, c.flags.seed, c.spec.numerics.forward);
    write_file(c.out / "lipschitz.csv", [&](std::ostream& os) {
        os << "distance,ratio\n";
        for (std::size_t i = 0; i < lip.ratios.size(); ++i)
            os << format_double(lip.distances[i]) << ',' << format_double(lip.ratios[i]) << '\n';
    });
    out << "lipschitz_max = " << format_double(lip.max_ratio) << " median = " << format_double(lip.median_ratio)
        << " skipped = " << lip.skipped << (lip.growth_suspected ? " growth suspected" : "") << '\n';
    return kOk;
}

int dispatch(Context& c, std::ostream& out) {
    if (c.flags.command == "solve") return cmd_solve(c, out, true);
    if (c.flags.command == "verify") return cmd_solve(c, out, false);
    if (c.flags.command == "improve") return cmd_improve(c, out);
    if (c.flags.command == "sweep") return cmd_sweep(c, out);
    return cmd_oracle(c, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pontryagin maximum principle tools for higher-order Mayer problems", "hopmp"};
    Flags f;
    app.add_option("command", f.command, "solve | verify | improve | sweep | oracle")
        ->required()
        ->check(CLI::IsMember({"solve", "verify", "improve", "sweep", "oracle"}));
    app.add_option("spec", f.spec, "problem file")->required();
    app.add_option("--control", f.control, "initial control: const:, poly:, expr: or file: descriptor");
    app.add_option("--grid", f.grid, "integration intervals")->check(CLI::PositiveNumber);
    app.add_option("--tol", f.tol, "PMP residual tolerance")->check(CLI::PositiveNumber);
    app.add_option("--ode-tol", f.ode_tol, "step-halving tolerance of the integrator")->check(CLI::PositiveNumber);
    app.add_option("--convention", f.convention, "terminal co-state convention")
        ->check(CLI::IsMember({"derived", "printed"}));
    app.add_option("--out", f.out_dir, "output directory");
    app.add_option("--workers", f.workers, "worker threads (default HOPMP_WORKERS or all cores)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--seed", f.seed, "oracle: seed of the Lipschitz study");
    app.add_option("--pieces", f.pieces, "oracle: number of pieces")->check(CLI::PositiveNumber);
    app.add_option("--levels", f.levels, "oracle: control levels, ';' between points and ',' within");
    app.add_option("--max-iter", f.max_iterations, "improve: iteration limit")->check(CLI::PositiveNumber);
    app.add_flag("--smooth", f.smooth, "improve: use smoothed needles");
    app.add_option("--tau-points", f.tau_points, "uniform report times")->check(CLI::PositiveNumber);
    app.add_option("--omega-points", f.omega_points, "sweep: values per control axis")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "hopmp: " << e.what() << '\n' << "run 'hopmp --help' for usage\n";
        return kUsage;
    }

    std::optional<SpecFile> spec;
    try {
        spec.emplace(parse_spec(f.spec));
    } catch (const SpecSyntaxError& e) {
        err << f.spec << ": " << e.what() << '\n';
        return kValidation;
    } catch (const ValidationFailed& e) {
        err << f.spec << ": " << e.what() << '\n';
        return kValidation;
    }
    for (const auto& d : spec->defaults) err << "default: " << d << '\n';
    for (const auto& w : spec->problem.warnings()) err << "warning: " << w << '\n';

    try {
        if (f.grid) spec->numerics.forward.grid = *f.grid;
        if (f.ode_tol) spec->numerics.forward.tolerance = *f.ode_tol;
        if (f.tol) spec->numerics.pmp_tolerance = *f.tol;
        if (f.convention) spec->numerics.convention = parse_convention(*f.convention);

        ControlCurve control = spec->control0;
        if (f.control) {
            try {
                control = parse_control_descriptor(*f.control, spec->problem.horizon(), spec->problem.control_dim());
            } catch (const Error& e) {
                throw UsageError(std::string("--control: ") + e.what());
            }
        }
        for (const auto& v : validate_control(control, spec->problem.hat(), spec->problem.derivative_bounds(),
                                              spec->problem.order()))
            err << "warning: control " << v << '\n';

        const fs::path out_dir(f.out_dir);
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw UsageError("cannot create output directory " + out_dir.string());

        Context c{f, std::move(*spec), std::move(control), out_dir, f.workers > 0 ? f.workers : default_workers()};
        return dispatch(c, out);
    } catch (const UsageError& e) {
        err << "hopmp: " << e.what() << '\n';
        return kUsage;
    } catch (const StepFailed& e) {
        err << "hopmp: " << e.what() << '\n';
        return kNumeric;
    } catch (const Error& e) {
        err << "hopmp: " << e.what() << '\n';
        return kNumeric;
    }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace hopmp::cli
