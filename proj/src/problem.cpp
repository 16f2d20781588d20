#include "hopmp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "hopmp/errors.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

ControlSet ControlSet::from_points(std::vector<std::vector<double>> pts) {
    ControlSet k;
    k.kind = Kind::Points;
    k.points = std::move(pts);
    return k;
}

ControlSet ControlSet::from_box(std::vector<double> lower, std::vector<double> upper) {
    ControlSet k;
    k.kind = Kind::Box;
    k.box = {std::move(lower), std::move(upper)};
    return k;
}

Box ControlSet::bounding_box() const {
    if (kind == Kind::Box) return box;
    Box b;
    if (points.empty()) return b;
    b.lower = points.front();
    b.upper = points.front();
    for (const auto& p : points) {
        for (std::size_t a = 0; a < p.size() && a < b.lower.size(); ++a) {
            b.lower[a] = std::min(b.lower[a], p[a]);
            b.upper[a] = std::max(b.upper[a], p[a]);
        }
    }
    return b;
}

bool ControlSet::contains(std::span<const double> omega, double tol) const {
    if (kind == Kind::Box) return box.contains(omega, tol);
    for (const auto& p : points) {
        if (p.size() != omega.size()) continue;
        bool same = true;
        for (std::size_t a = 0; a < p.size(); ++a) same = same && std::abs(p[a] - omega[a]) <= tol;
        if (same) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

bool box_well_formed(const Box& b, std::size_t dim, bool allow_infinite) {
    if (b.lower.size() != dim || b.upper.size() != dim) return false;
    for (std::size_t a = 0; a < dim; ++a) {
        if (std::isnan(b.lower[a]) || std::isnan(b.upper[a])) return false;
        if (!allow_infinite && (!std::isfinite(b.lower[a]) || !std::isfinite(b.upper[a]))) return false;
        if (b.lower[a] > b.upper[a]) return false;
    }
    return true;
}

Box inflate(const Box& b, double factor) {
    Box out = b;
    for (std::size_t a = 0; a < b.dim(); ++a) {
        const double c = 0.5 * (b.lower[a] + b.upper[a]);
        const double w = 0.5 * (b.upper[a] - b.lower[a]);
        out.lower[a] = c - factor * w;
        out.upper[a] = c + factor * w;
    }
    return out;
}

// Arguments of operations that are singular somewhere: divisors, log and
// sqrt operands.
void collect_singular(const Expr& e, std::vector<std::pair<Op, Expr>>& out) {
    switch (e.op()) {
        case Op::Const:
        case Op::Var:
            return;
        case Op::Div:
            out.emplace_back(Op::Div, e.rhs());
            break;
        case Op::Log:
        case Op::Sqrt:
            out.emplace_back(e.op(), e.lhs());
            break;
        case Op::Pow:
            if (e.value() < 0.0) out.emplace_back(Op::Div, e.lhs());
            if (e.value() != std::floor(e.value())) out.emplace_back(Op::Sqrt, e.lhs());
            break;
        default:
            break;
    }
    collect_singular(e.lhs(), out);
    if (is_binary(e.op())) collect_singular(e.rhs(), out);
}

std::vector<std::vector<double>> control_samples(const ControlSet& k) {
    if (k.kind == ControlSet::Kind::Points) return k.points;
    const Box& b = k.box;
    const std::size_t m = b.dim();
    std::vector<std::vector<double>> out;
    std::vector<double> center(m);
    for (std::size_t a = 0; a < m; ++a) center[a] = 0.5 * (b.lower[a] + b.upper[a]);
    out.push_back(center);
    if (m <= 10) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
            std::vector<double> corner(m);
            for (std::size_t a = 0; a < m; ++a) corner[a] = (mask >> a) & 1U ? b.upper[a] : b.lower[a];
            out.push_back(std::move(corner));
        }
    }
    return out;
}

}  // namespace

ValidationReport validate(const ProblemDefinition& d) {
    ValidationReport r;
    auto bad = [&](std::string s) { r.violations.push_back(std::move(s)); };

    if (d.order < 1) bad("order must be at least 1");
    if (d.state_dim < 1) bad("state dimension must be at least 1");
    if (d.control_dim < 1) bad("control dimension must be at least 1");
    if (!(d.horizon > 0.0) || !std::isfinite(d.horizon)) bad("horizon must be positive and finite");
    if (!r.ok()) return r;

    const int k = d.order;
    const auto n = static_cast<std::size_t>(d.state_dim);
    const auto m = static_cast<std::size_t>(d.control_dim);
    const Schema schema = Schema::jets(k, d.state_dim, d.control_dim);

    if (d.dynamics.size() != n)
        bad("expected " + std::to_string(n) + " dynamics expressions, got " + std::to_string(d.dynamics.size()));
    for (std::size_t j = 0; j < d.dynamics.size(); ++j) {
        const std::string label = "f" + std::to_string(j + 1);
        for (const Symbol& s : free_symbols(d.dynamics[j])) {
            if (!schema.contains(s)) {
                bad(label + " uses " + s.name() + ", which is outside the problem's jet space");
            } else if (s.kind == SymbolKind::Costate) {
                bad(label + " uses the co-state variable " + s.name() + " (co-state in dynamics)");
            } else if (s.kind == SymbolKind::State && s.order >= k) {
                bad(label + " uses " + s.name() + "; dynamics may depend on x-jets up to order " +
                    std::to_string(k - 1) + " only");
            } else if (s.kind == SymbolKind::Control && s.order > 0) {
                bad(label + " uses the control derivative " + s.name());
            }
        }
    }
    for (const Symbol& s : free_symbols(d.cost)) {
        if (s.kind == SymbolKind::Control) {
            bad("cost uses " + s.name() + " (cost depends on control)");
        } else if (s.kind == SymbolKind::Costate) {
            bad("cost uses the co-state variable " + s.name());
        } else if (s.kind == SymbolKind::State && (s.order >= k || !schema.contains(s))) {
            bad("cost uses " + s.name() + "; terminal cost may depend on x-jets up to order " +
                std::to_string(k - 1) + " only");
        }
    }

    const ControlSet& K = d.control_set;
    bool k_ok = true;
    if (K.kind == ControlSet::Kind::Points) {
        if (K.points.empty()) {
            bad("control set is empty");
            k_ok = false;
        }
        for (const auto& p : K.points) {
            if (p.size() != m) {
                bad("control point has dimension " + std::to_string(p.size()) + ", expected " + std::to_string(m));
                k_ok = false;
            } else if (!std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); })) {
                bad("control point has a non-finite coordinate");
                k_ok = false;
            }
        }
    } else if (!box_well_formed(K.box, m, false)) {
        bad("control box is malformed (dimension, ordering or non-finite bounds)");
        k_ok = false;
    }

    if (!(d.hat_inflation >= 1.0) || !std::isfinite(d.hat_inflation)) bad("hat inflation must be finite and >= 1");
    if (d.hat) {
        if (!box_well_formed(*d.hat, m, false)) {
            bad("admissible superset box is malformed");
        } else if (k_ok) {
            const Box kb = K.bounding_box();
            if (!d.hat->contains(kb.lower, 1e-12) || !d.hat->contains(kb.upper, 1e-12))
                bad("control set is not contained in the admissible superset");
        }
    }

    if (d.derivative_bounds.size() > static_cast<std::size_t>(k - 1))
        bad("derivative bounds given for orders beyond k-1");
    for (std::size_t l = 0; l < d.derivative_bounds.size(); ++l) {
        if (!box_well_formed(d.derivative_bounds[l], m, true))
            bad("derivative bound box of order " + std::to_string(l + 1) + " is malformed");
    }

    if (d.initial.size() != n * static_cast<std::size_t>(k)) {
        bad("initial jet needs " + std::to_string(n * static_cast<std::size_t>(k)) + " values, got " +
            std::to_string(d.initial.size()));
    } else if (!std::all_of(d.initial.begin(), d.initial.end(), [](double v) { return std::isfinite(v); })) {
        bad("initial jet has a non-finite value");
    }

    if (!r.ok()) return r;

    // Crude reachability probe: initial jet, three times, a few controls.
    std::vector<std::pair<Op, Expr>> singular;
    for (const Expr& f : d.dynamics) collect_singular(f, singular);
    if (!singular.empty()) {
        std::vector<double> slots(schema.slot_count(), 0.0);
        for (int s = 0; s < k; ++s)
            for (std::size_t i = 0; i < n; ++i)
                slots[schema.slot(Symbol::state(static_cast<int>(i), s))] = d.initial[static_cast<std::size_t>(s) * n + i];
        const auto us = control_samples(K);
        for (const auto& [op, arg] : singular) {
            const Program prog(arg, schema);
            bool hit = false;
            for (double t : {0.0, 0.5 * d.horizon, d.horizon}) {
                slots[0] = t;
                for (const auto& u : us) {
                    for (std::size_t a = 0; a < m; ++a) slots[schema.slot(Symbol::control(static_cast<int>(a)))] = u[a];
                    double v = 0.0;
                    try {
                        v = prog(slots);
                    } catch (const NonFiniteResult&) {
                        hit = true;
                        break;
                    }
                    if ((op == Op::Div && v == 0.0) || (op == Op::Log && v <= 0.0) || (op == Op::Sqrt && v < 0.0))
                        hit = true;
                }
                if (hit) break;
            }
            if (hit)
                r.warnings.push_back("dynamics are singular near the initial jet: argument '" + to_string(arg) + "'");
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

Problem::Problem(ProblemDefinition def) : def_(std::move(def)), schema_(Schema::jets(1, 1, 1)) {
    ValidationReport report = validate(def_);
    if (!report.ok()) throw ValidationFailed(std::move(report.violations));
    warnings_ = std::move(report.warnings);

    const int k = def_.order;
    const int n = def_.state_dim;
    const int m = def_.control_dim;
    schema_ = Schema::jets(k, n, m);
    slot_count_ = schema_.slot_count();
    u_offset_ = schema_.slot(Symbol::control(0, 0));
    p_offset_ = schema_.slot(Symbol::costate(0, 0));

    hat_ = def_.hat ? *def_.hat : inflate(def_.control_set.bounding_box(), def_.hat_inflation);
    derivative_bounds_ = def_.derivative_bounds;
    while (derivative_bounds_.size() < static_cast<std::size_t>(k - 1))
        derivative_bounds_.push_back(Box::unbounded(static_cast<std::size_t>(m)));

    derived_ = build_derived_system(def_.dynamics, k, schema_);
    adjoint_rhs_ = hopmp::adjoint_rhs(def_.dynamics, k, schema_);
    terminal_derived_ = terminal_conditions(def_.dynamics, def_.cost, k, schema_, TerminalConvention::Derived);
    terminal_printed_ = terminal_conditions(def_.dynamics, def_.cost, k, schema_, TerminalConvention::AsPrinted);

    for (const Expr& e : def_.dynamics) f_.emplace_back(e, schema_);
    cost_program_ = Program(def_.cost, schema_);
    for (int l = k; l <= 2 * k - 1; ++l)
        for (const Expr& e : derived_.at(l)) derived_programs_.emplace_back(e, schema_);
    for (const Expr& e : adjoint_rhs_) adjoint_programs_.emplace_back(e, schema_);
    for (const auto& level : terminal_derived_)
        for (const Expr& e : level) terminal_derived_programs_.emplace_back(e, schema_);
    for (const auto& level : terminal_printed_)
        for (const Expr& e : level) terminal_printed_programs_.emplace_back(e, schema_);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            for (int s = 0; s < k; ++s)
                dfdx_.emplace_back(differentiate(def_.dynamics[static_cast<std::size_t>(j)], Symbol::state(i, s)),
                                   schema_);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < k; ++s) dcdx_.emplace_back(differentiate(def_.cost, Symbol::state(i, s)), schema_);
}

const Program& Problem::terminal(TerminalConvention c, int l, int i) const {
    const auto& progs = c == TerminalConvention::Derived ? terminal_derived_programs_ : terminal_printed_programs_;
    return progs.at(static_cast<std::size_t>(l * def_.state_dim + i));
}

const Program& Problem::dfdx(int j, int i, int s) const {
    const int n = def_.state_dim;
    const int k = def_.order;
    return dfdx_.at(static_cast<std::size_t>((j * n + i) * k + s));
}

const Program& Problem::dcdx(int i, int s) const {
    return dcdx_.at(static_cast<std::size_t>(i * def_.order + s));
}

double pontryagin_lagrangian(const Problem& problem, const Jet& state, const Jet& costate,
                             std::span<const double> omega) {
    const int k = problem.order();
    const int n = problem.state_dim();
    if (state.order < k || state.dim != n) throw MissingJets("state jet must reach order k");
    if (costate.dim != n || costate.values.size() < static_cast<std::size_t>(n))
        throw MissingJets("co-state jet has the wrong dimension");
    if (omega.size() != static_cast<std::size_t>(problem.control_dim()))
        throw Error("control value has the wrong dimension");

    std::vector<double> slots(problem.slot_count(), 0.0);
    slots[0] = state.t;
    for (int s = 0; s < k; ++s)
        for (int i = 0; i < n; ++i) slots[problem.x_slot(s, i)] = state.level(s)[static_cast<std::size_t>(i)];
    for (int a = 0; a < problem.control_dim(); ++a) slots[problem.u_slot(0, a)] = omega[static_cast<std::size_t>(a)];

    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        const double pj = costate.level(0)[static_cast<std::size_t>(j)];
        sum += pj * (state.level(k)[static_cast<std::size_t>(j)] - problem.f(j)(slots));
    }
    return sum;
}

}  // namespace hopmp
