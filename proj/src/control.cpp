#include "hopmp/control.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "hopmp/errors.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

bool Box::contains(std::span<const double> v, double tol) const {
    if (v.size() != lower.size()) return false;
    for (std::size_t a = 0; a < v.size(); ++a) {
        if (!(v[a] >= lower[a] - tol && v[a] <= upper[a] + tol)) return false;
    }
    return true;
}

Box Box::unbounded(std::size_t dim) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(dim, -inf), std::vector<double>(dim, inf)};
}

const Schema& time_schema() {
    static const Schema schema(1, 0, 0, 0, 0, -1);
    return schema;
}

// ---------------------------------------------------------------------------
// Pieces
// ---------------------------------------------------------------------------

std::shared_ptr<const Piece> Piece::constant(std::vector<double> values) {
    std::shared_ptr<Piece> p(new Piece());
    p->kind_ = PieceKind::Constant;
    for (double v : values) p->exprs_.push_back(Expr::constant(v));
    p->values_ = std::move(values);
    return p;
}

std::shared_ptr<const Piece> Piece::polynomial(std::vector<std::vector<double>> coefficients) {
    std::shared_ptr<Piece> p(new Piece());
    p->kind_ = PieceKind::Polynomial;
    const Expr t = Expr::variable(Symbol::time());
    for (const auto& c : coefficients) {
        Expr e = Expr::constant(0.0);
        for (std::size_t j = 0; j < c.size(); ++j)
            e = e + Expr::constant(c[j]) * pow(t, static_cast<double>(j));
        p->exprs_.push_back(e);
    }
    p->coeffs_ = std::move(coefficients);
    return p;
}

std::shared_ptr<const Piece> Piece::expression(std::vector<Expr> components) {
    for (const Expr& e : components) {
        for (const Symbol& s : free_symbols(e))
            if (s.kind != SymbolKind::Time) throw UnknownSymbol(s.name());
    }
    std::shared_ptr<Piece> p(new Piece());
    p->kind_ = PieceKind::Expression;
    p->exprs_ = std::move(components);
    return p;
}

const std::vector<Program>& Piece::derivative_programs(int order) const {
    if (order > kMaxOrder) throw Error("control derivative order " + std::to_string(order) + " not supported");
    if (ready_.load(std::memory_order_acquire) >= order) return programs_[static_cast<std::size_t>(order)];
    std::lock_guard lock(mutex_);
    for (int l = ready_.load(std::memory_order_relaxed) + 1; l <= order; ++l) {
        const auto idx = static_cast<std::size_t>(l);
        if (l == 0) {
            derivs_[0] = exprs_;
        } else {
            derivs_[idx].clear();
            for (const Expr& e : derivs_[idx - 1])
                derivs_[idx].push_back(differentiate(e, Symbol::time()));
        }
        programs_[idx].clear();
        for (const Expr& e : derivs_[idx]) programs_[idx].emplace_back(e, time_schema());
        ready_.store(l, std::memory_order_release);
    }
    return programs_[static_cast<std::size_t>(order)];
}

void Piece::eval(double t, int max_order, std::span<double> out) const {
    const auto m = static_cast<std::size_t>(dim());
    switch (kind_) {
        case PieceKind::Constant:
            std::copy(values_.begin(), values_.end(), out.begin());
            std::fill(out.begin() + static_cast<std::ptrdiff_t>(m),
                      out.begin() + static_cast<std::ptrdiff_t>(m * static_cast<std::size_t>(max_order + 1)),
                      0.0);
            return;
        case PieceKind::Polynomial:
            for (std::size_t a = 0; a < m; ++a) {
                std::vector<double> c = coeffs_[a];
                for (int s = 0; s <= max_order; ++s) {
                    double v = 0.0;
                    for (std::size_t j = c.size(); j-- > 0;) v = v * t + c[j];
                    out[static_cast<std::size_t>(s) * m + a] = v;
                    // differentiate the coefficient list in place
                    for (std::size_t j = 1; j < c.size(); ++j) c[j - 1] = c[j] * static_cast<double>(j);
                    if (!c.empty()) c.back() = 0.0;
                }
            }
            return;
        case PieceKind::Expression: {
            const std::array<double, 1> slots{t};
            for (int s = 0; s <= max_order; ++s) {
                const auto& progs = derivative_programs(s);
                for (std::size_t a = 0; a < m; ++a) out[static_cast<std::size_t>(s) * m + a] = progs[a](slots);
            }
            return;
        }
    }
}

bool operator==(const Piece& a, const Piece& b) {
    if (&a == &b) return true;
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
        case PieceKind::Constant:
            return a.values_ == b.values_;
        case PieceKind::Polynomial:
            return a.coeffs_ == b.coeffs_;
        case PieceKind::Expression:
            return a.exprs_ == b.exprs_;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

namespace {

bool same_piece(const PiecePtr& a, const PiecePtr& b) { return a == b || *a == *b; }

}  // namespace

ControlCurve::ControlCurve(double horizon, int control_dim, std::vector<Segment> segments)
    : T_(horizon), m_(control_dim) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error("control horizon must be positive");
    if (segments.empty()) throw Error("control curve needs at least one segment");
    if (segments.front().start != 0.0) throw Error("first control segment must start at 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        if (!s.piece || s.piece->dim() != control_dim)
            throw Error("control piece dimension does not match the control dimension");
        if (i > 0 && !(s.start > segments[i - 1].start))
            throw Error("control breakpoints must be strictly increasing");
        if (!(s.start < horizon)) throw Error("control breakpoint at or beyond the horizon");
    }
    for (auto& s : segments) {
        if (!segments_.empty() && same_piece(segments_.back().piece, s.piece)) continue;
        segments_.push_back(std::move(s));
    }
}

ControlCurve ControlCurve::constant(double horizon, std::vector<double> value) {
    const int m = static_cast<int>(value.size());
    return ControlCurve(horizon, m, {{0.0, Piece::constant(std::move(value))}});
}

std::vector<double> ControlCurve::breakpoints() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < segments_.size(); ++i) out.push_back(segments_[i].start);
    return out;
}

std::size_t ControlCurve::locate(double t) const {
    if (!(t >= 0.0 && t <= T_))
        throw OutOfDomain("time " + format_double(t) + " outside [0, " + format_double(T_) + "]");
    const auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                     [](double v, const Segment& s) { return v < s.start; });
    return static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
}

void ControlCurve::eval(double t, int max_order, std::span<double> out) const {
    eval_in_piece(locate(t), t, max_order, out);
}

std::vector<double> ControlCurve::eval(double t, int max_order) const {
    std::vector<double> out(static_cast<std::size_t>((max_order + 1) * m_));
    eval(t, max_order, out);
    return out;
}

void ControlCurve::eval_in_piece(std::size_t i, double t, int max_order, std::span<double> out) const {
    segments_.at(i).piece->eval(t, max_order, out);
}

bool operator==(const ControlCurve& a, const ControlCurve& b) {
    if (a.T_ != b.T_ || a.m_ != b.m_ || a.segments_.size() != b.segments_.size()) return false;
    for (std::size_t i = 0; i < a.segments_.size(); ++i) {
        if (a.segments_[i].start != b.segments_[i].start) return false;
        if (!same_piece(a.segments_[i].piece, b.segments_[i].piece)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Distance
// ---------------------------------------------------------------------------

namespace {

bool values_differ(std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = 1.0 + std::max(std::abs(a[i]), std::abs(b[i]));
        if (!(std::abs(a[i] - b[i]) <= 1e-12 * scale)) return true;
    }
    return false;
}

}  // namespace

DistanceBounds dist_bounds(const ControlCurve& u, const ControlCurve& v) {
    if (u.horizon() != v.horizon() || u.control_dim() != v.control_dim())
        throw Error("dist requires controls on the same horizon and dimension");
    const double T = u.horizon();
    std::vector<double> cuts{0.0};
    for (double b : u.breakpoints()) cuts.push_back(b);
    for (double b : v.breakpoints()) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(T);

    const auto m = static_cast<std::size_t>(u.control_dim());
    std::vector<double> a(m), b(m);
    DistanceBounds out;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double lo = cuts[c];
        const double hi = cuts[c + 1];
        const std::size_t iu = u.locate(lo);
        const std::size_t iv = v.locate(lo);
        const Piece& pu = u.piece(iu);
        const Piece& pv = v.piece(iv);
        if (&pu == &pv || pu == pv) continue;
        if (pu.kind() == PieceKind::Constant && pv.kind() == PieceKind::Constant) {
            if (values_differ(pu.values(), pv.values())) {
                out.lower += hi - lo;
                out.upper += hi - lo;
            }
            continue;
        }
        const int cells = std::max(16, static_cast<int>(std::ceil(kDistanceSamples * (hi - lo) / T)));
        const double w = (hi - lo) / cells;
        auto differs = [&](double t) {
            u.eval_in_piece(iu, t, 0, a);
            v.eval_in_piece(iv, t, 0, b);
            return values_differ(a, b);
        };
        bool left = differs(lo);
        for (int j = 0; j < cells; ++j) {
            const double t1 = j + 1 == cells ? hi : lo + (j + 1) * w;
            const bool mid = differs(lo + (j + 0.5) * w);
            const bool right = differs(t1);
            if (left && mid && right) out.lower += w;
            if (left || mid || right) out.upper += w;
            left = right;
        }
    }
    return out;
}

double dist(const ControlCurve& u, const ControlCurve& v) { return dist_bounds(u, v).value(); }

// ---------------------------------------------------------------------------
// Needles
// ---------------------------------------------------------------------------

void check_needle(const NeedleParams& p, double horizon) {
    const double limit = std::min({1.0, p.tau / 2.0, horizon - p.tau});
    if (!(p.epsilon > 0.0 && p.epsilon < limit))
        throw InvalidWidth("needle width " + format_double(p.epsilon) +
                           " must lie in (0, min(1, tau/2, T - tau)) = (0, " + format_double(limit) + ")");
    if (!(p.smoothing > 0.0 && p.smoothing < 0.5))
        throw InvalidWidth("smoothing constant must lie in (0, 1/2)");
}

namespace {

using Segments = std::vector<ControlCurve::Segment>;

// Segments of u restricted to [lo, hi).
void append_range(const ControlCurve& u, double lo, double hi, Segments& out) {
    if (!(hi > lo)) return;
    const std::size_t first = u.locate(lo);
    out.push_back({lo, u.segments()[first].piece});
    for (std::size_t i = first + 1; i < u.size() && u.start(i) < hi; ++i) out.push_back(u.segments()[i]);
}

Expr ramp_expr(const Expr& from, const Expr& to, double start, double length,
               const std::vector<double>& coeffs) {
    const Expr phi = (Expr::variable(Symbol::time()) - Expr::constant(start)) / Expr::constant(length);
    Expr s = Expr::constant(0.0);
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
        if (coeffs[j] == 0.0) continue;
        s = s + Expr::constant(coeffs[j]) * pow(phi, static_cast<double>(j));
    }
    return from + s * (to - from);
}

// Ramp pieces on [lo, hi) blending u into omega (towards_omega) or back.
void append_ramp(const ControlCurve& u, const std::vector<double>& omega, double lo, double hi,
                 bool towards_omega, const std::vector<double>& coeffs, Segments& out) {
    Segments base;
    append_range(u, lo, hi, base);
    const double start = lo;
    const double length = hi - lo;
    for (const auto& seg : base) {
        std::vector<Expr> comps;
        for (int a = 0; a < u.control_dim(); ++a) {
            const Expr ua = seg.piece->component(a);
            const Expr wa = Expr::constant(omega[static_cast<std::size_t>(a)]);
            comps.push_back(towards_omega ? ramp_expr(ua, wa, start, length, coeffs)
                                          : ramp_expr(wa, ua, start, length, coeffs));
        }
        out.push_back({seg.start, Piece::expression(std::move(comps))});
    }
}

void check_omega(const ControlCurve& u, const NeedleParams& p) {
    if (p.omega.size() != static_cast<std::size_t>(u.control_dim()))
        throw Error("needle ceiling has the wrong dimension");
}

}  // namespace

ControlCurve needle(const ControlCurve& u, const NeedleParams& p) {
    check_needle(p, u.horizon());
    check_omega(u, p);
    const double a = p.tau - p.epsilon;
    Segments segs;
    append_range(u, 0.0, a, segs);
    segs.push_back({a, Piece::constant(p.omega)});
    append_range(u, p.tau, u.horizon(), segs);
    return ControlCurve(u.horizon(), u.control_dim(), std::move(segs));
}

ControlCurve smooth_needle(const ControlCurve& u, const NeedleParams& p, int order) {
    check_needle(p, u.horizon());
    check_omega(u, p);
    const double ramp = p.smoothing * p.epsilon * p.epsilon;
    const double a = p.tau - p.epsilon;
    const double a0 = a - ramp;
    const double b1 = p.tau + ramp;
    if (!(a0 > 0.0) || !(b1 < u.horizon()) || !(a0 < a) || !(p.tau < b1))
        throw InvalidWidth("smoothed needle ramps do not fit inside (0, T)");
    const auto coeffs = smoothstep_coefficients(order);

    Segments segs;
    append_range(u, 0.0, a0, segs);
    append_ramp(u, p.omega, a0, a, true, coeffs, segs);
    segs.push_back({a, Piece::constant(p.omega)});
    append_ramp(u, p.omega, p.tau, b1, false, coeffs, segs);
    append_range(u, b1, u.horizon(), segs);
    return ControlCurve(u.horizon(), u.control_dim(), std::move(segs));
}

std::vector<double> smoothstep_coefficients(int order) {
    if (order < 0) throw Error("smoothstep order must be non-negative");
    auto binom = [](int n, int r) {
        double c = 1.0;
        for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
        return c;
    };
    std::vector<double> c(static_cast<std::size_t>(2 * order + 2), 0.0);
    for (int n = 0; n <= order; ++n) {
        const double sgn = n % 2 == 0 ? 1.0 : -1.0;
        c[static_cast<std::size_t>(order + 1 + n)] =
            sgn * binom(order + n, n) * binom(2 * order + 1, order - n);
    }
    return c;
}

double smoothstep(int order, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const auto c = smoothstep_coefficients(order);
    double v = 0.0;
    for (std::size_t j = c.size(); j-- > 0;) v = v * x + c[j];
    return v;
}

// ---------------------------------------------------------------------------
// Condition (gamma)
// ---------------------------------------------------------------------------

std::vector<std::string> validate_control(const ControlCurve& u, const Box& hat,
                                          const std::vector<Box>& derivative_bounds, int k,
                                          int samples) {
    std::vector<std::string> violations;
    const auto m = static_cast<std::size_t>(u.control_dim());
    if (hat.dim() != m) {
        violations.push_back("admissible box has dimension " + std::to_string(hat.dim()) +
                             ", control has " + std::to_string(m));
        return violations;
    }
    const int orders = std::max(0, k - 1);
    std::vector<double> jet(m * static_cast<std::size_t>(orders + 1));
    samples = std::max(samples, 2);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double lo = u.start(i);
        const double hi = u.end(i);
        bool reported = false;
        for (int j = 0; j < samples && !reported; ++j) {
            const double t = lo + (hi - lo) * j / (samples - 1);
            try {
                u.eval_in_piece(i, t, orders, jet);
            } catch (const Error& e) {
                violations.push_back("segment " + std::to_string(i) + " at t=" + format_double(t) +
                                     ": " + e.what());
                reported = true;
                break;
            }
            const std::span<const double> all(jet);
            if (!hat.contains(all.subspan(0, m), 1e-9)) {
                violations.push_back("segment " + std::to_string(i) + " leaves the admissible box at t=" +
                                     format_double(t));
                reported = true;
            }
            for (int l = 1; l <= orders && !reported; ++l) {
                if (static_cast<std::size_t>(l) > derivative_bounds.size()) break;
                const Box& box = derivative_bounds[static_cast<std::size_t>(l - 1)];
                if (!box.contains(all.subspan(static_cast<std::size_t>(l) * m, m), 1e-9)) {
                    violations.push_back("segment " + std::to_string(i) + " derivative of order " +
                                         std::to_string(l) + " out of bounds at t=" + format_double(t));
                    reported = true;
                }
            }
        }
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Text form
// ---------------------------------------------------------------------------

std::string serialize(const ControlCurve& u) {
    std::ostringstream os;
    os << "hopmp-control v1\n";
    os << "T " << format_double(u.horizon()) << "\n";
    os << "m " << u.control_dim() << "\n";
    for (const auto& seg : u.segments()) {
        const Piece& p = *seg.piece;
        os << format_double(seg.start) << ' ';
        switch (p.kind()) {
            case PieceKind::Constant:
                os << "const " << join_doubles(p.values(), ";");
                break;
            case PieceKind::Polynomial: {
                os << "poly ";
                for (std::size_t a = 0; a < p.coefficients().size(); ++a) {
                    if (a > 0) os << ';';
                    os << join_doubles(p.coefficients()[a], ",");
                }
                break;
            }
            case PieceKind::Expression:
                os << "expr ";
                for (int a = 0; a < p.dim(); ++a) {
                    if (a > 0) os << ';';
                    os << to_string(p.component(a));
                }
                break;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

PiecePtr parse_piece(std::string_view kind, std::string_view payload, int m) {
    const auto comps = split(payload, ';');
    if (kind == "const") {
        // A single component may also be given comma-separated.
        std::vector<double> values;
        for (auto c : comps)
            for (auto v : split(c, ',')) values.push_back(parse_double(v));
        if (static_cast<int>(values.size()) != m) throw Error("constant piece has the wrong dimension");
        return Piece::constant(std::move(values));
    }
    if (static_cast<int>(comps.size()) != m) throw Error("piece has the wrong number of components");
    if (kind == "poly") {
        std::vector<std::vector<double>> coeffs;
        for (auto c : comps) {
            std::vector<double> row;
            for (auto v : split(c, ',')) row.push_back(parse_double(v));
            coeffs.push_back(std::move(row));
        }
        return Piece::polynomial(std::move(coeffs));
    }
    if (kind == "expr") {
        std::vector<Expr> exprs;
        for (auto c : comps) exprs.push_back(parse(trim(c), time_schema()));
        return Piece::expression(std::move(exprs));
    }
    throw Error("unknown piece kind '" + std::string(kind) + "'");
}

}  // namespace

ControlCurve deserialize(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            const auto s = trim(line);
            if (!s.empty() && s.front() != '#') {
                line = std::string(s);
                return true;
            }
        }
        return false;
    };
    if (!next_line() || line != "hopmp-control v1") throw Error("missing 'hopmp-control v1' header");
    if (!next_line() || line.rfind("T ", 0) != 0) throw Error("missing horizon line");
    const double T = parse_double(std::string_view(line).substr(2));
    if (!next_line() || line.rfind("m ", 0) != 0) throw Error("missing dimension line");
    const int m = static_cast<int>(parse_double(std::string_view(line).substr(2)));
    std::vector<ControlCurve::Segment> segs;
    while (next_line()) {
        const std::string_view rec(line);
        const auto sp1 = rec.find(' ');
        const auto sp2 = sp1 == std::string_view::npos ? sp1 : rec.find(' ', sp1 + 1);
        if (sp2 == std::string_view::npos) throw Error("malformed control record '" + line + "'");
        segs.push_back({parse_double(rec.substr(0, sp1)),
                        parse_piece(rec.substr(sp1 + 1, sp2 - sp1 - 1), rec.substr(sp2 + 1), m)});
    }
    return ControlCurve(T, m, std::move(segs));
}

ControlCurve parse_control_descriptor(std::string_view desc, double horizon, int control_dim) {
    const auto colon = desc.find(':');
    if (colon == std::string_view::npos) throw Error("control descriptor needs a 'kind:' prefix");
    const auto kind = trim(desc.substr(0, colon));
    const auto payload = desc.substr(colon + 1);
    if (kind == "file") {
        std::ifstream in{std::string(trim(payload))};
        if (!in) throw Error("cannot open control file '" + std::string(trim(payload)) + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        ControlCurve u = deserialize(ss.str());
        if (u.horizon() != horizon || u.control_dim() != control_dim)
            throw Error("control file does not match the problem horizon or dimension");
        return u;
    }
    return ControlCurve(horizon, control_dim, {{0.0, parse_piece(kind, payload, control_dim)}});
}

}  // namespace hopmp
