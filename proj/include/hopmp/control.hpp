#pragma once

// Piecewise control curves, needle modifications and the measure distance.
//
// A curve on [0, T] is a list of segments [start_i, start_{i+1}); each segment
// carries an immutable piece (constant, polynomial or expression in the
// absolute time t). The curve is right-continuous; at t = T the last piece is
// used. Pieces are shared between curves, so splicing a needle into a curve
// copies pointers only.
//
// Text form (one record per segment, components separated by ';'):
//
//   hopmp-control v1
//   T 1
//   m 1
//   0 const -1
//   0.4 poly 0,1,0.5
//   0.5 expr sin(t)

#include <array>
#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hopmp/expr.hpp"

namespace hopmp {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const noexcept { return lower.size(); }
    bool contains(std::span<const double> v, double tol = 0.0) const;
    static Box unbounded(std::size_t dim);
};

enum class PieceKind { Constant, Polynomial, Expression };

class Piece {
public:
    static std::shared_ptr<const Piece> constant(std::vector<double> values);
    /// coefficients[a][j] multiplies t^j in component a.
    static std::shared_ptr<const Piece> polynomial(std::vector<std::vector<double>> coefficients);
    /// Each component is an expression in t only.
    static std::shared_ptr<const Piece> expression(std::vector<Expr> components);

    PieceKind kind() const noexcept { return kind_; }
    int dim() const noexcept { return static_cast<int>(exprs_.size()); }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::vector<double>>& coefficients() const noexcept { return coeffs_; }
    /// Component a as an expression in t, whatever the kind.
    const Expr& component(int a) const { return exprs_.at(static_cast<std::size_t>(a)); }

    /// out[s * dim + a] = d^s u_a / dt^s at t, s = 0..max_order.
    void eval(double t, int max_order, std::span<double> out) const;

    friend bool operator==(const Piece& a, const Piece& b);

    static constexpr int kMaxOrder = 15;

private:
    Piece() = default;
    const std::vector<Program>& derivative_programs(int order) const;

    PieceKind kind_ = PieceKind::Constant;
    std::vector<double> values_;
    std::vector<std::vector<double>> coeffs_;
    std::vector<Expr> exprs_;

    // Expression pieces differentiate lazily; each level is written once
    // under the mutex and published through ready_.
    mutable std::mutex mutex_;
    mutable std::atomic<int> ready_{-1};
    mutable std::array<std::vector<Expr>, kMaxOrder + 1> derivs_;
    mutable std::array<std::vector<Program>, kMaxOrder + 1> programs_;
};

using PiecePtr = std::shared_ptr<const Piece>;

/// Schema containing only the time variable; used for expression pieces.
const Schema& time_schema();

class ControlCurve {
public:
    struct Segment {
        double start;
        PiecePtr piece;
    };

    ControlCurve() = default;
    /// Segments must start at 0 with strictly increasing starts below T.
    /// Adjacent segments carrying equal pieces are merged.
    ControlCurve(double horizon, int control_dim, std::vector<Segment> segments);

    static ControlCurve constant(double horizon, std::vector<double> value);

    double horizon() const noexcept { return T_; }
    int control_dim() const noexcept { return m_; }
    std::size_t size() const noexcept { return segments_.size(); }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    const Piece& piece(std::size_t i) const { return *segments_.at(i).piece; }
    double start(std::size_t i) const { return segments_.at(i).start; }
    double end(std::size_t i) const {
        return i + 1 < segments_.size() ? segments_[i + 1].start : T_;
    }
    /// Interior breakpoints (segment starts other than 0).
    std::vector<double> breakpoints() const;

    /// Index of the segment containing t (right-continuous, T maps to the last).
    std::size_t locate(double t) const;

    /// Control jet at t: out[s * m + a], s = 0..max_order.
    void eval(double t, int max_order, std::span<double> out) const;
    std::vector<double> eval(double t, int max_order = 0) const;
    /// Same, using the analytic continuation of segment i.
    void eval_in_piece(std::size_t i, double t, int max_order, std::span<double> out) const;

    friend bool operator==(const ControlCurve& a, const ControlCurve& b);

private:
    double T_ = 0.0;
    int m_ = 0;
    std::vector<Segment> segments_;
};

struct DistanceBounds {
    double lower = 0.0;
    double upper = 0.0;
    double value() const noexcept { return 0.5 * (lower + upper); }
};

/// Number of samples over the whole horizon used where pieces are not
/// comparable in closed form.
inline constexpr int kDistanceSamples = 10000;

/// Measure of {t : u(t) != v(t)} as a (lower, upper) pair. Exact when each
/// overlapping pair of pieces is identical or both constant.
DistanceBounds dist_bounds(const ControlCurve& u, const ControlCurve& v);
double dist(const ControlCurve& u, const ControlCurve& v);

struct NeedleParams {
    double tau = 0.0;
    std::vector<double> omega;
    double epsilon = 0.0;
    /// Ramp constant of the smoothed needle, in (0, 1/2).
    double smoothing = 0.25;
};

/// Throws InvalidWidth unless 0 < epsilon < min(1, tau/2, T - tau) and the
/// smoothing constant lies in (0, 1/2).
void check_needle(const NeedleParams& p, double horizon);

/// omega on [tau - epsilon, tau), u elsewhere.
ControlCurve needle(const ControlCurve& u, const NeedleParams& p);

/// Needle with ramps of length smoothing * epsilon^2 on both sides, built from
/// the C^order smoothstep so the result is C^(order-1) at the ramp ends when u
/// is.
ControlCurve smooth_needle(const ControlCurve& u, const NeedleParams& p, int order);

/// Polynomial coefficients (in x, ascending) of the degree 2*order+1
/// smoothstep S with S(0)=0, S(1)=1 and vanishing derivatives up to order at
/// both ends.
std::vector<double> smoothstep_coefficients(int order);
double smoothstep(int order, double x);

/// Condition-(gamma) check by sampling each segment at `samples` points
/// (endpoints included, one-sided): values in `hat`, derivative of order l in
/// derivative_bounds[l-1] for l = 1..k-1.
std::vector<std::string> validate_control(const ControlCurve& u, const Box& hat,
                                          const std::vector<Box>& derivative_bounds, int k,
                                          int samples = 64);

std::string serialize(const ControlCurve& u);
ControlCurve deserialize(std::string_view text);

/// `const:v1,v2`, `poly:c0,c1;d0,d1`, `expr:sin(t);t`, or `file:path`.
ControlCurve parse_control_descriptor(std::string_view desc, double horizon, int control_dim);

}  // namespace hopmp
