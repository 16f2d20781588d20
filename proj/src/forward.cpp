#include "hopmp/forward.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hopmp/errors.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

std::vector<double> ReducedSystem::initial_state(const Problem& problem) const {
    const auto init = problem.initial();
    return {init.begin(), init.end()};
}

void ReducedSystem::rhs(const Problem& problem, double t, std::span<const double> y, std::span<double> slots,
                        std::span<double> dy) const {
    const std::size_t low = static_cast<std::size_t>(dim);
    const std::size_t n = static_cast<std::size_t>(state_dim);
    slots[0] = t;
    std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(low), slots.begin() + 1);
    std::copy(y.begin() + static_cast<std::ptrdiff_t>(n), y.begin() + static_cast<std::ptrdiff_t>(low), dy.begin());
    for (int i = 0; i < state_dim; ++i) dy[low - n + static_cast<std::size_t>(i)] = problem.f(i)(slots);
}

ReducedSystem reduce_first_order(const Problem& problem) {
    return {problem.state_dim(), problem.order(), problem.state_dim() * problem.order()};
}

std::vector<double> build_grid(double horizon, int intervals, const std::vector<double>& breakpoints,
                               const std::vector<std::pair<double, double>>& refine, int min_steps) {
    if (intervals < 1) throw Error("grid needs at least one interval");
    const double snap = 1e-13 * horizon;
    std::vector<double> nodes(static_cast<std::size_t>(intervals) + 1);
    for (int j = 0; j <= intervals; ++j) nodes[static_cast<std::size_t>(j)] = horizon * j / intervals;
    nodes.back() = horizon;

    auto insert = [&](double b) {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), b);
        if (it != nodes.end() && *it == b) return;
        // nearest existing node
        auto near = it;
        if (it == nodes.end() || (it != nodes.begin() && b - *(it - 1) < *it - b)) near = it - 1;
        if (std::abs(*near - b) < snap && near != nodes.begin() && near + 1 != nodes.end()) {
            *near = b;
            return;
        }
        nodes.insert(it, b);
    };
    for (double b : breakpoints)
        if (b > 0.0 && b < horizon) insert(b);

    for (const auto& [lo, hi] : refine) {
        if (min_steps <= 1 || !(hi > lo)) continue;
        const auto first = std::lower_bound(nodes.begin(), nodes.end(), lo);
        const auto last = std::lower_bound(nodes.begin(), nodes.end(), hi);
        if (std::distance(first, last) >= min_steps) continue;
        for (int j = 1; j < min_steps; ++j) {
            const double t = lo + (hi - lo) * j / min_steps;
            auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
            const bool close = (it != nodes.end() && *it - t < snap) || (it != nodes.begin() && t - *(it - 1) < snap);
            if (!close) nodes.insert(it, t);
        }
    }
    return nodes;
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

std::span<const double> Trajectory::jets(std::size_t node) const {
    const std::size_t w = static_cast<std::size_t>(levels() * n_);
    return {jets_.data() + node * w, w};
}

std::span<const double> Trajectory::midpoint_state(std::size_t interval) const {
    const std::size_t w = static_cast<std::size_t>(k_ * n_);
    return {mid_.data() + interval * w, w};
}

std::size_t Trajectory::interval_at(double t) const {
    if (t_.empty() || !(t >= t_.front() && t <= t_.back()))
        throw OutOfDomain("time " + format_double(t) + " outside the trajectory grid");
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const auto idx = static_cast<std::size_t>(std::distance(t_.begin(), it));
    return std::min(idx == 0 ? 0 : idx - 1, interval_count() - 1);
}

std::vector<double> Trajectory::jets_at(double t, int max_level) const {
    const std::size_t i = interval_at(t);
    const double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
    const auto a = jets(i);
    const auto b = jets(i + 1);
    const std::size_t count = static_cast<std::size_t>((max_level + 1) * n_);
    std::vector<double> out(count);
    for (std::size_t c = 0; c < count; ++c) out[c] = w == 0.0 ? a[c] : (1.0 - w) * a[c] + w * b[c];
    return out;
}

void Trajectory::write_csv(std::ostream& os) const {
    const int m = control_.control_dim();
    os << "t";
    for (int i = 0; i < n_; ++i)
        for (int s = 0; s < levels(); ++s) os << ",x" << i + 1 << '_' << s;
    for (int a = 0; a < m; ++a) os << ",u" << a + 1;
    os << '\n';
    std::vector<double> u(static_cast<std::size_t>(m));
    for (std::size_t node = 0; node < t_.size(); ++node) {
        os << format_double(t_[node]);
        for (int i = 0; i < n_; ++i)
            for (int s = 0; s < levels(); ++s) os << ',' << format_double(x(node, s, i));
        const std::size_t seg = segment_[std::min(node, interval_count() - 1)];
        control_.eval_in_piece(seg, t_[node], 0, u);
        for (double v : u) os << ',' << format_double(v);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

namespace {

class Stepper {
public:
    Stepper(const Problem& problem, const ControlCurve& u)
        : problem_(problem),
          u_(u),
          sys_(reduce_first_order(problem)),
          slots_(problem.slot_count(), 0.0),
          ujet_(static_cast<std::size_t>(problem.control_dim())),
          k1_(static_cast<std::size_t>(sys_.dim)),
          k2_(k1_.size()),
          k3_(k1_.size()),
          k4_(k1_.size()),
          tmp_(k1_.size()) {}

    const ReducedSystem& system() const { return sys_; }

    void deriv(std::size_t seg, double t, std::span<const double> y, std::span<double> dy) {
        u_.eval_in_piece(seg, t, 0, ujet_);
        for (int a = 0; a < problem_.control_dim(); ++a)
            slots_[problem_.u_slot(0, a)] = ujet_[static_cast<std::size_t>(a)];
        sys_.rhs(problem_, t, y, slots_, dy);
    }

    /// One RK4 step; k1 may be supplied from a previous evaluation at (t, y).
    void step(std::size_t seg, double t, double h, std::span<const double> y, std::span<double> out,
              bool have_k1 = false) {
        const std::size_t d = y.size();
        if (!have_k1) deriv(seg, t, y, k1_);
        for (std::size_t c = 0; c < d; ++c) tmp_[c] = y[c] + 0.5 * h * k1_[c];
        deriv(seg, t + 0.5 * h, tmp_, k2_);
        for (std::size_t c = 0; c < d; ++c) tmp_[c] = y[c] + 0.5 * h * k2_[c];
        deriv(seg, t + 0.5 * h, tmp_, k3_);
        for (std::size_t c = 0; c < d; ++c) tmp_[c] = y[c] + h * k3_[c];
        deriv(seg, t + h, tmp_, k4_);
        for (std::size_t c = 0; c < d; ++c) out[c] = y[c] + h / 6.0 * (k1_[c] + 2.0 * k2_[c] + 2.0 * k3_[c] + k4_[c]);
    }

    std::span<double> k1() { return k1_; }

private:
    const Problem& problem_;
    const ControlCurve& u_;
    ReducedSystem sys_;
    std::vector<double> slots_;
    std::vector<double> ujet_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

void check_finite(std::span<const double> y, double t) {
    for (double v : y)
        if (!std::isfinite(v)) throw NonFiniteState(t, "state component is not finite");
}

}  // namespace

void fill_derived_jets(const Problem& problem, int max_level, std::span<double> slots) {
    for (int l = problem.order(); l <= max_level; ++l)
        for (int i = 0; i < problem.state_dim(); ++i) slots[problem.x_slot(l, i)] = problem.derived(l, i)(slots);
}

void fill_stage_slots(const Problem& problem, const Trajectory& traj, std::size_t interval, Stage stage,
                      std::span<double> slots) {
    const auto& t = traj.times();
    const int k = problem.order();
    const int n = problem.state_dim();
    const int m = problem.control_dim();
    double time = 0.0;
    std::span<const double> low;
    switch (stage) {
        case Stage::Left:
            time = t[interval];
            low = traj.jets(interval);
            break;
        case Stage::Right:
            time = t[interval + 1];
            low = traj.jets(interval + 1);
            break;
        case Stage::Mid:
            time = 0.5 * (t[interval] + t[interval + 1]);
            low = traj.midpoint_state(interval);
            break;
    }
    slots[0] = time;
    std::copy(low.begin(), low.begin() + static_cast<std::ptrdiff_t>(k * n), slots.begin() + 1);
    std::vector<double> ujet(static_cast<std::size_t>(k * m));
    traj.control().eval_in_piece(traj.segment_of(interval), time, k - 1, ujet);
    for (int s = 0; s < k; ++s)
        for (int a = 0; a < m; ++a) slots[problem.u_slot(s, a)] = ujet[static_cast<std::size_t>(s * m + a)];
    fill_derived_jets(problem, 2 * k - 2, slots);
}

Trajectory integrate_forward(const Problem& problem, const ControlCurve& u, const ForwardOptions& opts) {
    if (u.horizon() != problem.horizon()) throw Error("control horizon differs from the problem horizon");
    if (u.control_dim() != problem.control_dim()) throw Error("control dimension differs from the problem");

    const int k = problem.order();
    const int n = problem.state_dim();
    const int m = problem.control_dim();
    const double T = problem.horizon();

    std::vector<std::pair<double, double>> refine;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u.piece(i).kind() != PieceKind::Constant) refine.emplace_back(u.start(i), u.end(i));

    Trajectory traj;
    traj.k_ = k;
    traj.n_ = n;
    traj.m_ = m;
    traj.control_ = u;
    traj.t_ = build_grid(T, opts.grid, u.breakpoints(), refine, opts.steps_per_smooth_segment);
    const auto& t = traj.t_;
    const std::size_t N = t.size() - 1;

    traj.segment_.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        traj.segment_[i] = u.locate(0.5 * (t[i] + t[i + 1]));
        traj.max_step_ = std::max(traj.max_step_, t[i + 1] - t[i]);
    }

    Stepper stepper(problem, u);
    const std::size_t d = static_cast<std::size_t>(stepper.system().dim);
    const std::size_t w = static_cast<std::size_t>(traj.levels() * n);
    traj.jets_.assign((N + 1) * w, 0.0);
    traj.mid_.assign(N * d, 0.0);

    std::vector<double> y = stepper.system().initial_state(problem);
    std::vector<double> next(d);
    double time = 0.0;
    try {
        std::copy(y.begin(), y.end(), traj.jets_.begin());
        for (std::size_t i = 0; i < N; ++i) {
            time = t[i];
            const double h = t[i + 1] - t[i];
            const std::size_t seg = traj.segment_[i];
            stepper.step(seg, t[i], h, y, next);
            // k1 is still the derivative at (t_i, y): reuse it for the half step.
            stepper.step(seg, t[i], 0.5 * h, y, std::span<double>(traj.mid_).subspan(i * d, d), true);
            check_finite(next, t[i + 1]);
            y.swap(next);
            std::copy(y.begin(), y.end(), traj.jets_.begin() + static_cast<std::ptrdiff_t>((i + 1) * w));
        }

        if (opts.richardson) {
            std::vector<double> fine = stepper.system().initial_state(problem);
            std::vector<double> half(d);
            for (std::size_t i = 0; i < N; ++i) {
                time = t[i];
                const double h = 0.5 * (t[i + 1] - t[i]);
                stepper.step(traj.segment_[i], t[i], h, fine, half);
                stepper.step(traj.segment_[i], t[i] + h, h, half, fine);
            }
            check_finite(fine, T);
            double diff = 0.0;
            double scale = 1.0;
            for (std::size_t c = 0; c < d; ++c) {
                diff = std::max(diff, std::abs(fine[c] - y[c]));
                scale = std::max(scale, std::abs(y[c]));
            }
            traj.error_estimate_ = diff / 15.0;
            if (traj.error_estimate_ > opts.tolerance * scale)
                throw StepTooCoarse(traj.error_estimate_ / scale, opts.tolerance);
        }

        // Higher jets from the derived system, node by node.
        std::vector<double> slots(problem.slot_count(), 0.0);
        std::vector<double> ujet(static_cast<std::size_t>(k * m));
        for (std::size_t node = 0; node <= N; ++node) {
            if (k < 2) break;
            time = t[node];
            const std::size_t seg = traj.segment_[std::min(node, N - 1)];
            auto jet = std::span<double>(traj.jets_).subspan(node * w, w);
            slots[0] = t[node];
            std::copy(jet.begin(), jet.begin() + static_cast<std::ptrdiff_t>(d), slots.begin() + 1);
            u.eval_in_piece(seg, t[node], k - 1, ujet);
            for (int s = 0; s < k; ++s)
                for (int a = 0; a < m; ++a) slots[problem.u_slot(s, a)] = ujet[static_cast<std::size_t>(s * m + a)];
            fill_derived_jets(problem, 2 * k - 2, slots);
            for (int l = k; l <= 2 * k - 2; ++l)
                for (int i = 0; i < n; ++i) jet[static_cast<std::size_t>(l * n + i)] = slots[problem.x_slot(l, i)];
        }
    } catch (const NonFiniteResult& e) {
        throw NonFiniteState(time, e.what());
    }
    return traj;
}

double terminal_cost(const Problem& problem, const Trajectory& traj) {
    std::vector<double> slots(problem.slot_count(), 0.0);
    const auto jet = traj.jets(traj.node_count() - 1);
    slots[0] = problem.horizon();
    const std::size_t low = static_cast<std::size_t>(problem.order() * problem.state_dim());
    std::copy(jet.begin(), jet.begin() + static_cast<std::ptrdiff_t>(low), slots.begin() + 1);
    return problem.cost_program()(slots);
}

double cost_of(const Problem& problem, const ControlCurve& u, const ForwardOptions& opts) {
    return terminal_cost(problem, integrate_forward(problem, u, opts));
}

}  // namespace hopmp
