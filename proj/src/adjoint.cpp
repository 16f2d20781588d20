#include "hopmp/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

#include "hopmp/errors.hpp"
#include "hopmp/text.hpp"

namespace hopmp {

std::span<const double> AdjointTrajectory::jets(std::size_t node) const {
    const std::size_t w = static_cast<std::size_t>(k_ * n_);
    return {p_.data() + node * w, w};
}

std::vector<double> AdjointTrajectory::jets_at(double t, int max_level) const {
    if (!(t >= t_.front() && t <= t_.back())) throw OutOfDomain("time " + format_double(t) + " outside the grid");
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(t_.begin(), it));
    i = std::min(i == 0 ? 0 : i - 1, t_.size() - 2);
    const double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
    const auto a = jets(i);
    const auto b = jets(i + 1);
    std::vector<double> out(static_cast<std::size_t>((max_level + 1) * n_));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = w == 0.0 ? a[c] : (1.0 - w) * a[c] + w * b[c];
    return out;
}

std::span<const double> ReducedCostate::values(std::size_t node) const {
    const std::size_t w = static_cast<std::size_t>(k_ * n_);
    return {q_.data() + node * w, w};
}

namespace {

// Backward RK4 over the trajectory grid. `rhs(interval, stage, z, dz)`
// evaluates the right-hand side at a stage of an interval.
using StageRhs = std::function<void(std::size_t, Stage, std::span<const double>, std::span<double>)>;

std::vector<double> integrate_backward(const Trajectory& traj, std::vector<double> terminal, const StageRhs& rhs) {
    const auto& t = traj.times();
    const std::size_t N = traj.interval_count();
    const std::size_t d = terminal.size();
    std::vector<double> out((N + 1) * d);
    std::vector<double> z = std::move(terminal);
    std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
    std::copy(z.begin(), z.end(), out.begin() + static_cast<std::ptrdiff_t>(N * d));
    for (std::size_t i = N; i-- > 0;) {
        const double h = t[i] - t[i + 1];  // negative: reversed time
        rhs(i, Stage::Right, z, k1);
        for (std::size_t c = 0; c < d; ++c) tmp[c] = z[c] + 0.5 * h * k1[c];
        rhs(i, Stage::Mid, tmp, k2);
        for (std::size_t c = 0; c < d; ++c) tmp[c] = z[c] + 0.5 * h * k2[c];
        rhs(i, Stage::Mid, tmp, k3);
        for (std::size_t c = 0; c < d; ++c) tmp[c] = z[c] + h * k3[c];
        rhs(i, Stage::Left, tmp, k4);
        for (std::size_t c = 0; c < d; ++c) {
            z[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            if (!std::isfinite(z[c])) throw NonFiniteState(t[i], "co-state component is not finite");
        }
        std::copy(z.begin(), z.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return out;
}

// Stage slots are expensive (derived jets); cache the last interval/stage.
class StageCache {
public:
    StageCache(const Problem& problem, const Trajectory& traj)
        : problem_(problem), traj_(traj), slots_(problem.slot_count(), 0.0) {}

    std::vector<double>& at(std::size_t interval, Stage stage) {
        if (!valid_ || interval != interval_ || stage != stage_) {
            fill_stage_slots(problem_, traj_, interval, stage, slots_);
            interval_ = interval;
            stage_ = stage;
            valid_ = true;
        }
        return slots_;
    }

private:
    const Problem& problem_;
    const Trajectory& traj_;
    std::vector<double> slots_;
    bool valid_ = false;
    std::size_t interval_ = 0;
    Stage stage_ = Stage::Left;
};

}  // namespace

std::vector<double> terminal_jet(const Problem& problem, const Trajectory& traj, TerminalConvention convention) {
    const int k = problem.order();
    const int n = problem.state_dim();
    if (traj.order() != k || traj.state_dim() != n || traj.levels() < std::max(1, 2 * k - 2))
        throw MissingJets("trajectory does not carry the jets required at T");
    if (traj.node_count() < 2) throw MissingJets("trajectory has no intervals");

    std::vector<double> slots(problem.slot_count(), 0.0);
    fill_stage_slots(problem, traj, traj.interval_count() - 1, Stage::Right, slots);
    std::vector<double> out(static_cast<std::size_t>(k * n));
    try {
        for (int l = 0; l < k; ++l) {
            for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(l * n + i)] = problem.terminal(convention, l, i)(slots);
            for (int i = 0; i < n; ++i) slots[problem.p_slot(l, i)] = out[static_cast<std::size_t>(l * n + i)];
        }
    } catch (const NonFiniteResult& e) {
        throw NonFiniteState(problem.horizon(), e.what());
    }
    return out;
}

AdjointTrajectory integrate_adjoint(const Problem& problem, const Trajectory& traj, TerminalConvention convention) {
    const int k = problem.order();
    const int n = problem.state_dim();
    StageCache cache(problem, traj);

    auto rhs = [&](std::size_t interval, Stage stage, std::span<const double> z, std::span<double> dz) {
        auto& slots = cache.at(interval, stage);
        for (int s = 0; s < k; ++s)
            for (int i = 0; i < n; ++i) slots[problem.p_slot(s, i)] = z[static_cast<std::size_t>(s * n + i)];
        const std::size_t top = static_cast<std::size_t>((k - 1) * n);
        std::copy(z.begin() + n, z.end(), dz.begin());
        try {
            for (int i = 0; i < n; ++i) dz[top + static_cast<std::size_t>(i)] = problem.adjoint(i)(slots);
        } catch (const NonFiniteResult& e) {
            throw NonFiniteState(slots[0], e.what());
        }
    };

    AdjointTrajectory adj;
    adj.k_ = k;
    adj.n_ = n;
    adj.convention_ = convention;
    adj.t_ = traj.times();
    adj.p_ = integrate_backward(traj, terminal_jet(problem, traj, convention), rhs);
    return adj;
}

ReducedCostate reduced_adjoint(const Problem& problem, const Trajectory& traj) {
    const int k = problem.order();
    const int n = problem.state_dim();
    StageCache cache(problem, traj);

    std::vector<double> terminal(static_cast<std::size_t>(k * n));
    {
        std::vector<double> slots(problem.slot_count(), 0.0);
        fill_stage_slots(problem, traj, traj.interval_count() - 1, Stage::Right, slots);
        for (int l = 0; l < k; ++l)
            for (int i = 0; i < n; ++i) terminal[static_cast<std::size_t>(l * n + i)] = -problem.dcdx(i, l)(slots);
    }

    auto rhs = [&](std::size_t interval, Stage stage, std::span<const double> q, std::span<double> dq) {
        auto& slots = cache.at(interval, stage);
        const auto top = static_cast<std::size_t>((k - 1) * n);
        for (int l = 0; l < k; ++l) {
            for (int i = 0; i < n; ++i) {
                double v = l > 0 ? -q[static_cast<std::size_t>((l - 1) * n + i)] : 0.0;
                for (int j = 0; j < n; ++j) v -= q[top + static_cast<std::size_t>(j)] * problem.dfdx(j, i, l)(slots);
                dq[static_cast<std::size_t>(l * n + i)] = v;
            }
        }
    };

    ReducedCostate r;
    r.k_ = k;
    r.n_ = n;
    r.t_ = traj.times();
    r.q_ = integrate_backward(traj, std::move(terminal), rhs);
    return r;
}

double crosscheck(const AdjointTrajectory& a, const ReducedCostate& r) {
    if (a.times() != r.times() || a.order() != r.order() || a.state_dim() != r.state_dim())
        throw GridMismatch("adjoint and reduced co-state live on different grids");
    const int k = a.order();
    const int n = a.state_dim();
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t node = 0; node < a.node_count(); ++node) {
        for (int i = 0; i < n; ++i) {
            const double q = r.q(node, k - 1, i);
            diff = std::max(diff, std::abs(a.p(node, 0, i) - q));
            scale = std::max(scale, std::abs(q));
        }
    }
    if (diff == 0.0) return 0.0;
    return scale > 0.0 ? diff / scale : diff;
}

void write_csv(std::ostream& os, const AdjointTrajectory& a, const ReducedCostate* r) {
    const int k = a.order();
    const int n = a.state_dim();
    if (r && r->times() != a.times()) throw GridMismatch("reduced co-state grid differs");
    os << "t";
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < k; ++s) os << ",p" << i + 1 << '_' << s;
    if (r)
        for (int l = 0; l < k; ++l)
            for (int i = 0; i < n; ++i) os << ",q" << l << '_' << i + 1;
    os << '\n';
    for (std::size_t node = 0; node < a.node_count(); ++node) {
        os << format_double(a.times()[node]);
        for (int i = 0; i < n; ++i)
            for (int s = 0; s < k; ++s) os << ',' << format_double(a.p(node, s, i));
        if (r)
            for (int l = 0; l < k; ++l)
                for (int i = 0; i < n; ++i) os << ',' << format_double(r->q(node, l, i));
        os << '\n';
    }
}

}  // namespace hopmp
