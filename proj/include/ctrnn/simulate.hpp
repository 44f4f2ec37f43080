#pragma once

// Trajectory generation: the forward Euler recurrence for discrete models and
// a classical fourth-order Runge-Kutta reference for continuous ones.

#include "ctrnn/model.hpp"
#include "ctrnn/parallel.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ctrnn {

/// Uniform slicing of [start, end] into n_steps pieces. Sample times are
/// start + k * step, with the last one pinned to `end`.
template <typename Scalar>
struct TimeGrid {
    Scalar start = Scalar(0);
    Scalar end = Scalar(1);
    Eigen::Index n_steps = 1;

    TimeGrid() = default;
    TimeGrid(Scalar a, Scalar b, Eigen::Index n) : start(a), end(b), n_steps(n)
    {
        using std::isfinite;
        if (!isfinite(a) || !isfinite(b) || !(b > a))
            throw DomainError("time grid needs finite endpoints with end > start");
        if (n < 1)
            throw DomainError("time grid needs at least one step");
    }

    Scalar step() const { return (end - start) / Scalar(n_steps); }
    Scalar time(Eigen::Index k) const
    {
        if (k == n_steps)
            return end;
        return start + Scalar(k) * step();
    }
};

enum class Generator { Euler, Reference };

inline std::string_view to_string(Generator g)
{
    return g == Generator::Euler ? "euler" : "reference";
}

template <typename Scalar>
struct Trajectory {
    TimeGrid<Scalar> grid;
    MatrixX<Scalar> states;      ///< row k = h(t_k)
    MatrixX<Scalar> inputs_used; ///< row k = x(t_k)
    Form form = Form::Nonlinear;
    Scalar gain = Scalar(1);
    Generator generator = Generator::Euler;
    bool diverged = false;
    /// Index of the first row that left the finite range (row is kept).
    std::optional<Eigen::Index> first_bad_index;
};

/// Magnitude above which a state is treated as diverged.
inline constexpr double kDivergenceThreshold = 1e100;

namespace detail {

template <typename Scalar>
bool is_bad_state(const VectorX<Scalar>& h)
{
    return !h.allFinite() || (h.size() > 0 && h.cwiseAbs().maxCoeff() > Scalar(kDivergenceThreshold));
}

template <typename Scalar>
void check_signal(const Model<Scalar>& model, const InputSignal<Scalar>& signal)
{
    if (signal.n_inputs() != model.n_inputs())
        throw DimensionError("signal has " + std::to_string(signal.n_inputs()) +
                             " channels, model expects " + std::to_string(model.n_inputs()));
}

template <typename Scalar>
void truncate_at(Trajectory<Scalar>& traj, Eigen::Index bad_row)
{
    traj.diverged = true;
    traj.first_bad_index = bad_row;
    traj.states.conservativeResize(bad_row + 1, Eigen::NoChange);
    traj.inputs_used.conservativeResize(bad_row + 1, Eigen::NoChange);
}

} // namespace detail

/// One step of h_{k+1} = h_k + (gain * delta) F0(h_k, x_k). The effective step
/// is a single stored scalar, so models sharing it produce identical bits.
template <typename Scalar>
VectorX<Scalar> euler_step(const Model<Scalar>& model, const StateVector<Scalar>& h,
                           const StateVector<Scalar>& x)
{
    if (!model.is_discrete())
        throw DomainError("euler_step needs a discrete model");
    const Scalar s = model.effective_step();
    return h + s * rhs_base(model, h, x);
}

/// Euler recurrence over `grid`, inputs sampled at the left end of every slice.
template <typename Scalar>
Trajectory<Scalar> simulate(const Model<Scalar>& model, const StateVector<Scalar>& h0,
                            const InputSignal<Scalar>& signal, const TimeGrid<Scalar>& grid)
{
    using std::abs;
    if (!model.is_discrete())
        throw DomainError("simulate needs a discrete model; use reference_solve for continuous ones");
    if (abs(grid.step() - model.delta()) > Scalar(1e-12) * model.delta())
        throw GridError("grid step does not match model delta");
    detail::check_signal(model, signal);
    detail::check_state_dims(model, h0, VectorX<Scalar>::Zero(model.n_inputs()).eval());

    const Eigen::Index n = grid.n_steps;
    Trajectory<Scalar> traj;
    traj.grid = grid;
    traj.states.resize(n + 1, model.n_units());
    traj.inputs_used.resize(n + 1, model.n_inputs());
    traj.form = model.form();
    traj.gain = model.gain();
    traj.generator = Generator::Euler;

    VectorX<Scalar> h = h0;
    traj.states.row(0) = h.transpose();
    if (detail::is_bad_state(h)) {
        detail::truncate_at(traj, 0);
        return traj;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const VectorX<Scalar> x = signal.evaluate(grid.time(k));
        traj.inputs_used.row(k) = x.transpose();
        h = euler_step(model, h, x);
        traj.states.row(k + 1) = h.transpose();
        if (detail::is_bad_state(h)) {
            traj.inputs_used.row(k + 1).setConstant(std::numeric_limits<Scalar>::quiet_NaN());
            detail::truncate_at(traj, k + 1);
            return traj;
        }
    }
    traj.inputs_used.row(n) = signal.evaluate(grid.time(n)).transpose();
    return traj;
}

inline constexpr int kDefaultSubsteps = 100;

/// Classical RK4 with `substeps` internal steps per grid slice, reported at
/// the grid points only. Serves as the accuracy oracle for continuous models.
template <typename Scalar>
Trajectory<Scalar> reference_solve(const Model<Scalar>& model, const StateVector<Scalar>& h0,
                                   const InputSignal<Scalar>& signal, const TimeGrid<Scalar>& grid,
                                   int substeps = kDefaultSubsteps)
{
    if (model.is_discrete())
        throw DomainError("reference_solve needs a continuous model");
    if (substeps < 1)
        throw DomainError("substeps must be positive");
    detail::check_signal(model, signal);
    detail::check_state_dims(model, h0, VectorX<Scalar>::Zero(model.n_inputs()).eval());

    const Eigen::Index n = grid.n_steps;
    Trajectory<Scalar> traj;
    traj.grid = grid;
    traj.states.resize(n + 1, model.n_units());
    traj.inputs_used.resize(n + 1, model.n_inputs());
    traj.form = model.form();
    traj.gain = model.gain();
    traj.generator = Generator::Reference;

    auto f = [&](Scalar t, const VectorX<Scalar>& h) { return rhs_F(model, h, signal.evaluate(t)); };

    VectorX<Scalar> h = h0;
    traj.states.row(0) = h.transpose();
    traj.inputs_used.row(0) = signal.evaluate(grid.time(0)).transpose();
    if (detail::is_bad_state(h)) {
        detail::truncate_at(traj, 0);
        return traj;
    }
    const Scalar dt = grid.step() / Scalar(substeps);
    const Scalar half = dt / Scalar(2);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Scalar t0 = grid.time(k);
        for (int j = 0; j < substeps; ++j) {
            const Scalar t = t0 + Scalar(j) * dt;
            const VectorX<Scalar> k1 = f(t, h);
            const VectorX<Scalar> k2 = f(t + half, h + half * k1);
            const VectorX<Scalar> k3 = f(t + half, h + half * k2);
            const VectorX<Scalar> k4 = f(t + dt, h + dt * k3);
            h += (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
            if (detail::is_bad_state(h))
                break;
        }
        traj.states.row(k + 1) = h.transpose();
        if (detail::is_bad_state(h)) {
            traj.inputs_used.row(k + 1).setConstant(std::numeric_limits<Scalar>::quiet_NaN());
            detail::truncate_at(traj, k + 1);
            return traj;
        }
        traj.inputs_used.row(k + 1) = signal.evaluate(grid.time(k + 1)).transpose();
    }
    return traj;
}

template <typename Scalar>
struct DiffMetrics {
    Scalar max_abs = Scalar(0);
    Scalar max_rel = Scalar(0);
    Eigen::Index argmax_row = 0;
    Eigen::Index argmax_col = 0;
};

/// Entrywise comparison of two state matrices of equal shape, ignoring time axes.
template <typename Scalar>
DiffMetrics<Scalar> state_diff(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b)
{
    using std::abs;
    using std::max;
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("state matrices differ in shape");
    DiffMetrics<Scalar> out;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const Scalar d = abs(a(i, j) - b(i, j));
            const Scalar denom = max({abs(a(i, j)), abs(b(i, j)), Scalar(1e-300)});
            // NaN differences count as infinitely large.
            const Scalar dd = d == d ? d : std::numeric_limits<Scalar>::infinity();
            if (dd > out.max_abs || (i == 0 && j == 0)) {
                out.max_abs = dd;
                out.argmax_row = i;
                out.argmax_col = j;
            }
            out.max_rel = max(out.max_rel, d == d ? d / denom : std::numeric_limits<Scalar>::infinity());
        }
    }
    return out;
}

/// Requires identical grids (n exact, endpoints to 1e-12 relative).
template <typename Scalar>
DiffMetrics<Scalar> trajectory_diff(const Trajectory<Scalar>& a, const Trajectory<Scalar>& b)
{
    using std::abs;
    using std::max;
    auto close = [](Scalar x, Scalar y) {
        return abs(x - y) <= Scalar(1e-12) * max({abs(x), abs(y), Scalar(1)});
    };
    if (a.grid.n_steps != b.grid.n_steps || !close(a.grid.start, b.grid.start) ||
        !close(a.grid.end, b.grid.end))
        throw GridError("trajectories are on different grids");
    if (a.states.rows() != b.states.rows())
        throw GridError("trajectories have different lengths (one of them diverged)");
    return state_diff(a.states, b.states);
}

template <typename Scalar>
struct SimulationJob {
    Model<Scalar> model;
    VectorX<Scalar> h0;
    InputSignal<Scalar> signal;
    TimeGrid<Scalar> grid;
};

/// Independent Euler runs on a worker pool; output i always belongs to job i.
template <typename Scalar>
std::vector<Trajectory<Scalar>> simulate_batch(const std::vector<SimulationJob<Scalar>>& jobs,
                                               unsigned threads = 0)
{
    std::vector<Trajectory<Scalar>> out(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        const auto& job = jobs[i];
        out[i] = simulate(job.model, job.h0, job.signal, job.grid);
    });
    return out;
}

using Grid = TimeGrid<double>;
using TrajectoryD = Trajectory<double>;

} // namespace ctrnn
