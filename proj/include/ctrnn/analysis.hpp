#pragma once

// Fixed points, Jacobians and eigen-spectrum stability for continuous and
// discrete forms.

#include "ctrnn/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace ctrnn {

enum class Stability { Stable, Unstable, Marginal };

inline std::string_view to_string(Stability s)
{
    switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
    }
    return "marginal";
}

/// Half-width of the band around the stability boundary reported as Marginal.
inline constexpr double kMarginTolerance = 1e-9;

template <typename Scalar>
struct StabilityReport {
    std::vector<std::complex<Scalar>> eigenvalues;
    Stability classification = Stability::Marginal;
    /// Continuous: spectral abscissa. Discrete: spectral radius - 1.
    Scalar margin = Scalar(0);
    TimeDomain domain = TimeDomain::Continuous;
};

template <typename Scalar>
struct FixedPointResult {
    VectorX<Scalar> h_star;
    Scalar residual = Scalar(0); ///< infinity norm of the gain-free right-hand side
    int iterations = 0;
    bool converged = false;
};

/// Gain-free Jacobian of F0 with respect to h.
template <typename Scalar>
MatrixX<Scalar> jacobian_base(const Model<Scalar>& model, const StateVector<Scalar>& h,
                              const StateVector<Scalar>& x)
{
    if (model.is_linearized())
        return effective_A(model);
    const VectorX<Scalar> phi = drive(model, h, x);
    MatrixX<Scalar> j = activation_derivative(model.activation(), phi).asDiagonal() * model.params().w;
    j.diagonal().array() -= model.params().lambda;
    return j;
}

/// Jacobian of the vector field gain * F0.
template <typename Scalar>
MatrixX<Scalar> jacobian(const Model<Scalar>& model, const StateVector<Scalar>& h,
                         const StateVector<Scalar>& x)
{
    return model.gain() * jacobian_base(model, h, x);
}

namespace detail {

template <typename Scalar>
std::vector<std::complex<Scalar>> eigenvalues_of(const MatrixX<Scalar>& m)
{
    if (!m.allFinite())
        throw DomainError("matrix has non-finite entries");
    Eigen::EigenSolver<MatrixX<Scalar>> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw Error("eigensolver failed to converge");
    const auto& ev = solver.eigenvalues();
    std::vector<std::complex<Scalar>> out(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    return out;
}

template <typename Scalar>
Stability classify(Scalar margin)
{
    if (margin < -Scalar(kMarginTolerance))
        return Stability::Stable;
    if (margin > Scalar(kMarginTolerance))
        return Stability::Unstable;
    return Stability::Marginal;
}

template <typename Scalar>
StabilityReport<Scalar> discrete_report(const MatrixX<Scalar>& update)
{
    using std::abs;
    StabilityReport<Scalar> r;
    r.domain = TimeDomain::Discrete;
    r.eigenvalues = eigenvalues_of(update);
    Scalar radius = Scalar(0);
    for (const auto& mu : r.eigenvalues)
        radius = std::max(radius, abs(mu));
    r.margin = radius - Scalar(1);
    r.classification = classify(r.margin);
    return r;
}

} // namespace detail

/// Classifies by the largest real part of the eigenvalues of J.
template <typename Scalar>
StabilityReport<Scalar> stability_continuous(const MatrixX<Scalar>& jac)
{
    StabilityReport<Scalar> r;
    r.domain = TimeDomain::Continuous;
    r.eigenvalues = detail::eigenvalues_of(jac);
    r.margin = -std::numeric_limits<Scalar>::infinity();
    for (const auto& mu : r.eigenvalues)
        r.margin = std::max(r.margin, mu.real());
    r.classification = detail::classify(r.margin);
    return r;
}

/// Update matrix of the Euler map linearized around (h, x): I + (gain delta) J0.
template <typename Scalar>
MatrixX<Scalar> euler_update_matrix(const Model<Scalar>& model, const StateVector<Scalar>& h,
                                    const StateVector<Scalar>& x)
{
    if (!model.is_discrete())
        throw DomainError("euler update matrix needs a discrete model");
    MatrixX<Scalar> m = model.effective_step() * jacobian_base(model, h, x);
    m.diagonal().array() += Scalar(1);
    return m;
}

/// Spectral radius test on I + (gain delta)(w - lambda I).
template <typename Scalar>
StabilityReport<Scalar> stability_discrete(const Model<Scalar>& model)
{
    if (!model.is_discrete() || !model.is_linearized())
        throw DomainError("stability_discrete needs a discrete, linearized model");
    const VectorX<Scalar> zero_h = VectorX<Scalar>::Zero(model.n_units());
    const VectorX<Scalar> zero_x = VectorX<Scalar>::Zero(model.n_inputs());
    return detail::discrete_report(euler_update_matrix(model, zero_h, zero_x));
}

/// Nonlinear discrete model, linearized around a state (normally a fixed point).
template <typename Scalar>
StabilityReport<Scalar> stability_discrete_at(const Model<Scalar>& model, const StateVector<Scalar>& h,
                                              const StateVector<Scalar>& x)
{
    return detail::discrete_report(euler_update_matrix(model, h, x));
}

/// The continuous model sharing params, form and gain with a discrete one.
template <typename Scalar>
Model<Scalar> continuous_counterpart(const Model<Scalar>& model)
{
    return Model<Scalar>::from_parts(model.params(), TimeDomain::Continuous, model.form(),
                                     model.activation(), model.gain(), Scalar(0), Scalar(0));
}

inline constexpr double kDefaultFixedPointTol = 1e-10;
inline constexpr int kDefaultFixedPointMaxIter = 100;

/// Newton iteration on F0(h, x_const) = 0 with the analytic Jacobian. A
/// singular Jacobian triggers one damped step h += 0.1 F0(h) instead. The gain
/// does not move the zeros of gain * F0, so it is ignored.
template <typename Scalar>
FixedPointResult<Scalar> fixed_point(const Model<Scalar>& model, const StateVector<Scalar>& x_const,
                                     const StateVector<Scalar>& guess,
                                     Scalar tol = Scalar(kDefaultFixedPointTol),
                                     int max_iter = kDefaultFixedPointMaxIter)
{
    if (model.is_discrete())
        throw DomainError("fixed_point needs a continuous model");
    using std::isfinite;
    if (!isfinite(tol) || !(tol > Scalar(0)))
        throw DomainError("tolerance must be strictly positive");
    require_finite(guess, "fixed point guess");

    FixedPointResult<Scalar> best;
    VectorX<Scalar> h = guess;
    for (int it = 0;; ++it) {
        const VectorX<Scalar> g = rhs_base(model, h, x_const);
        if (!g.allFinite())
            throw DomainError("fixed point iteration produced a non-finite residual");
        const Scalar res = g.size() ? g.cwiseAbs().maxCoeff() : Scalar(0);
        if (it == 0 || res < best.residual) {
            best.h_star = h;
            best.residual = res;
        }
        best.iterations = it;
        if (res <= tol) {
            best.h_star = h;
            best.residual = res;
            best.converged = true;
            return best;
        }
        if (it == max_iter)
            return best;

        const Eigen::FullPivLU<MatrixX<Scalar>> lu(jacobian_base(model, h, x_const));
        if (lu.isInvertible())
            h -= lu.solve(g);
        else
            h += Scalar(0.1) * g;
        if (!h.allFinite())
            throw DomainError("fixed point iteration produced a non-finite iterate");
    }
}

/// Condition number above which A is treated as singular.
inline constexpr double kMaxConditionEstimate = 1e12;

/// h* = -A^{-1} (B x + b) for linearized models.
template <typename Scalar>
FixedPointResult<Scalar> linear_fixed_point(const Model<Scalar>& model, const StateVector<Scalar>& x_const)
{
    if (!model.is_linearized())
        throw DomainError("linear_fixed_point needs a linearized model");
    detail::check_state_dims(model, VectorX<Scalar>::Zero(model.n_units()).eval(), x_const);
    const auto& p = model.params();
    const MatrixX<Scalar> a = effective_A(model);
    const Eigen::PartialPivLU<MatrixX<Scalar>> lu(a);
    const Scalar rcond = lu.rcond();
    const Scalar cond = rcond > Scalar(0) ? Scalar(1) / rcond : std::numeric_limits<Scalar>::infinity();
    // PartialPivLU happily factors an exactly singular matrix; catch that via the pivots too.
    const bool zero_pivot = (lu.matrixLU().diagonal().array() == Scalar(0)).any();
    if (zero_pivot || !(cond < Scalar(kMaxConditionEstimate)))
        throw SingularError("state matrix A = w - lambda I is singular or ill-conditioned (condition estimate " +
                                std::to_string(static_cast<double>(cond)) + ")",
                            static_cast<double>(cond));
    VectorX<Scalar> rhs = p.b;
    if (p.n_inputs > 0)
        rhs.noalias() += p.w_in * x_const;
    FixedPointResult<Scalar> out;
    out.h_star = -lu.solve(rhs);
    const VectorX<Scalar> g = rhs_base(model, out.h_star, x_const);
    out.residual = g.size() ? g.cwiseAbs().maxCoeff() : Scalar(0);
    out.iterations = 0;
    out.converged = true;
    return out;
}

/// Condition estimate of A = w - lambda I (1 / rcond of its LU factorization).
template <typename Scalar>
Scalar condition_estimate(const Model<Scalar>& model)
{
    const Eigen::PartialPivLU<MatrixX<Scalar>> lu(effective_A(model));
    const Scalar rcond = lu.rcond();
    return rcond > Scalar(0) ? Scalar(1) / rcond : std::numeric_limits<Scalar>::infinity();
}

namespace detail {

/// tanh(x) - x without the cancellation of the direct difference near 0.
template <typename Scalar>
Scalar tanh_remainder(Scalar x)
{
    using std::abs;
    using std::tanh;
    if (abs(x) >= Scalar(0.05))
        return tanh(x) - x;
    // odd Taylor series; the first dropped term is below 1e-20 relative here
    static constexpr double c[] = {-1.0 / 3,
                                   2.0 / 15,
                                   -17.0 / 315,
                                   62.0 / 2835,
                                   -1382.0 / 155925,
                                   21844.0 / 6081075,
                                   -929569.0 / 638512875};
    const Scalar x2 = x * x;
    Scalar acc = Scalar(c[6]);
    for (int i = 5; i >= 0; --i)
        acc = Scalar(c[i]) + x2 * acc;
    return x * x2 * acc;
}

} // namespace detail

/// sigma(phi) - phi, the part discarded by linearization.
template <typename Scalar>
VectorX<Scalar> linearization_error(Activation kind, const VectorX<Scalar>& phi)
{
    if (!is_linearizable(kind))
        throw DomainError("activation is not linearizable");
    require_finite(phi, "linearization_error input");
    if (kind == Activation::Identity)
        return VectorX<Scalar>::Zero(phi.size());
    return phi.unaryExpr([](Scalar v) { return detail::tanh_remainder(v); });
}

using StabilityReportD = StabilityReport<double>;
using FixedPointResultD = FixedPointResult<double>;

} // namespace ctrnn
