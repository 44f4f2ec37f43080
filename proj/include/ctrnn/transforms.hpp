#pragma once

// Rescaling, Euler discretization and linearization as maps between model forms.

#include "ctrnn/model.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ctrnn {

template <typename Scalar>
struct Rescale {
    Scalar tau;
};

template <typename Scalar>
struct Discretize {
    Scalar delta;
};

struct Linearize {};

template <typename Scalar>
using TransformStep = std::variant<Rescale<Scalar>, Discretize<Scalar>, Linearize>;

template <typename Scalar>
std::string describe(const TransformStep<Scalar>& step)
{
    struct {
        std::string operator()(const Rescale<Scalar>& r) const { return "rescale(" + fmt_num(r.tau) + ")"; }
        std::string operator()(const Discretize<Scalar>& d) const
        {
            return "discretize(" + fmt_num(d.delta) + ")";
        }
        std::string operator()(const Linearize&) const { return "linearize"; }
        static std::string fmt_num(Scalar v)
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
            return buf;
        }
    } visitor;
    return std::visit(visitor, step);
}

/// Time gain gain <- gain * tau. On a discrete model the nominal step shrinks to
/// delta / tau while the effective step gain * delta is carried over unchanged.
template <typename Scalar>
Model<Scalar> rescale(const Model<Scalar>& model, Scalar tau)
{
    using std::isfinite;
    if (!isfinite(tau) || !(tau > Scalar(0)))
        throw DomainError("rescale factor must be finite and strictly positive");
    if (tau == Scalar(1))
        return model;
    const Scalar gain = model.gain() * tau;
    const Scalar delta = model.is_discrete() ? model.delta() / tau : Scalar(0);
    return Model<Scalar>::from_parts(model.params(), model.time_domain(), model.form(),
                                     model.activation(), gain, delta, model.effective_step());
}

/// Forward Euler slicing with step delta. The effective step gain * delta is
/// folded here, once.
template <typename Scalar>
Model<Scalar> discretize(const Model<Scalar>& model, Scalar delta)
{
    using std::isfinite;
    if (model.is_discrete())
        throw DomainError("model is already discrete");
    if (!isfinite(delta) || !(delta > Scalar(0)))
        throw DomainError("discretization step must be finite and strictly positive");
    return Model<Scalar>::from_parts(model.params(), TimeDomain::Discrete, model.form(),
                                     model.activation(), model.gain(), delta,
                                     model.gain() * delta);
}

/// Replaces sigma by the identity.
template <typename Scalar>
Model<Scalar> linearize(const Model<Scalar>& model)
{
    if (model.is_linearized())
        throw DomainError("model is already linearized");
    if (!is_linearizable(model.activation()))
        throw DomainError("activation is not linearizable");
    return Model<Scalar>::from_parts(model.params(), model.time_domain(), Form::Linearized,
                                     model.activation(), model.gain(), model.delta(),
                                     model.effective_step());
}

template <typename Scalar>
Model<Scalar> apply_step(const Model<Scalar>& model, const TransformStep<Scalar>& step)
{
    struct {
        const Model<Scalar>& m;
        Model<Scalar> operator()(const Rescale<Scalar>& r) const { return rescale(m, r.tau); }
        Model<Scalar> operator()(const Discretize<Scalar>& d) const { return discretize(m, d.delta); }
        Model<Scalar> operator()(const Linearize&) const { return linearize(m); }
    } visitor{model};
    return std::visit(visitor, step);
}

/// Left-to-right fold. The first failing step is reported as a TransformError
/// carrying its index.
template <typename Scalar>
Model<Scalar> apply_sequence(const Model<Scalar>& model,
                             std::span<const TransformStep<Scalar>> steps)
{
    Model<Scalar> current = model;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        try {
            current = apply_step(current, steps[i]);
        } catch (const DomainError& e) {
            throw TransformError(i, describe(steps[i]) + ": " + e.what());
        }
    }
    return current;
}

template <typename Scalar>
Model<Scalar> apply_sequence(const Model<Scalar>& model,
                             const std::vector<TransformStep<Scalar>>& steps)
{
    return apply_sequence(model, std::span<const TransformStep<Scalar>>(steps));
}

template <typename Scalar>
struct ParamComparison {
    /// Same time domain, same form, same activation (if nonlinear), same shapes.
    bool structurally_equal = false;
    /// Max |a - b| over lambda, w, w_in, b, gain and delta.
    Scalar max_abs_param_diff = Scalar(0);
    /// Same maximum restricted to lambda, w, w_in, b.
    Scalar max_abs_weight_diff = Scalar(0);
    Scalar gain_diff = Scalar(0);
    Scalar delta_diff = Scalar(0);
    /// |gain_a delta_a - gain_b delta_b| when both are discrete.
    std::optional<Scalar> effective_step_diff;

    /// Parameters, gain and effective step all agree exactly.
    bool exact() const
    {
        return structurally_equal && max_abs_weight_diff == Scalar(0) && gain_diff == Scalar(0) &&
               effective_step_diff.value_or(Scalar(0)) == Scalar(0);
    }
};

/// Exact field-by-field comparison; no tolerance is applied.
template <typename Scalar>
ParamComparison<Scalar> compare_params(const Model<Scalar>& a, const Model<Scalar>& b)
{
    using std::abs;
    ParamComparison<Scalar> out;
    const auto& pa = a.params();
    const auto& pb = b.params();
    const bool same_shape = pa.n_units == pb.n_units && pa.n_inputs == pb.n_inputs;
    bool same_form = a.form() == b.form();
    if (same_form && a.form() == Form::Nonlinear)
        same_form = a.activation() == b.activation();
    out.structurally_equal = same_shape && same_form && a.time_domain() == b.time_domain();

    out.gain_diff = abs(a.gain() - b.gain());
    out.delta_diff = abs(a.delta() - b.delta());
    if (a.is_discrete() && b.is_discrete())
        out.effective_step_diff = abs(a.effective_step() - b.effective_step());

    if (!same_shape) {
        out.max_abs_weight_diff = std::numeric_limits<Scalar>::infinity();
    } else {
        Scalar m = abs(pa.lambda - pb.lambda);
        if (pa.w.size() > 0)
            m = std::max(m, (pa.w - pb.w).cwiseAbs().maxCoeff());
        if (pa.w_in.size() > 0)
            m = std::max(m, (pa.w_in - pb.w_in).cwiseAbs().maxCoeff());
        if (pa.b.size() > 0)
            m = std::max(m, (pa.b - pb.b).cwiseAbs().maxCoeff());
        out.max_abs_weight_diff = m;
    }
    out.max_abs_param_diff = std::max({out.max_abs_weight_diff, out.gain_diff, out.delta_diff});
    return out;
}

using Step = TransformStep<double>;

} // namespace ctrnn
