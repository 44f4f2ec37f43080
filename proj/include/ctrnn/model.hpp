#pragma once

// Continuous-time recurrent network: parameters, activation functions,
// input signals and the right-hand side of
//
//     h'(t) = gain * ( -lambda h + sigma(w h + b + w_in x(t)) ).
//
// Everything here is a value type; operations are free functions.

#include "ctrnn/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

namespace ctrnn {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Vector argument next to a Model; not deduced, so Eigen expressions convert.
template <typename Scalar>
using StateVector = std::type_identity_t<VectorX<Scalar>>;

enum class Activation { Tanh, Identity };
enum class TimeDomain { Continuous, Discrete };
enum class Form { Nonlinear, Linearized };

inline std::string_view to_string(Activation a)
{
    return a == Activation::Tanh ? "tanh" : "identity";
}
inline std::string_view to_string(TimeDomain d)
{
    return d == TimeDomain::Continuous ? "continuous" : "discrete";
}
inline std::string_view to_string(Form f)
{
    return f == Form::Nonlinear ? "nonlinear" : "linearized";
}

// ---------------------------------------------------------------------------
// Activation catalog

template <typename Scalar>
Scalar activation_value(Activation kind, Scalar phi)
{
    using std::tanh;
    switch (kind) {
    case Activation::Tanh: return tanh(phi);
    case Activation::Identity: return phi;
    }
    return phi;
}

template <typename Scalar>
Scalar activation_slope(Activation kind, Scalar phi)
{
    using std::tanh;
    switch (kind) {
    case Activation::Tanh: {
        const Scalar t = tanh(phi);
        return Scalar(1) - t * t;
    }
    case Activation::Identity: return Scalar(1);
    }
    return Scalar(1);
}

/// True iff sigma(0) = 0 and sigma'(0) = 1, i.e. sigma can be replaced by the identity.
inline bool is_linearizable(Activation kind)
{
    return activation_value(kind, 0.0) == 0.0 && activation_slope(kind, 0.0) == 1.0;
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, std::string_view what)
{
    if (!m.allFinite())
        throw DomainError(std::string(what) + " has non-finite entries");
}

template <typename Scalar>
VectorX<Scalar> activation_apply(Activation kind, const VectorX<Scalar>& phi)
{
    require_finite(phi, "activation argument");
    if (kind == Activation::Identity)
        return phi;
    return phi.unaryExpr([kind](Scalar v) { return activation_value(kind, v); });
}

template <typename Scalar>
VectorX<Scalar> activation_derivative(Activation kind, const VectorX<Scalar>& phi)
{
    require_finite(phi, "activation argument");
    return phi.unaryExpr([kind](Scalar v) { return activation_slope(kind, v); });
}

// ---------------------------------------------------------------------------
// Parameters and model

template <typename Scalar>
struct ModelParams {
    Eigen::Index n_units = 0;
    Eigen::Index n_inputs = 0;
    Scalar lambda = Scalar(1);
    MatrixX<Scalar> w;    ///< recurrent weights, N x N
    MatrixX<Scalar> w_in; ///< input weights, N x M
    VectorX<Scalar> b;    ///< bias, N

    /// Throws DimensionError / DomainError when the invariants do not hold.
    void validate() const
    {
        if (n_units <= 0)
            throw DimensionError("n_units must be positive");
        if (n_inputs < 0)
            throw DimensionError("n_inputs must be non-negative");
        auto shape = [](const auto& m) {
            return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
        };
        if (w.rows() != n_units || w.cols() != n_units)
            throw DimensionError("w has shape " + shape(w) + ", expected " +
                                 std::to_string(n_units) + "x" + std::to_string(n_units));
        if (w_in.rows() != n_units || w_in.cols() != n_inputs)
            throw DimensionError("w_in has shape " + shape(w_in) + ", expected " +
                                 std::to_string(n_units) + "x" + std::to_string(n_inputs));
        if (b.size() != n_units)
            throw DimensionError("b has length " + std::to_string(b.size()) + ", expected " +
                                 std::to_string(n_units));
        using std::isfinite;
        if (!isfinite(lambda))
            throw DomainError("lambda is not finite");
        if (!(lambda > Scalar(0)))
            throw DomainError("lambda must be strictly positive");
        require_finite(w, "w");
        require_finite(w_in, "w_in");
        require_finite(b, "b");
    }
};

template <typename Scalar>
ModelParams<Scalar> scalar_params(Scalar lambda, Scalar w, Scalar b = Scalar(0))
{
    ModelParams<Scalar> p;
    p.n_units = 1;
    p.n_inputs = 0;
    p.lambda = lambda;
    p.w = MatrixX<Scalar>::Constant(1, 1, w);
    p.w_in = MatrixX<Scalar>(1, 0);
    p.b = VectorX<Scalar>::Constant(1, b);
    return p;
}

/// A network in one of four forms (continuous/discrete x nonlinear/linearized)
/// together with its accumulated time gain.
///
/// Discrete models carry both the nominal step `delta` and the effective Euler
/// step `gain * delta`. The effective step is fixed when the model is
/// discretized and is left untouched by later rescalings, so it is the single
/// quantity that the Euler recurrence sees.
template <typename Scalar>
class Model {
public:
    /// Builds a model from all of its parts and validates every invariant.
    /// `effective_step` is only read for discrete models.
    static Model from_parts(ModelParams<Scalar> params, TimeDomain domain, Form form,
                            Activation activation, Scalar gain, Scalar delta,
                            Scalar effective_step)
    {
        params.validate();
        using std::isfinite;
        if (!isfinite(gain) || !(gain > Scalar(0)))
            throw DomainError("gain must be finite and strictly positive");
        if (domain == TimeDomain::Discrete) {
            if (!isfinite(delta) || !(delta > Scalar(0)))
                throw DomainError("delta must be finite and strictly positive");
            if (!isfinite(effective_step) || !(effective_step > Scalar(0)))
                throw DomainError("effective step must be finite and strictly positive");
        } else {
            delta = Scalar(0);
            effective_step = Scalar(0);
        }
        if (form == Form::Linearized && !is_linearizable(activation))
            throw DomainError("linearized form requires a linearizable activation");
        Model m;
        m.params_ = std::move(params);
        m.domain_ = domain;
        m.form_ = form;
        m.activation_ = activation;
        m.gain_ = gain;
        m.delta_ = delta;
        m.step_ = effective_step;
        return m;
    }

    const ModelParams<Scalar>& params() const { return params_; }
    TimeDomain time_domain() const { return domain_; }
    Form form() const { return form_; }
    /// Activation of the nonlinear form; kept as provenance once linearized.
    Activation activation() const { return activation_; }
    Scalar gain() const { return gain_; }
    /// Nominal step; zero for continuous models.
    Scalar delta() const { return delta_; }
    /// gain * delta as fixed at discretization; zero for continuous models.
    Scalar effective_step() const { return step_; }

    bool is_discrete() const { return domain_ == TimeDomain::Discrete; }
    bool is_linearized() const { return form_ == Form::Linearized; }
    Eigen::Index n_units() const { return params_.n_units; }
    Eigen::Index n_inputs() const { return params_.n_inputs; }

private:
    Model() = default;

    ModelParams<Scalar> params_;
    TimeDomain domain_ = TimeDomain::Continuous;
    Form form_ = Form::Nonlinear;
    Activation activation_ = Activation::Tanh;
    Scalar gain_ = Scalar(1);
    Scalar delta_ = Scalar(0);
    Scalar step_ = Scalar(0);
};

template <typename Scalar>
Model<Scalar> make_model(ModelParams<Scalar> params, Activation activation)
{
    return Model<Scalar>::from_parts(std::move(params), TimeDomain::Continuous, Form::Nonlinear,
                                     activation, Scalar(1), Scalar(0), Scalar(0));
}

/// A = w - lambda I. Does not include the gain.
template <typename Scalar>
MatrixX<Scalar> effective_A(const Model<Scalar>& model)
{
    const auto& p = model.params();
    MatrixX<Scalar> a = p.w;
    a.diagonal().array() -= p.lambda;
    return a;
}

namespace detail {

template <typename Scalar>
void check_state_dims(const Model<Scalar>& model, const StateVector<Scalar>& h,
                      const StateVector<Scalar>& x)
{
    if (h.size() != model.n_units())
        throw DimensionError("state has length " + std::to_string(h.size()) + ", expected " +
                             std::to_string(model.n_units()));
    if (x.size() != model.n_inputs())
        throw DimensionError("input has length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(model.n_inputs()));
}

} // namespace detail

/// Pre-activation w h + b + w_in x.
template <typename Scalar>
VectorX<Scalar> drive(const Model<Scalar>& model, const StateVector<Scalar>& h,
                      const StateVector<Scalar>& x)
{
    detail::check_state_dims(model, h, x);
    const auto& p = model.params();
    VectorX<Scalar> phi = p.w * h;
    phi += p.b;
    if (p.n_inputs > 0)
        phi.noalias() += p.w_in * x;
    return phi;
}

/// Gain-free right-hand side F0 = -lambda h + sigma(phi); the linearized form
/// replaces sigma by the identity. Both forms share one evaluation order so an
/// Identity network and its linearization agree bit for bit.
template <typename Scalar>
VectorX<Scalar> rhs_base(const Model<Scalar>& model, const StateVector<Scalar>& h,
                         const StateVector<Scalar>& x)
{
    VectorX<Scalar> phi = drive(model, h, x);
    const Scalar lambda = model.params().lambda;
    if (model.is_linearized() || model.activation() == Activation::Identity)
        return -lambda * h + phi;
    // Non-finite values pass through here; simulate() flags divergence.
    const Activation kind = model.activation();
    return -lambda * h + phi.unaryExpr([kind](Scalar v) { return activation_value(kind, v); });
}

/// gain * F0 for continuous models.
template <typename Scalar>
VectorX<Scalar> rhs_F(const Model<Scalar>& model, const StateVector<Scalar>& h,
                      const StateVector<Scalar>& x)
{
    if (model.is_discrete())
        throw DomainError("rhs_F is defined for continuous models only");
    return model.gain() * rhs_base(model, h, x);
}

// ---------------------------------------------------------------------------
// Input signals

template <typename Scalar>
struct ZeroSignal {};

template <typename Scalar>
struct ConstantSignal {
    VectorX<Scalar> values;
};

template <typename Scalar>
struct StepSignal {
    Scalar onset = Scalar(0);
    VectorX<Scalar> values; ///< zero before onset, `values` from onset on
};

template <typename Scalar>
struct SineSignal {
    VectorX<Scalar> amplitudes;
    Scalar frequency = Scalar(1); ///< cycles per unit time
    Scalar phase = Scalar(0);     ///< radians
};

/// Zero-order hold over rows of `samples`; clamps outside [0, K * sample_step).
template <typename Scalar>
struct SampledSignal {
    MatrixX<Scalar> samples; ///< K x M
    Scalar sample_step = Scalar(1);
};

/// External excitation x(t), optionally viewed on a rescaled time axis:
/// evaluate(s) returns x(time_scale * s).
template <typename Scalar>
class InputSignal {
public:
    using Kind = std::variant<ZeroSignal<Scalar>, ConstantSignal<Scalar>, StepSignal<Scalar>,
                              SineSignal<Scalar>, SampledSignal<Scalar>>;

    static InputSignal zero(Eigen::Index n_inputs) { return InputSignal(n_inputs, ZeroSignal<Scalar>{}); }
    static InputSignal constant(VectorX<Scalar> values)
    {
        const auto m = values.size();
        return InputSignal(m, ConstantSignal<Scalar>{std::move(values)});
    }
    static InputSignal step(Scalar onset, VectorX<Scalar> values)
    {
        const auto m = values.size();
        return InputSignal(m, StepSignal<Scalar>{onset, std::move(values)});
    }
    static InputSignal sine(VectorX<Scalar> amplitudes, Scalar frequency, Scalar phase)
    {
        const auto m = amplitudes.size();
        return InputSignal(m, SineSignal<Scalar>{std::move(amplitudes), frequency, phase});
    }
    static InputSignal sampled(MatrixX<Scalar> samples, Scalar sample_step)
    {
        using std::isfinite;
        if (samples.rows() == 0)
            throw DomainError("sampled signal needs at least one sample");
        if (!isfinite(sample_step) || !(sample_step > Scalar(0)))
            throw DomainError("sample_step must be finite and strictly positive");
        const auto m = samples.cols();
        return InputSignal(m, SampledSignal<Scalar>{std::move(samples), sample_step});
    }

    Eigen::Index n_inputs() const { return n_inputs_; }
    Scalar time_scale() const { return time_scale_; }
    const Kind& kind() const { return kind_; }

    /// Same signal on the time axis s = t / tau (chi(s) = x(tau s)).
    InputSignal rescaled(Scalar tau) const
    {
        using std::isfinite;
        if (!isfinite(tau) || !(tau > Scalar(0)))
            throw DomainError("signal time scale must be finite and strictly positive");
        InputSignal out = *this;
        out.time_scale_ = time_scale_ * tau;
        return out;
    }

    VectorX<Scalar> evaluate(Scalar s) const
    {
        const Scalar t = time_scale_ * s;
        return std::visit([&](const auto& k) { return eval(k, t); }, kind_);
    }

private:
    InputSignal(Eigen::Index m, Kind k) : n_inputs_(m), kind_(std::move(k))
    {
        std::visit([](const auto& v) { check_finite(v); }, kind_);
    }

    static void check_finite(const ZeroSignal<Scalar>&) {}
    static void check_finite(const ConstantSignal<Scalar>& k) { require_finite(k.values, "signal values"); }
    static void check_finite(const StepSignal<Scalar>& k)
    {
        require_finite(k.values, "signal values");
        using std::isfinite;
        if (!isfinite(k.onset))
            throw DomainError("signal onset is not finite");
    }
    static void check_finite(const SineSignal<Scalar>& k)
    {
        require_finite(k.amplitudes, "signal amplitudes");
        using std::isfinite;
        if (!isfinite(k.frequency) || !isfinite(k.phase))
            throw DomainError("signal frequency/phase not finite");
    }
    static void check_finite(const SampledSignal<Scalar>& k) { require_finite(k.samples, "signal samples"); }

    VectorX<Scalar> eval(const ZeroSignal<Scalar>&, Scalar) const { return VectorX<Scalar>::Zero(n_inputs_); }
    VectorX<Scalar> eval(const ConstantSignal<Scalar>& k, Scalar) const { return k.values; }
    VectorX<Scalar> eval(const StepSignal<Scalar>& k, Scalar t) const
    {
        if (t < k.onset)
            return VectorX<Scalar>::Zero(n_inputs_);
        return k.values;
    }
    VectorX<Scalar> eval(const SineSignal<Scalar>& k, Scalar t) const
    {
        using std::sin;
        const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
        return k.amplitudes * sin(two_pi * k.frequency * t + k.phase);
    }
    VectorX<Scalar> eval(const SampledSignal<Scalar>& k, Scalar t) const
    {
        using std::floor;
        const Scalar pos = floor(t / k.sample_step);
        Eigen::Index row = 0;
        if (pos > Scalar(0))
            row = pos >= Scalar(k.samples.rows() - 1) ? k.samples.rows() - 1
                                                      : static_cast<Eigen::Index>(pos);
        return k.samples.row(row).transpose();
    }

    Eigen::Index n_inputs_ = 0;
    Kind kind_;
    Scalar time_scale_ = Scalar(1);
};

using Params = ModelParams<double>;
using ModelD = Model<double>;
using Signal = InputSignal<double>;
using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

} // namespace ctrnn
