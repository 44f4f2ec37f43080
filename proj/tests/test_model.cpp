#include "ctrnn/model.hpp"
#include "ctrnn/transforms.hpp"
#include "ctrnn/verify.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace ctrnn;

namespace {

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v(i++) = x;
    return v;
}

ModelD scalar(double lambda, double w, Activation a = Activation::Tanh)
{
    return make_model(scalar_params(lambda, w), a);
}

} // namespace

TEST(Activation, ZeroMapsToZeroAndSlopeOne)
{
    for (Activation a : {Activation::Tanh, Activation::Identity}) {
        EXPECT_EQ(activation_value(a, 0.0), 0.0);
        EXPECT_EQ(activation_slope(a, 0.0), 1.0);
        EXPECT_TRUE(is_linearizable(a));
        EXPECT_EQ(activation_apply(a, Vector::Zero(3).eval()), Vector::Zero(3));
    }
}

TEST(Activation, TanhMatchesOracle)
{
    EXPECT_NEAR(static_cast<double>(oracle::tanh_exp(1.0L)), oracle::kTanh1, 1e-16);
    EXPECT_NEAR(activation_apply(Activation::Tanh, vec({1.0}))(0), oracle::kTanh1, 1e-16);

    const long double t = oracle::tanh_exp(1.0L);
    EXPECT_NEAR(static_cast<double>(1.0L - t * t), oracle::kTanhSlope1, 1e-16);
    EXPECT_NEAR(activation_derivative(Activation::Tanh, vec({1.0}))(0), oracle::kTanhSlope1, 1e-16);
    EXPECT_EQ(activation_derivative(Activation::Tanh, vec({0.0}))(0), 1.0);
}

TEST(Activation, IdentityIsExact)
{
    const Vector phi = vec({3.5, -2.0});
    EXPECT_EQ(activation_apply(Activation::Identity, phi), phi);
    EXPECT_EQ(activation_derivative(Activation::Identity, vec({-7.0, 0.0, 1e9})), Vector::Ones(3));
}

TEST(Activation, RejectsNonFinite)
{
    const Vector bad = vec({std::numeric_limits<double>::quiet_NaN()});
    EXPECT_THROW(activation_apply(Activation::Tanh, bad), DomainError);
}

TEST(MakeModel, ScalarLeakyUnit)
{
    const ModelD m = scalar(1.0, 0.0);
    EXPECT_EQ(m.n_units(), 1);
    EXPECT_EQ(m.n_inputs(), 0);
    EXPECT_EQ(m.gain(), 1.0);
    EXPECT_EQ(m.time_domain(), TimeDomain::Continuous);
    EXPECT_EQ(m.form(), Form::Nonlinear);
    EXPECT_EQ(m.activation(), Activation::Tanh);
}

TEST(MakeModel, RejectsBadParams)
{
    Params p = scalar_params(1.0, 0.0);
    p.n_units = 2;
    p.w = Matrix::Zero(3, 2);
    p.w_in = Matrix(2, 0);
    p.b = Vector::Zero(2);
    EXPECT_THROW(make_model(p, Activation::Tanh), DimensionError);

    EXPECT_THROW(make_model(scalar_params(0.0, 0.0), Activation::Tanh), DomainError);
    EXPECT_THROW(make_model(scalar_params(-1.0, 0.0), Activation::Tanh), DomainError);
    EXPECT_THROW(make_model(scalar_params(1.0, std::numeric_limits<double>::infinity()), Activation::Tanh),
                 DomainError);

    Params q = scalar_params(1.0, 0.0);
    q.b = Vector::Zero(2);
    EXPECT_THROW(make_model(q, Activation::Tanh), DimensionError);
}

TEST(EffectiveA, SubtractsDecay)
{
    Params p;
    p.n_units = 2;
    p.lambda = 1.0;
    p.w = Matrix::Zero(2, 2);
    p.w_in = Matrix(2, 0);
    p.b = Vector::Zero(2);
    EXPECT_EQ(effective_A(make_model(p, Activation::Tanh)), -Matrix::Identity(2, 2));

    p.w = Matrix::Identity(2, 2);
    EXPECT_EQ(effective_A(make_model(p, Activation::Tanh)), Matrix::Zero(2, 2));

    p.lambda = 0.5;
    p.w << 0, 1, -1, 0;
    Matrix expected(2, 2);
    expected << -0.5, 1, -1, -0.5;
    EXPECT_EQ(effective_A(make_model(p, Activation::Tanh)), expected);
}

TEST(Rhs, ZeroAtOriginWithoutBias)
{
    EnsembleSpec spec;
    spec.seed = 7;
    spec.count = 100;
    spec.n_units = 5;
    spec.n_inputs = 3;
    spec.weight_std_gain = 1.5;
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = random_model(spec, i);
        const Vector h = Vector::Zero(5), x = Vector::Zero(3);
        EXPECT_EQ(rhs_F(m, h, x), Vector::Zero(5));
        EXPECT_EQ(rhs_F(linearize(m), h, x), Vector::Zero(5));
    }
}

TEST(Rhs, ScalarExamples)
{
    const Vector none(0);
    ModelD lin = Model<double>::from_parts(scalar_params(1.0, 0.0), TimeDomain::Continuous, Form::Linearized,
                                           Activation::Tanh, 1.0, 0.0, 0.0);
    EXPECT_EQ(rhs_F(lin, vec({2.0}), none)(0), -2.0);

    const ModelD m = scalar(1.0, 1.0);
    EXPECT_NEAR(rhs_F(m, vec({1.0}), none)(0), oracle::kScalarRhs, 1e-16);
}

TEST(Rhs, RejectsDiscreteAndBadDims)
{
    const ModelD m = scalar(1.0, 1.0);
    EXPECT_THROW(rhs_F(m, vec({1.0, 2.0}), Vector(0)), DimensionError);
    EXPECT_THROW(rhs_F(m, vec({1.0}), vec({1.0})), DimensionError);
    const ModelD d = Model<double>::from_parts(scalar_params(1.0, 1.0), TimeDomain::Discrete, Form::Nonlinear,
                                               Activation::Tanh, 1.0, 0.1, 0.1);
    EXPECT_THROW(rhs_F(d, vec({1.0}), Vector(0)), DomainError);
}

TEST(Rhs, LinearInGain)
{
    EnsembleSpec spec;
    spec.seed = 11;
    spec.count = 50;
    spec.n_units = 6;
    spec.n_inputs = 2;
    spec.bias_std = 0.3;
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = random_model(spec, i);
        const Vector h = random_state(spec, i);
        const Vector x = Vector::Constant(2, 0.25);
        const double gamma = 0.7 + 0.1 * i;
        auto with_gain = [&](double g) {
            return Model<double>::from_parts(m.params(), TimeDomain::Continuous, Form::Nonlinear, m.activation(),
                                             g, 0.0, 0.0);
        };
        const Vector f1 = rhs_F(with_gain(gamma), h, x);
        const Vector f2 = rhs_F(with_gain(2 * gamma), h, x);
        EXPECT_LE(((f2 - 2 * f1).cwiseAbs().array() / f1.cwiseAbs().array().max(1e-300)).maxCoeff(), 1e-15);
        EXPECT_EQ(effective_A(with_gain(gamma)), effective_A(with_gain(2 * gamma)));
    }
}

TEST(Rhs, LinearizationErrorIsCubic)
{
    EnsembleSpec spec;
    spec.seed = 99;
    spec.count = 20;
    spec.n_units = 4;
    spec.n_inputs = 2;
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = random_model(spec, i);
        const ModelD l = linearize(m);
        const Vector h = random_state(spec, i);
        const Vector x = Vector::Constant(2, 0.5);
        auto gap = [&](double eps) {
            const Vector he = eps * h, xe = eps * x;
            return (rhs_F(m, he, xe) - rhs_F(l, he, xe)).cwiseAbs().maxCoeff();
        };
        const double eps = 1e-2;
        const double ratio = gap(eps) / gap(eps / 2);
        EXPECT_GE(ratio, 4.0);
        EXPECT_LE(ratio, 16.0);
    }
}

TEST(InputSignal, KindsEvaluate)
{
    EXPECT_EQ(Signal::zero(3).evaluate(12.5), Vector::Zero(3));
    EXPECT_EQ(Signal::constant(vec({1, 2})).evaluate(-4.0), vec({1, 2}));

    const Signal step = Signal::step(1.0, vec({2.0}));
    EXPECT_EQ(step.evaluate(0.999)(0), 0.0);
    EXPECT_EQ(step.evaluate(1.0)(0), 2.0);

    const Signal sine = Signal::sine(vec({2.0}), 0.25, 0.0);
    EXPECT_NEAR(sine.evaluate(1.0)(0), 2.0, 1e-15);

    Matrix samples(3, 1);
    samples << 10, 20, 30;
    const Signal held = Signal::sampled(samples, 0.5);
    EXPECT_EQ(held.evaluate(-1.0)(0), 10.0);
    EXPECT_EQ(held.evaluate(0.49)(0), 10.0);
    EXPECT_EQ(held.evaluate(0.5)(0), 20.0);
    EXPECT_EQ(held.evaluate(1.2)(0), 30.0);
    EXPECT_EQ(held.evaluate(99.0)(0), 30.0);

    EXPECT_THROW(Signal::sampled(Matrix(0, 1), 0.5), DomainError);
    EXPECT_THROW(Signal::sampled(samples, 0.0), DomainError);
}

TEST(InputSignal, TimeScaleComposesMultiplicatively)
{
    const Signal base = Signal::sine(vec({1.0, -0.5}), 1.3, 0.2);
    const double t1 = 0.5, t2 = 3.0;
    const Signal twice = base.rescaled(t1).rescaled(t2);
    const Signal once = base.rescaled(t1 * t2);
    for (int k = 0; k < 200; ++k) {
        const double s = -2.0 + 0.037 * k;
        EXPECT_EQ(twice.evaluate(s), once.evaluate(s));
        EXPECT_EQ(once.evaluate(s), base.evaluate(t1 * t2 * s));
    }
    EXPECT_THROW(base.rescaled(0.0), DomainError);
    EXPECT_THROW(base.rescaled(-1.0), DomainError);
}
