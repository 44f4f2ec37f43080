#include "ctrnn/analysis.hpp"
#include "ctrnn/simulate.hpp"
#include "ctrnn/transforms.hpp"
#include "ctrnn/verify.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ctrnn;

namespace {

Vector vec1(double v)
{
    return Vector::Constant(1, v);
}

ModelD scalar(double lambda, double w, Activation a = Activation::Tanh)
{
    return make_model(scalar_params(lambda, w), a);
}

ModelD scalar_with_input(double lambda, double w)
{
    Params p = scalar_params(lambda, w);
    p.n_inputs = 1;
    p.w_in = Matrix::Ones(1, 1);
    return make_model(p, Activation::Tanh);
}

Matrix finite_difference_jacobian(const ModelD& m, const Vector& h, const Vector& x, double eps)
{
    const Eigen::Index n = h.size();
    Matrix j(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        Vector hp = h, hm = h;
        hp(c) += eps;
        hm(c) -= eps;
        j.col(c) = (rhs_F(m, hp, x) - rhs_F(m, hm, x)) / (2 * eps);
    }
    return j;
}

EnsembleSpec spec_of(std::uint64_t seed, int count, int n)
{
    EnsembleSpec spec;
    spec.seed = seed;
    spec.count = count;
    spec.n_units = n;
    spec.n_inputs = 2;
    spec.bias_std = 0.2;
    return spec;
}

} // namespace

TEST(FixedPoint, OriginWithoutBias)
{
    const ModelD m = scalar(1.0, 0.5);
    const auto fp = fixed_point(m, Vector(0), vec1(0.0));
    EXPECT_TRUE(fp.converged);
    EXPECT_EQ(fp.h_star(0), 0.0);
    EXPECT_EQ(fp.residual, 0.0);
    EXPECT_LE(fp.iterations, 1);
}

TEST(FixedPoint, HalfTanhMatchesBisection)
{
    const double oracle_root = oracle::bisect(
        [](long double h) { return oracle::tanh_exp(h) - 0.5L * h; }, 1.0L, 3.0L);
    EXPECT_NEAR(oracle_root, oracle::kFixedPointHalfTanh, 1e-14);

    const auto fp = fixed_point(scalar(0.5, 1.0), Vector(0), vec1(1.0));
    ASSERT_TRUE(fp.converged);
    EXPECT_LE(fp.residual, 1e-10);
    EXPECT_NEAR(fp.h_star(0), oracle_root, 1e-10);
}

TEST(FixedPoint, GainDoesNotMoveZeros)
{
    const ModelD m = scalar(0.5, 1.0);
    const auto a = fixed_point(m, Vector(0), vec1(1.0));
    const auto b = fixed_point(rescale(m, 7.0), Vector(0), vec1(1.0));
    EXPECT_EQ(a.h_star, b.h_star);
}

TEST(FixedPoint, Preconditions)
{
    const ModelD m = scalar(1.0, 0.5);
    EXPECT_THROW(fixed_point(discretize(m, 0.1), Vector(0), vec1(0.0)), DomainError);
    EXPECT_THROW(fixed_point(m, Vector(0), vec1(0.0), 0.0), DomainError);
    const auto fp = fixed_point(scalar(0.5, 1.0), Vector(0), vec1(1.0), 1e-300, 3);
    EXPECT_FALSE(fp.converged);
    EXPECT_EQ(fp.iterations, 3);
}

TEST(LinearFixedPoint, Examples)
{
    const auto zero = linear_fixed_point(linearize(scalar(1.0, 0.3)), Vector(0));
    EXPECT_EQ(zero.h_star(0), 0.0);
    EXPECT_TRUE(zero.converged);

    const auto one = linear_fixed_point(linearize(scalar_with_input(1.0, 0.0)), vec1(1.0));
    EXPECT_EQ(one.h_star(0), 1.0);
    EXPECT_EQ(one.residual, 0.0);

    EXPECT_THROW(linear_fixed_point(linearize(scalar(1.0, 1.0)), Vector(0)), SingularError);
    EXPECT_THROW(linear_fixed_point(scalar(1.0, 0.3), Vector(0)), DomainError);

    Params p;
    p.n_units = 2;
    p.lambda = 1.0;
    p.w = Matrix::Identity(2, 2);
    p.w_in = Matrix(2, 0);
    p.b = Vector::Ones(2);
    try {
        linear_fixed_point(linearize(make_model(p, Activation::Tanh)), Vector(0));
        FAIL() << "expected SingularError";
    } catch (const SingularError& e) {
        EXPECT_FALSE(std::isfinite(e.condition_estimate()) && e.condition_estimate() < 1e12);
    }
}

TEST(LinearFixedPoint, AgreesWithNewtonOnIdentityModels)
{
    EnsembleSpec spec = spec_of(2718, 20, 6);
    spec.activation = Activation::Identity;
    spec.weight_std_gain = 0.5;
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = random_model(spec, i);
        const Vector x = Vector::Constant(2, 0.4);
        const auto lin = linear_fixed_point(linearize(m), x);
        const auto newton = fixed_point(m, x, Vector::Zero(6).eval());
        ASSERT_TRUE(newton.converged);
        EXPECT_LE((lin.h_star - newton.h_star).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Jacobian, Examples)
{
    const ModelD lin = linearize(scalar(1.0, 2.0));
    EXPECT_EQ(jacobian(lin, vec1(3.0), Vector(0)), effective_A(lin));

    const ModelD m = scalar(1.0, 2.0);
    EXPECT_NEAR(jacobian(m, vec1(1.0), Vector(0))(0, 0), oracle::kScalarJacobian, 1e-15);
    const long double t = oracle::tanh_exp(2.0L);
    EXPECT_NEAR(static_cast<double>(2.0L * (1.0L - t * t) - 1.0L), oracle::kScalarJacobian, 1e-16);
    EXPECT_EQ(jacobian(rescale(m, 3.0), vec1(0.0), Vector(0))(0, 0), 3.0);

    const EnsembleSpec spec = spec_of(5, 10, 5);
    for (int i = 0; i < spec.count; ++i) {
        const ModelD r = random_model(spec, i);
        const Vector h = Vector::Zero(5), x = Vector::Zero(2);
        if (r.params().b.cwiseAbs().maxCoeff() == 0.0)
            EXPECT_EQ(jacobian(r, h, x), effective_A(r));
        const ModelD rl = linearize(r);
        EXPECT_EQ(jacobian(rl, random_state(spec, i), x), effective_A(rl));
    }
}

TEST(Jacobian, MatchesCentralDifferences)
{
    const EnsembleSpec spec = spec_of(1234, 50, 6);
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = rescale(random_model(spec, i), 0.5 + 0.05 * i);
        const Vector h = random_state(spec, i);
        const Vector x = Vector::Constant(2, 0.3);
        const Matrix fd = finite_difference_jacobian(m, h, x, 1e-6);
        EXPECT_LE((jacobian(m, h, x) - fd).cwiseAbs().maxCoeff(), 1e-5) << i;
    }
    const ModelD s = scalar(1.0, 2.0);
    EXPECT_LE(std::abs(finite_difference_jacobian(s, vec1(1.0), Vector(0), 1e-6)(0, 0) - oracle::kScalarJacobian),
              1e-6);
}

TEST(Stability, ContinuousExamples)
{
    const auto s = stability_continuous<double>(-Matrix::Identity(3, 3));
    EXPECT_EQ(s.classification, Stability::Stable);
    EXPECT_EQ(s.margin, -1.0);

    Matrix rot(2, 2);
    rot << 0, 1, -1, 0;
    const auto r = stability_continuous(rot);
    EXPECT_EQ(r.classification, Stability::Marginal);
    EXPECT_NEAR(r.margin, 0.0, 1e-15);
    ASSERT_EQ(r.eigenvalues.size(), 2u);
    EXPECT_NEAR(std::abs(r.eigenvalues[0].imag()), 1.0, 1e-15);

    const auto u = stability_continuous<double>(Matrix::Constant(1, 1, 0.5));
    EXPECT_EQ(u.classification, Stability::Unstable);
    EXPECT_EQ(u.margin, 0.5);

    Matrix bad = Matrix::Zero(1, 1);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(stability_continuous(bad), DomainError);
}

TEST(Stability, DiscreteExamples)
{
    const ModelD base = linearize(scalar(1.0, 0.0));
    auto disc = [&](double step) { return discretize(base, step); };

    const auto a = stability_discrete(disc(0.1));
    EXPECT_EQ(a.classification, Stability::Stable);
    EXPECT_NEAR(a.eigenvalues[0].real(), 0.9, 1e-16);

    const auto b = stability_discrete(disc(2.5));
    EXPECT_EQ(b.classification, Stability::Unstable);
    EXPECT_EQ(b.eigenvalues[0].real(), -1.5);
    EXPECT_EQ(b.margin, 0.5);

    const auto c = stability_discrete(disc(2.0));
    EXPECT_EQ(c.classification, Stability::Marginal);
    EXPECT_EQ(c.eigenvalues[0].real(), -1.0);

    // gain applied before discretizing enters the step; after, it does not
    EXPECT_EQ(stability_discrete(discretize(rescale(base, 2.0), 1.25)).classification, Stability::Unstable);
    EXPECT_EQ(stability_discrete(rescale(discretize(base, 1.25), 2.0)).classification, Stability::Stable);
    EXPECT_THROW(stability_discrete(discretize(scalar(1.0, 0.0), 0.1)), DomainError);
    EXPECT_THROW(stability_discrete(base), DomainError);
}

// Discrete stability implies continuous stability, never the converse.
TEST(Stability, DiscreteImpliesContinuous)
{
    EnsembleSpec spec = spec_of(99, 300, 6);
    spec.weight_std_gain = 1.2;
    int discrete_stable = 0;
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = linearize(random_model(spec, i));
        const ModelD d = discretize(m, random_step(spec, i, 0.0, 0.5));
        const auto sd = stability_discrete(d);
        const auto sc = stability_continuous(jacobian(m, Vector::Zero(6).eval(), Vector::Zero(2).eval()));
        if (sd.classification == Stability::Stable) {
            ++discrete_stable;
            EXPECT_EQ(sc.classification, Stability::Stable) << i;
        }
    }
    EXPECT_GT(discrete_stable, 0);

    const ModelD counter = linearize(scalar(1.0, 0.0));
    EXPECT_EQ(stability_continuous(effective_A(counter)).classification, Stability::Stable);
    EXPECT_EQ(stability_discrete(discretize(counter, 2.5)).classification, Stability::Unstable);
}

TEST(LinearizationError, Examples)
{
    EXPECT_EQ(linearization_error(Activation::Tanh, Vector::Zero(3).eval()), Vector::Zero(3));
    EXPECT_EQ(linearization_error(Activation::Identity, Vector::LinSpaced(5, -3, 3).eval()), Vector::Zero(5));
    EXPECT_NEAR(linearization_error(Activation::Tanh, vec1(0.5))(0), oracle::kTanhHalfError, 1e-16);
    EXPECT_NEAR(static_cast<double>(oracle::tanh_exp(0.5L) - 0.5L), oracle::kTanhHalfError, 1e-17);
}

TEST(LinearizationError, CubicRemainderBound)
{
    const Vector phi = Vector::LinSpaced(10000, -1.0, 1.0);
    const Vector err = linearization_error(Activation::Tanh, phi);
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        ASSERT_LE(std::abs(err(i)), std::pow(std::abs(phi(i)), 3) / 3.0) << phi(i);
}

// The Euler map h + s G(h) has the same fixed points as the ODE.
TEST(FixedPoint, SharedWithEulerMap)
{
    const EnsembleSpec spec = spec_of(31415, 20, 8);
    for (int i = 0; i < spec.count; ++i) {
        const ModelD m = random_model(spec, i);
        const Vector x = Vector::Zero(2);
        const auto fp = fixed_point(m, x, Vector::Zero(8).eval());
        ASSERT_TRUE(fp.converged);
        for (double delta : {0.1, 1.0}) {
            const ModelD d = discretize(m, delta);
            const double res = (euler_step(d, fp.h_star, x) - fp.h_star).cwiseAbs().maxCoeff();
            EXPECT_LE(res, d.effective_step() * 1e-10);
        }
    }
}
