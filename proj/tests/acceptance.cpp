// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "ctrnn/analysis.hpp"
#include "ctrnn/parallel.hpp"
#include "ctrnn/simulate.hpp"
#include "ctrnn/transforms.hpp"
#include "ctrnn/verify.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <string>

using namespace ctrnn;

namespace {

constexpr std::uint64_t kSeed = 20240607;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const char* id, const char* title, double limit_s, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
        o.pass = false;
        o.detail += " (over the " + std::to_string(limit_s) + " s limit)";
    }
    if (!o.pass)
        ++failures;
    std::printf("%s %-5s %-38s %7.3fs  %s\n", o.pass ? "PASS" : "FAIL", id, title, secs, o.detail.c_str());
    std::fflush(stdout);
}

EnsembleSpec ensemble(const std::string& tag, int count, int n, Eigen::Index m = 2, double bias_std = 0.1)
{
    EnsembleSpec spec;
    spec.seed = derive_seed(kSeed, tag);
    spec.count = count;
    spec.n_units = n;
    spec.n_inputs = m;
    spec.bias_std = bias_std;
    return spec;
}

Signal drive(const EnsembleSpec& spec, int i, double amplitude = 0.5)
{
    const double phase = 2.0 * M_PI * (random_step(spec, i, 0.0, 1.0));
    return Signal::sine(Vector::Constant(spec.n_inputs, amplitude), 1.0, phase);
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Tally {
    std::atomic<int> tested{0};
    std::atomic<int> failed{0};
    std::mutex mu;
    double worst = 0.0;
    double least = std::numeric_limits<double>::infinity();
    void record(bool ok, double metric)
    {
        ++tested;
        if (!ok)
            ++failed;
        std::lock_guard lock(mu);
        worst = std::max(worst, metric);
        least = std::min(least, metric);
    }
};

} // namespace

int main()
{
    criterion("AC1", "commutator [D,L]", 5.0, [] {
        Tally t;
        for (int n : {2, 8, 32}) {
            const auto spec = ensemble("ac1/N=" + std::to_string(n), 100, n);
            parallel_for(spec.count, 0, [&](std::size_t i) {
                const int k = static_cast<int>(i);
                const auto r = check_discretize_linearize(random_model(spec, k), 0.01, random_state(spec, k),
                                                          drive(spec, k), 1000);
                t.record(r.pass && r.param_comparison.max_abs_param_diff == 0.0 && r.trajectory_max_abs == 0.0,
                         std::max(r.param_comparison.max_abs_param_diff, r.trajectory_max_abs));
            });
        }
        return Outcome{t.failed == 0, std::to_string(t.tested) + " models, 1000 steps, worst diff " +
                                          fmt("%.3g", t.worst) + " (tol 0)"};
    });

    criterion("AC2", "commutator [L,R]", 10.0, [] {
        Tally t;
        for (int n : {2, 8, 32}) {
            const auto spec = ensemble("ac2/N=" + std::to_string(n), 100, n);
            parallel_for(spec.count, 0, [&](std::size_t i) {
                const int k = static_cast<int>(i);
                const ModelD m = random_model(spec, k);
                for (double tau : {0.5, 2.0, 3.0}) {
                    const auto r = check_linearize_rescale(m, tau, random_state(spec, k), drive(spec, k),
                                                           Grid(0.0, 1.0, 20), 10);
                    t.record(r.pass && r.param_comparison.max_abs_param_diff == 0.0 &&
                                 r.trajectory_max_abs <= 1e-12,
                             r.trajectory_max_abs);
                }
            });
        }
        return Outcome{t.failed == 0, std::to_string(t.tested) + " runs, params exact, worst trajectory " +
                                          fmt("%.3g", t.worst) + " (tol 1e-12)"};
    });

    criterion("AC3", "commutator [R,D] with step alignment", 5.0, [] {
        Tally aligned, control;
        for (int n : {2, 8, 32}) {
            const auto spec = ensemble("ac3/N=" + std::to_string(n), 100, n);
            parallel_for(spec.count, 0, [&](std::size_t i) {
                const int k = static_cast<int>(i);
                const ModelD m = random_model(spec, k);
                const Vector h0 = random_state(spec, k);
                const Signal sig = drive(spec, k);
                for (double tau : {0.5, 2.0, 3.0, 10.0}) {
                    const auto r = check_rescale_discretize(m, tau, 0.01, h0, sig, 100);
                    aligned.record(r.pass && r.trajectory_max_abs == 0.0, r.trajectory_max_abs);
                    const auto c = check_rescale_discretize(m, tau, 0.01, h0, sig, 100, true);
                    control.record(c.trajectory_max_abs > 1e-3, c.trajectory_max_abs);
                }
            });
        }
        return Outcome{aligned.failed == 0 && control.failed == 0,
                       std::to_string(aligned.tested) + " aligned runs bit-exact: " +
                           (aligned.failed == 0 ? "yes" : "no") + "; misaligned control min diff " +
                           fmt("%.3g", control.least) + " (> 1e-3)"};
    });

    criterion("AC4", "rescale inverse", 0, [] {
        const auto spec = ensemble("ac4", 20, 8);
        int bad = 0, tested = 0;
        double worst = 0.0;
        for (int i = 0; i < spec.count; ++i) {
            const ModelD m = random_model(spec, i);
            for (const ModelD& target : {m, discretize(m, 0.1)}) {
                for (double tau : {2.0, 3.0, 7.0, 0.2}) {
                    const auto r = check_rescale_inverse(target, tau);
                    ++tested;
                    bad += !r.pass;
                    worst = std::max(worst, r.param_comparison.gain_diff / target.gain());
                }
            }
        }
        return Outcome{bad == 0, std::to_string(tested) + " round trips, worst relative gain error " +
                                     fmt("%.3g", worst) + " (tol 1e-15)"};
    });

    criterion("AC5", "stability asymmetry", 10.0, [] {
        const auto spec = ensemble("ac5", 1000, 10, 0);
        const auto s = check_stability_implication(spec, 0.0, 0.2);
        return Outcome{s.violations == 0 && s.counterexample_included && s.counterexample_ok,
                       std::to_string(s.tested - 1) + " models, " + std::to_string(s.discrete_stable) +
                           " discrete-stable, " + std::to_string(s.violations) + " violations; counterexample " +
                           (s.counterexample_ok ? "continuous stable / discrete unstable" : "MISCLASSIFIED")};
    });

    criterion("AC6", "shared fixed point", 0, [] {
        const auto spec = ensemble("ac6", 20, 8);
        const auto s = check_shared_fixed_point(spec, {0.1, 1.0}, 1e-10);
        return Outcome{s.violations == 0 && s.converged == s.tested && s.tested == 20,
                       std::to_string(s.converged) + "/" + std::to_string(s.tested) +
                           " converged, worst residual/(gain delta) " + fmt("%.3g", s.worst_scaled_residual) +
                           " (tol 1e-10)"};
    });

    criterion("AC7", "Euler first-order convergence", 0, [] {
        EnsembleSpec spec = ensemble("ac7", 1, 8);
        spec.weight_std_gain = 0.8;
        const ModelD m = random_model(spec, 0);
        const Vector h0 = random_state(spec, 0, 0.5);
        const Signal sig = drive(spec, 0);
        const Vector exact = reference_solve(m, h0, sig, Grid(0.0, 1.0, 1), 20000).states.row(1).transpose();
        double prev = 0.0;
        bool ok = true;
        std::string ratios;
        for (int n : {50, 100, 200, 400}) {
            const TrajectoryD t = simulate(discretize(m, 1.0 / n), h0, sig, Grid(0.0, 1.0, n));
            const double err = (t.states.row(n).transpose() - exact).cwiseAbs().maxCoeff();
            if (prev > 0.0) {
                const double ratio = prev / err;
                ok = ok && ratio >= 1.8 && ratio <= 2.2;
                ratios += fmt(" %.4f", ratio);
            }
            prev = err;
        }
        return Outcome{ok, "error ratios" + ratios + " (in [1.8, 2.2])"};
    });

    criterion("AC8", "linearization regime", 0, [] {
        const Vector phi = Vector::LinSpaced(10000, -1.0, 1.0);
        const Vector err = linearization_error(Activation::Tanh, phi);
        int bound_bad = 0;
        for (Eigen::Index i = 0; i < phi.size(); ++i)
            bound_bad += !(std::abs(err(i)) <= std::pow(std::abs(phi(i)), 3) / 3.0);

        const auto spec = ensemble("ac8", 20, 6, 2, 0.0);
        double lo = 1e300, hi = 0.0;
        for (int i = 0; i < spec.count; ++i) {
            const ModelD m = random_model(spec, i);
            const ModelD l = linearize(m);
            const Vector h = random_state(spec, i);
            auto gap = [&](double eps) {
                const Signal sig = drive(spec, i, eps);
                const Grid g(0.0, 1.0, 20);
                const TrajectoryD a = reference_solve(m, (eps * h).eval(), sig, g, 20);
                const TrajectoryD b = reference_solve(l, (eps * h).eval(), sig, g, 20);
                return (a.states.row(20) - b.states.row(20)).cwiseAbs().maxCoeff();
            };
            const double ratio = gap(0.1) / gap(0.05);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        return Outcome{bound_bad == 0 && lo >= 4.0 && hi <= 16.0,
                       std::to_string(bound_bad) + " bound violations on 1e4 points; amplitude ratio in [" +
                           fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "] (need [4, 16])"};
    });

    criterion("AC9", "speed reparameterization", 0, [] {
        const auto spec = ensemble("ac9", 20, 4);
        int bad = 0, tested = 0;
        for (int i = 0; i < spec.count; ++i) {
            for (double tau : {0.5, 2.0}) {
                const auto r = check_speed_reparameterization(random_model(spec, i), tau, random_state(spec, i),
                                                              drive(spec, i), 1.0, 100);
                ++tested;
                bad += !(r.pass && r.trajectory_max_abs == 0.0);
            }
        }
        return Outcome{bad == 0, std::to_string(tested - bad) + "/" + std::to_string(tested) +
                                     " index-wise bit-exact with time axis scaled by 1/tau"};
    });

    criterion("AC10", "Jacobian vs central differences", 0, [] {
        const auto spec = ensemble("ac10", 50, 6);
        double worst = 0.0;
        for (int i = 0; i < spec.count; ++i) {
            const ModelD m = random_model(spec, i);
            const Vector h = random_state(spec, i);
            const Vector x = drive(spec, i).evaluate(0.3);
            const Matrix j = jacobian(m, h, x);
            const double eps = 1e-6;
            for (Eigen::Index c = 0; c < h.size(); ++c) {
                Vector hp = h, hm = h;
                hp(c) += eps;
                hm(c) -= eps;
                const Vector fd = (rhs_F(m, hp, x) - rhs_F(m, hm, x)) / (2 * eps);
                worst = std::max(worst, (j.col(c) - fd).cwiseAbs().maxCoeff());
            }
        }
        return Outcome{worst <= 1e-5, "50 models, worst abs difference " + fmt("%.3g", worst) + " (tol 1e-5)"};
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
