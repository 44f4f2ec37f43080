#include "ctrnn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace ctrnn {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 member_rng(const EnsembleSpec& spec, int index, Stream stream)
{
    const std::uint64_t s =
        derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(index)), static_cast<std::uint64_t>(stream));
    return std::mt19937_64(s);
}

void check_index(const EnsembleSpec& spec, int index)
{
    if (index < 0 || index >= spec.count)
        throw DomainError("ensemble index " + std::to_string(index) + " out of range [0, " +
                          std::to_string(spec.count) + ")");
}

double max_abs_or_inf(const MatrixX<double>& a, const MatrixX<double>& b, double* max_rel)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        *max_rel = std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::infinity();
    }
    const auto d = state_diff(a, b);
    *max_rel = d.max_rel;
    return d.max_abs;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Ensembles

void EnsembleSpec::validate() const
{
    if (count < 0)
        throw DomainError("ensemble count must be non-negative");
    if (n_units < 1)
        throw DomainError("ensemble n_units must be positive");
    if (n_inputs < 0)
        throw DomainError("ensemble n_inputs must be non-negative");
    if (!(weight_std_gain >= 0.0) || !std::isfinite(weight_std_gain))
        throw DomainError("ensemble weight_std_gain must be finite and >= 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError("ensemble lambda must be finite and > 0");
    if (!(bias_std >= 0.0) || !std::isfinite(bias_std))
        throw DomainError("ensemble bias_std must be finite and >= 0");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag)
{
    return splitmix64(seed ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return derive_seed(seed, h);
}

ModelD random_model(const EnsembleSpec& spec, int index)
{
    spec.validate();
    check_index(spec, index);
    auto rng = member_rng(spec, index, Stream::Params);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Eigen::Index n = spec.n_units;
    const Eigen::Index m = spec.n_inputs;
    const double w_std = spec.weight_std_gain / std::sqrt(static_cast<double>(n));
    Params p;
    p.n_units = n;
    p.n_inputs = m;
    p.lambda = spec.lambda;
    p.w.resize(n, n);
    p.w_in.resize(n, m);
    p.b.resize(n);
    // Fixed row-major draw order.
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            p.w(i, j) = w_std * normal(rng);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            p.w_in(i, j) = normal(rng);
    for (Eigen::Index i = 0; i < n; ++i)
        p.b(i) = spec.bias_std * normal(rng);
    return make_model(std::move(p), spec.activation);
}

Vector random_state(const EnsembleSpec& spec, int index, double scale)
{
    check_index(spec, index);
    auto rng = member_rng(spec, index, Stream::InitialState);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector h(spec.n_units);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        h(i) = scale * normal(rng);
    return h;
}

double random_step(const EnsembleSpec& spec, int index, double low, double high)
{
    check_index(spec, index);
    if (!(high > low))
        throw DomainError("step range needs high > low");
    auto rng = member_rng(spec, index, Stream::Step);
    // uniform_real_distribution draws from [0, 1); flip it onto (low, high].
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return high - u * (high - low);
}

std::string_view to_string(Claim c)
{
    switch (c) {
    case Claim::RD: return "RD";
    case Claim::DL: return "DL";
    case Claim::LR: return "LR";
    case Claim::RescaleInverse: return "RescaleInverse";
    case Claim::Speed: return "Speed";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Commutator checks

CommutatorReport check_rescale_discretize(const ModelD& model, double tau, double delta_s, const Vector& h0,
                                          const Signal& signal, int n_steps, bool misaligned)
{
    CommutatorReport r;
    r.claim = Claim::RD;
    r.tolerance_used = 0.0;
    r.path_a = {Rescale<double>{tau}, Discretize<double>{delta_s}};
    r.path_b = {Discretize<double>{misaligned ? delta_s : tau * delta_s}, Rescale<double>{tau}};

    const ModelD ma = apply_sequence(model, r.path_a);
    const ModelD mb = apply_sequence(model, r.path_b);
    r.param_comparison = compare_params(ma, mb);

    // Both models live on the rescaled axis s and see chi(s) = x(tau s).
    const Signal chi = signal.rescaled(tau);
    const Grid grid_a(0.0, n_steps * delta_s, n_steps);
    const TrajectoryD ta = simulate(ma, h0, chi, grid_a);
    // Aligned paths share the s-grid. A misaligned path_b runs on its own step
    // and the sequences are compared index by index.
    const bool same_grid = std::abs(grid_a.step() - mb.delta()) <= 1e-12 * mb.delta();
    const Grid grid_b = same_grid ? grid_a : Grid(0.0, n_steps * mb.delta(), n_steps);
    const TrajectoryD tb = simulate(mb, h0, chi, grid_b);

    r.trajectory_max_abs = max_abs_or_inf(ta.states, tb.states, &r.trajectory_max_rel);
    r.pass = r.param_comparison.exact() && r.trajectory_max_abs <= r.tolerance_used;
    return r;
}

CommutatorReport check_discretize_linearize(const ModelD& model, double delta, const Vector& h0,
                                            const Signal& signal, int n_steps)
{
    CommutatorReport r;
    r.claim = Claim::DL;
    r.tolerance_used = 0.0;
    r.path_a = {Discretize<double>{delta}, Linearize{}};
    r.path_b = {Linearize{}, Discretize<double>{delta}};

    const ModelD ma = apply_sequence(model, r.path_a);
    const ModelD mb = apply_sequence(model, r.path_b);
    r.param_comparison = compare_params(ma, mb);

    const Grid grid(0.0, n_steps * delta, n_steps);
    const TrajectoryD ta = simulate(ma, h0, signal, grid);
    const TrajectoryD tb = simulate(mb, h0, signal, grid);
    r.trajectory_max_abs = max_abs_or_inf(ta.states, tb.states, &r.trajectory_max_rel);
    r.pass = r.param_comparison.exact() && r.param_comparison.max_abs_param_diff == 0.0 &&
             r.trajectory_max_abs <= r.tolerance_used;
    return r;
}

CommutatorReport check_linearize_rescale(const ModelD& model, double tau, const Vector& h0, const Signal& signal,
                                         const Grid& grid, int substeps)
{
    CommutatorReport r;
    r.claim = Claim::LR;
    r.tolerance_used = 1e-12;
    r.path_a = {Linearize{}, Rescale<double>{tau}};
    r.path_b = {Rescale<double>{tau}, Linearize{}};

    const ModelD ma = apply_sequence(model, r.path_a);
    const ModelD mb = apply_sequence(model, r.path_b);
    r.param_comparison = compare_params(ma, mb);

    const Signal chi = signal.rescaled(tau);
    const TrajectoryD ta = reference_solve(ma, h0, chi, grid, substeps);
    const TrajectoryD tb = reference_solve(mb, h0, chi, grid, substeps);
    r.trajectory_max_abs = max_abs_or_inf(ta.states, tb.states, &r.trajectory_max_rel);
    r.pass = r.param_comparison.exact() && r.param_comparison.max_abs_param_diff == 0.0 &&
             r.trajectory_max_abs <= r.tolerance_used;
    return r;
}

CommutatorReport check_rescale_inverse(const ModelD& model, double tau)
{
    CommutatorReport r;
    r.claim = Claim::RescaleInverse;
    r.tolerance_used = 1e-15;
    r.path_a = {Rescale<double>{tau}, Rescale<double>{1.0 / tau}};
    r.path_b = {};

    const ModelD ma = apply_sequence(model, r.path_a);
    const ModelD& mb = model;
    r.param_comparison = compare_params(ma, mb);

    const auto& c = r.param_comparison;
    const double gain_rel = c.gain_diff / mb.gain();
    // The nominal step of a discrete model goes through the same two roundings as the gain.
    const double delta_rel = mb.is_discrete() ? c.delta_diff / mb.delta() : c.delta_diff;
    r.trajectory_max_abs = 0.0;
    r.trajectory_max_rel = std::max(gain_rel, delta_rel);
    r.pass = c.structurally_equal && c.max_abs_weight_diff == 0.0 &&
             c.effective_step_diff.value_or(0.0) == 0.0 && gain_rel <= r.tolerance_used &&
             delta_rel <= r.tolerance_used;
    return r;
}

CommutatorReport check_speed_reparameterization(const ModelD& model, double tau, const Vector& h0,
                                                const Signal& signal, double horizon, int n_steps)
{
    CommutatorReport r;
    r.claim = Claim::Speed;
    r.tolerance_used = 0.0;
    const double delta = horizon / n_steps;
    r.path_a = {Discretize<double>{delta}};
    r.path_b = {Rescale<double>{tau}, Discretize<double>{delta / tau}};

    const ModelD ma = apply_sequence(model, r.path_a);
    const ModelD mb = apply_sequence(model, r.path_b);
    r.param_comparison = compare_params(ma, mb);

    const TrajectoryD ta = simulate(ma, h0, signal, Grid(0.0, horizon, n_steps));
    const TrajectoryD tb = simulate(mb, h0, signal.rescaled(tau), Grid(0.0, horizon / tau, n_steps));
    r.trajectory_max_abs = max_abs_or_inf(ta.states, tb.states, &r.trajectory_max_rel);

    // Time axes must differ by exactly the factor tau.
    double axis_err = 0.0;
    for (Eigen::Index k = 0; k <= n_steps; ++k) {
        const double t = ta.grid.time(k);
        axis_err = std::max(axis_err, std::abs(tau * tb.grid.time(k) - t) / std::max(1.0, std::abs(t)));
    }
    const auto& c = r.param_comparison;
    r.pass = c.max_abs_weight_diff == 0.0 && c.effective_step_diff.value_or(1.0) == 0.0 &&
             r.trajectory_max_abs <= r.tolerance_used && axis_err <= 1e-12;
    return r;
}

// ---------------------------------------------------------------------------
// Stability and fixed points

StabilityImplicationSummary check_stability_implication(const EnsembleSpec& spec, double delta_low,
                                                        double delta_high, unsigned threads)
{
    spec.validate();
    struct Outcome {
        bool discrete_stable = false;
        bool continuous_stable = false;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(spec.count));
    parallel_for(outcomes.size(), threads, [&](std::size_t i) {
        const int idx = static_cast<int>(i);
        const ModelD lin = linearize(random_model(spec, idx));
        const double step = random_step(spec, idx, delta_low, delta_high);
        const ModelD disc = discretize(lin, step);
        const auto rd = stability_discrete(disc);
        const Vector zero_h = Vector::Zero(lin.n_units());
        const Vector zero_x = Vector::Zero(lin.n_inputs());
        const auto rc = stability_continuous(jacobian(lin, zero_h, zero_x));
        outcomes[i] = {rd.classification == Stability::Stable, rc.classification == Stability::Stable};
    });

    StabilityImplicationSummary s;
    for (const auto& o : outcomes) {
        ++s.tested;
        if (o.discrete_stable) {
            ++s.discrete_stable;
            if (!o.continuous_stable)
                ++s.violations;
        }
    }

    // Continuous-stable but discrete-unstable: eigenvalues -1 and 1 - 2.5.
    const ModelD scalar = linearize(make_model(scalar_params(1.0, 0.0), Activation::Tanh));
    const ModelD scalar_disc = discretize(scalar, 2.5);
    s.counterexample_continuous =
        stability_continuous(jacobian(scalar, Vector::Zero(1).eval(), Vector::Zero(0).eval()));
    s.counterexample_discrete = stability_discrete(scalar_disc);
    s.counterexample_included = true;
    s.counterexample_ok = s.counterexample_continuous.classification == Stability::Stable &&
                          s.counterexample_discrete.classification == Stability::Unstable;
    ++s.tested;
    return s;
}

SharedFixedPointSummary check_shared_fixed_point(const EnsembleSpec& spec, const std::vector<double>& deltas,
                                                 double tol, unsigned threads)
{
    spec.validate();
    struct Outcome {
        bool converged = false;
        int violations = 0;
        double worst = 0.0;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(spec.count));
    parallel_for(outcomes.size(), threads, [&](std::size_t i) {
        const int idx = static_cast<int>(i);
        const ModelD m = random_model(spec, idx);
        const Vector x = Vector::Zero(m.n_inputs());
        const auto fp = fixed_point(m, x, Vector::Zero(m.n_units()).eval(), tol);
        Outcome o;
        o.converged = fp.converged && fp.residual <= tol;
        if (o.converged) {
            for (double delta : deltas) {
                const ModelD md = discretize(m, delta);
                const double res = (euler_step(md, fp.h_star, x) - fp.h_star).cwiseAbs().maxCoeff();
                const double bound = md.effective_step() * tol;
                o.worst = std::max(o.worst, res / md.effective_step());
                if (!(res <= bound))
                    ++o.violations;
            }
        }
        outcomes[i] = o;
    });

    SharedFixedPointSummary s;
    for (const auto& o : outcomes) {
        ++s.tested;
        s.converged += o.converged ? 1 : 0;
        s.violations += o.violations;
        s.worst_scaled_residual = std::max(s.worst_scaled_residual, o.worst);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Suite

std::vector<std::string> SuiteConfig::validate() const
{
    std::vector<std::string> issues;
    auto positive = [&](const std::string& path, double v) {
        if (!(v > 0.0) || !std::isfinite(v))
            issues.push_back(path + ": must be finite and > 0");
    };
    auto non_negative = [&](const std::string& path, double v) {
        if (!(v >= 0.0) || !std::isfinite(v))
            issues.push_back(path + ": must be finite and >= 0");
    };
    auto count_ok = [&](const std::string& path, int v) {
        if (v < 0)
            issues.push_back(path + ": must be >= 0");
    };
    auto int_positive = [&](const std::string& path, int v) {
        if (v < 1)
            issues.push_back(path + ": must be >= 1");
    };
    auto all_positive = [&](const std::string& path, const std::vector<double>& vs) {
        for (std::size_t i = 0; i < vs.size(); ++i)
            positive(path + "[" + std::to_string(i) + "]", vs[i]);
    };
    auto sizes_ok = [&](const std::string& path, const std::vector<int>& vs) {
        for (std::size_t i = 0; i < vs.size(); ++i)
            int_positive(path + "[" + std::to_string(i) + "]", vs[i]);
    };

    non_negative("verify.ensemble.weight_std_gain", ensemble.weight_std_gain);
    positive("verify.ensemble.lambda", ensemble.lambda);
    non_negative("verify.ensemble.bias_std", ensemble.bias_std);
    if (ensemble.n_inputs < 0)
        issues.push_back("verify.ensemble.n_inputs: must be >= 0");
    non_negative("verify.ensemble.h0_scale", ensemble.h0_scale);
    non_negative("verify.ensemble.input_amplitude", ensemble.input_amplitude);
    non_negative("verify.ensemble.input_frequency", ensemble.input_frequency);
    if (!is_linearizable(ensemble.activation))
        issues.push_back("verify.ensemble.activation: must be linearizable");

    sizes_ok("verify.dl.sizes", dl.sizes);
    count_ok("verify.dl.count", dl.count);
    positive("verify.dl.delta", dl.delta);
    int_positive("verify.dl.n_steps", dl.n_steps);

    sizes_ok("verify.lr.sizes", lr.sizes);
    count_ok("verify.lr.count", lr.count);
    all_positive("verify.lr.taus", lr.taus);
    positive("verify.lr.horizon", lr.horizon);
    int_positive("verify.lr.n_steps", lr.n_steps);
    int_positive("verify.lr.substeps", lr.substeps);
    non_negative("verify.lr.tolerance", lr.tolerance);

    sizes_ok("verify.rd.sizes", rd.sizes);
    count_ok("verify.rd.count", rd.count);
    all_positive("verify.rd.taus", rd.taus);
    positive("verify.rd.delta_s", rd.delta_s);
    int_positive("verify.rd.n_steps", rd.n_steps);
    non_negative("verify.rd.control_threshold", rd.control_threshold);

    all_positive("verify.rescale_inverse.taus", rescale_inverse.taus);
    count_ok("verify.rescale_inverse.count", rescale_inverse.count);
    int_positive("verify.rescale_inverse.n_units", rescale_inverse.n_units);
    positive("verify.rescale_inverse.delta", rescale_inverse.delta);

    all_positive("verify.speed.taus", speed.taus);
    count_ok("verify.speed.count", speed.count);
    int_positive("verify.speed.n_units", speed.n_units);
    positive("verify.speed.horizon", speed.horizon);
    int_positive("verify.speed.n_steps", speed.n_steps);

    count_ok("verify.stability.count", stability.count);
    int_positive("verify.stability.n_units", stability.n_units);
    non_negative("verify.stability.delta_low", stability.delta_low);
    positive("verify.stability.delta_high", stability.delta_high);
    if (stability.delta_high <= stability.delta_low)
        issues.push_back("verify.stability.delta_high: must exceed delta_low");

    count_ok("verify.fixed_point.count", fixed_point.count);
    int_positive("verify.fixed_point.n_units", fixed_point.n_units);
    all_positive("verify.fixed_point.deltas", fixed_point.deltas);
    positive("verify.fixed_point.tol", fixed_point.tol);
    return issues;
}

namespace {

EnsembleSpec ensemble_for(const SuiteConfig& cfg, std::string_view check, int n_units, int count)
{
    EnsembleSpec e;
    e.seed = derive_seed(cfg.ensemble.seed, std::string(check) + "/N=" + std::to_string(n_units));
    e.count = count;
    e.n_units = n_units;
    e.n_inputs = cfg.ensemble.n_inputs;
    e.weight_std_gain = cfg.ensemble.weight_std_gain;
    e.lambda = cfg.ensemble.lambda;
    e.activation = cfg.ensemble.activation;
    e.bias_std = cfg.ensemble.bias_std;
    return e;
}

Signal suite_signal(const SuiteConfig& cfg, const EnsembleSpec& spec, int index)
{
    if (spec.n_inputs == 0)
        return Signal::zero(0);
    // Member-specific phase so inputs differ across the ensemble.
    auto rng = std::mt19937_64(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(index)),
                                           static_cast<std::uint64_t>(Stream::Input)));
    const double phase = std::uniform_real_distribution<double>(0.0, 6.283185307179586)(rng);
    return Signal::sine(Vector::Constant(spec.n_inputs, cfg.ensemble.input_amplitude),
                        cfg.ensemble.input_frequency, phase);
}

/// Runs `make_report(spec, index)` over an ensemble in parallel, in index order.
template <typename MakeReports>
void collect(CheckSummary& summary, const SuiteConfig& cfg, const EnsembleSpec& spec, MakeReports&& make_reports)
{
    std::vector<std::vector<CommutatorReport>> per_member(static_cast<std::size_t>(spec.count));
    parallel_for(per_member.size(), cfg.threads,
                 [&](std::size_t i) { per_member[i] = make_reports(static_cast<int>(i)); });
    for (auto& reports : per_member) {
        for (auto& r : reports) {
            ++summary.tested;
            summary.tolerance = r.tolerance_used;
            summary.worst_max_abs = std::max(summary.worst_max_abs, r.trajectory_max_abs);
            if (r.pass)
                ++summary.passed;
            if (!r.pass || cfg.include_all_reports)
                summary.reports.push_back(std::move(r));
        }
    }
}

} // namespace

SuiteReport run_suite(const SuiteConfig& cfg)
{
    if (auto issues = cfg.validate(); !issues.empty())
        throw ConfigError(std::move(issues));

    SuiteReport report;

    if (cfg.dl.enabled) {
        CheckSummary s;
        s.name = "commutator_DL";
        for (int n : cfg.dl.sizes) {
            const auto spec = ensemble_for(cfg, "dl", n, cfg.dl.count);
            collect(s, cfg, spec, [&](int i) {
                return std::vector{check_discretize_linearize(random_model(spec, i),
                                                              cfg.dl.delta,
                                                              random_state(spec, i, cfg.ensemble.h0_scale),
                                                              suite_signal(cfg, spec, i), cfg.dl.n_steps)};
            });
        }
        s.pass = s.passed == s.tested;
        report.checks.push_back(std::move(s));
    }

    if (cfg.lr.enabled) {
        CheckSummary s;
        s.name = "commutator_LR";
        const Grid grid(0.0, cfg.lr.horizon, cfg.lr.n_steps);
        for (int n : cfg.lr.sizes) {
            const auto spec = ensemble_for(cfg, "lr", n, cfg.lr.count);
            collect(s, cfg, spec, [&](int i) {
                const ModelD m = random_model(spec, i);
                const Vector h0 = random_state(spec, i, cfg.ensemble.h0_scale);
                const Signal sig = suite_signal(cfg, spec, i);
                std::vector<CommutatorReport> out;
                for (double tau : cfg.lr.taus) {
                    auto r = check_linearize_rescale(m, tau, h0, sig, grid, cfg.lr.substeps);
                    r.tolerance_used = cfg.lr.tolerance;
                    r.pass = r.param_comparison.exact() && r.param_comparison.max_abs_param_diff == 0.0 &&
                             r.trajectory_max_abs <= r.tolerance_used;
                    out.push_back(std::move(r));
                }
                return out;
            });
        }
        s.pass = s.passed == s.tested;
        report.checks.push_back(std::move(s));
    }

    if (cfg.rd.enabled) {
        CheckSummary s;
        s.name = "commutator_RD";
        CheckSummary control;
        control.name = "commutator_RD_negative_control";
        control.tolerance = cfg.rd.control_threshold;
        double weakest_control = std::numeric_limits<double>::infinity();
        for (int n : cfg.rd.sizes) {
            const auto spec = ensemble_for(cfg, "rd", n, cfg.rd.count);
            struct Member {
                std::vector<CommutatorReport> primary;
                std::vector<CommutatorReport> controls;
            };
            std::vector<Member> members(static_cast<std::size_t>(spec.count));
            parallel_for(members.size(), cfg.threads, [&](std::size_t i) {
                const int idx = static_cast<int>(i);
                const ModelD m = random_model(spec, idx);
                const Vector h0 = random_state(spec, idx, cfg.ensemble.h0_scale);
                const Signal sig = suite_signal(cfg, spec, idx);
                for (double tau : cfg.rd.taus) {
                    members[i].primary.push_back(check_rescale_discretize(m, tau, cfg.rd.delta_s, h0, sig,
                                                                          cfg.rd.n_steps, cfg.rd.force_misaligned));
                    if (cfg.rd.negative_control && tau != 1.0)
                        members[i].controls.push_back(
                            check_rescale_discretize(m, tau, cfg.rd.delta_s, h0, sig, cfg.rd.n_steps, true));
                }
            });
            for (auto& mem : members) {
                for (auto& r : mem.primary) {
                    ++s.tested;
                    s.worst_max_abs = std::max(s.worst_max_abs, r.trajectory_max_abs);
                    if (r.pass)
                        ++s.passed;
                    if (!r.pass || cfg.include_all_reports)
                        s.reports.push_back(std::move(r));
                }
                for (auto& r : mem.controls) {
                    ++control.tested;
                    weakest_control = std::min(weakest_control, r.trajectory_max_abs);
                    // A control succeeds when the misaligned ordering is detected.
                    const bool detected = !r.pass && r.trajectory_max_abs > cfg.rd.control_threshold;
                    if (detected)
                        ++control.passed;
                    if (!detected || cfg.include_all_reports)
                        control.reports.push_back(std::move(r));
                }
            }
        }
        s.pass = s.passed == s.tested;
        report.checks.push_back(std::move(s));
        if (cfg.rd.negative_control) {
            control.pass = control.passed == control.tested;
            control.worst_max_abs = control.tested ? weakest_control : 0.0;
            control.metrics.emplace_back("min_control_max_abs", control.worst_max_abs);
            report.checks.push_back(std::move(control));
        }
    }

    if (cfg.rescale_inverse.enabled) {
        CheckSummary s;
        s.name = "rescale_inverse";
        const auto spec = ensemble_for(cfg, "rescale_inverse", cfg.rescale_inverse.n_units, cfg.rescale_inverse.count);
        double worst_rel = 0.0;
        collect(s, cfg, spec, [&](int i) {
            const ModelD m = random_model(spec, i);
            const ModelD md = discretize(m, cfg.rescale_inverse.delta);
            std::vector<CommutatorReport> out;
            for (double tau : cfg.rescale_inverse.taus) {
                out.push_back(check_rescale_inverse(m, tau));
                out.push_back(check_rescale_inverse(md, tau));
            }
            return out;
        });
        for (const auto& r : s.reports)
            worst_rel = std::max(worst_rel, r.trajectory_max_rel);
        s.tolerance = 1e-15;
        s.pass = s.passed == s.tested;
        s.metrics.emplace_back("worst_failing_relative_error", worst_rel);
        report.checks.push_back(std::move(s));
    }

    if (cfg.speed.enabled) {
        CheckSummary s;
        s.name = "speed_reparameterization";
        const auto spec = ensemble_for(cfg, "speed", cfg.speed.n_units, cfg.speed.count);
        collect(s, cfg, spec, [&](int i) {
            const ModelD m = random_model(spec, i);
            const Vector h0 = random_state(spec, i, cfg.ensemble.h0_scale);
            const Signal sig = suite_signal(cfg, spec, i);
            std::vector<CommutatorReport> out;
            for (double tau : cfg.speed.taus)
                out.push_back(check_speed_reparameterization(m, tau, h0, sig, cfg.speed.horizon, cfg.speed.n_steps));
            return out;
        });
        s.pass = s.passed == s.tested;
        report.checks.push_back(std::move(s));
    }

    if (cfg.stability.enabled) {
        CheckSummary s;
        s.name = "stability_implication";
        auto spec = ensemble_for(cfg, "stability", cfg.stability.n_units, cfg.stability.count);
        spec.n_inputs = 0;
        const auto sum = check_stability_implication(spec, cfg.stability.delta_low, cfg.stability.delta_high,
                                                     cfg.threads);
        s.tested = sum.tested;
        s.passed = sum.tested - sum.violations - (sum.counterexample_ok ? 0 : 1);
        s.pass = sum.violations == 0 && sum.counterexample_included && sum.counterexample_ok;
        s.metrics = {{"discrete_stable", double(sum.discrete_stable)},
                     {"violations", double(sum.violations)},
                     {"counterexample_ok", sum.counterexample_ok ? 1.0 : 0.0},
                     {"counterexample_continuous_margin", sum.counterexample_continuous.margin},
                     {"counterexample_discrete_margin", sum.counterexample_discrete.margin}};
        report.checks.push_back(std::move(s));
    }

    if (cfg.fixed_point.enabled) {
        CheckSummary s;
        s.name = "shared_fixed_point";
        const auto spec = ensemble_for(cfg, "fixed_point", cfg.fixed_point.n_units, cfg.fixed_point.count);
        const auto sum = check_shared_fixed_point(spec, cfg.fixed_point.deltas, cfg.fixed_point.tol, cfg.threads);
        s.tested = sum.tested;
        s.passed = sum.converged;
        s.tolerance = cfg.fixed_point.tol;
        s.worst_max_abs = sum.worst_scaled_residual;
        s.pass = sum.converged == sum.tested && sum.violations == 0;
        s.metrics = {{"converged", double(sum.converged)},
                     {"violations", double(sum.violations)},
                     {"worst_scaled_residual", sum.worst_scaled_residual}};
        report.checks.push_back(std::move(s));
    }

    report.pass = std::all_of(report.checks.begin(), report.checks.end(), [](const auto& c) { return c.pass; });
    return report;
}

std::string format_table(const SuiteReport& report)
{
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-34s %8s %8s %12s %12s  %s\n", "check", "tested", "passed", "tolerance",
                  "worst", "result");
    os << line;
    for (const auto& c : report.checks) {
        std::snprintf(line, sizeof line, "%-34s %8d %8d %12s %12s  %s\n", c.name.c_str(), c.tested, c.passed,
                      fmt(c.tolerance).c_str(), fmt(c.worst_max_abs).c_str(), c.pass ? "PASS" : "FAIL");
        os << line;
    }
    os << "overall: " << (report.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

} // namespace ctrnn
