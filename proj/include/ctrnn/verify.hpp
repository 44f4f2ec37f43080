#pragma once

// Seeded property suites for the transform algebra: commutators, rescale
// inverse, speed reparameterization, stability implication and shared fixed
// points.

#include "ctrnn/analysis.hpp"
#include "ctrnn/simulate.hpp"
#include "ctrnn/transforms.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ctrnn {

/// Gaussian random networks: w_ij ~ N(0, (g / sqrt(N))^2), w_in ~ N(0, 1),
/// b ~ N(0, bias_std^2). Every member is derived from (seed, index) alone.
struct EnsembleSpec {
    std::uint64_t seed = 0;
    int count = 1;
    Eigen::Index n_units = 4;
    Eigen::Index n_inputs = 0;
    double weight_std_gain = 0.9;
    double lambda = 1.0;
    Activation activation = Activation::Tanh;
    double bias_std = 0.0;

    void validate() const;
};

/// Independent stream identifiers for per-member random draws.
enum class Stream : std::uint32_t { Params = 0, InitialState = 1, Step = 2, Input = 3 };

/// Deterministic 64-bit mixing of a seed with a tag (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

ModelD random_model(const EnsembleSpec& spec, int index);
/// N(0, scale^2) initial state for member `index`.
Vector random_state(const EnsembleSpec& spec, int index, double scale = 1.0);
/// Uniform draw in (low, high] for member `index`.
double random_step(const EnsembleSpec& spec, int index, double low, double high);

enum class Claim { RD, DL, LR, RescaleInverse, Speed };

std::string_view to_string(Claim c);

struct CommutatorReport {
    Claim claim = Claim::DL;
    std::vector<Step> path_a;
    std::vector<Step> path_b;
    ParamComparison<double> param_comparison;
    double trajectory_max_abs = 0.0;
    double trajectory_max_rel = 0.0;
    double tolerance_used = 0.0;
    bool pass = false;
};

CommutatorReport check_rescale_discretize(const ModelD& model, double tau, double delta_s,
                                          const Vector& h0, const Signal& signal, int n_steps,
                                          bool misaligned = false);

CommutatorReport check_discretize_linearize(const ModelD& model, double delta, const Vector& h0,
                                            const Signal& signal, int n_steps);

CommutatorReport check_linearize_rescale(const ModelD& model, double tau, const Vector& h0,
                                         const Signal& signal, const Grid& grid,
                                         int substeps = kDefaultSubsteps);

CommutatorReport check_rescale_inverse(const ModelD& model, double tau);

/// Runs the model on [0, T] with step T/n, and the tau-rescaled model on
/// [0, T/tau] with step T/(n tau); the state sequences must agree index by index.
CommutatorReport check_speed_reparameterization(const ModelD& model, double tau, const Vector& h0,
                                                const Signal& signal, double horizon, int n_steps);

struct StabilityImplicationSummary {
    int tested = 0;
    int discrete_stable = 0;
    int violations = 0;
    bool counterexample_included = false;
    /// Scalar lambda = 1, w = 0, gain*delta = 2.5 came out continuous-Stable, discrete-Unstable.
    bool counterexample_ok = false;
    StabilityReportD counterexample_continuous;
    StabilityReportD counterexample_discrete;
};

StabilityImplicationSummary check_stability_implication(const EnsembleSpec& spec, double delta_low,
                                                        double delta_high, unsigned threads = 0);

struct SharedFixedPointSummary {
    int tested = 0;
    int converged = 0;
    int violations = 0;
    /// max over members and steps of |euler(h*) - h*|_inf / (gain delta)
    double worst_scaled_residual = 0.0;
};

SharedFixedPointSummary check_shared_fixed_point(const EnsembleSpec& spec, const std::vector<double>& deltas,
                                                 double tol = kDefaultFixedPointTol, unsigned threads = 0);

// ---------------------------------------------------------------------------
// Suite

struct EnsembleDefaults {
    std::uint64_t seed = 20240607;
    double weight_std_gain = 0.9;
    double lambda = 1.0;
    Activation activation = Activation::Tanh;
    double bias_std = 0.1;
    Eigen::Index n_inputs = 2;
    double h0_scale = 1.0;
    double input_amplitude = 0.5;
    double input_frequency = 1.0;
};

struct SuiteConfig {
    EnsembleDefaults ensemble;
    unsigned threads = 0;
    bool include_all_reports = false;

    struct DL {
        bool enabled = true;
        std::vector<int> sizes{2, 8, 32};
        int count = 100;
        double delta = 0.01;
        int n_steps = 1000;
    } dl;

    struct LR {
        bool enabled = true;
        std::vector<int> sizes{2, 8, 32};
        int count = 100;
        std::vector<double> taus{0.5, 2.0, 3.0};
        double horizon = 1.0;
        int n_steps = 20;
        int substeps = 10;
        double tolerance = 1e-12;
    } lr;

    struct RD {
        bool enabled = true;
        std::vector<int> sizes{2, 8, 32};
        int count = 100;
        std::vector<double> taus{0.5, 2.0, 3.0, 10.0};
        double delta_s = 0.01;
        int n_steps = 100;
        bool negative_control = true;
        double control_threshold = 1e-3;
        /// Use the misaligned path as the primary check (must make the suite fail).
        bool force_misaligned = false;
    } rd;

    struct RescaleInverse {
        bool enabled = true;
        std::vector<double> taus{2.0, 3.0, 7.0, 0.2};
        int count = 20;
        int n_units = 8;
        double delta = 0.1;
    } rescale_inverse;

    struct Speed {
        bool enabled = true;
        std::vector<double> taus{0.5, 2.0};
        int count = 20;
        int n_units = 4;
        double horizon = 1.0;
        int n_steps = 100;
    } speed;

    struct StabilityImplication {
        bool enabled = true;
        int count = 1000;
        int n_units = 10;
        double delta_low = 0.0;
        double delta_high = 0.2;
    } stability;

    struct FixedPoint {
        bool enabled = true;
        int count = 20;
        int n_units = 8;
        std::vector<double> deltas{0.1, 1.0};
        double tol = kDefaultFixedPointTol;
    } fixed_point;

    /// Every problem as "path: message"; empty when valid.
    std::vector<std::string> validate() const;
};

struct CheckSummary {
    std::string name;
    int tested = 0;
    int passed = 0;
    double tolerance = 0.0;
    double worst_max_abs = 0.0;
    bool pass = false;
    std::vector<std::pair<std::string, double>> metrics;
    /// Failing reports, plus every report when include_all_reports is set.
    std::vector<CommutatorReport> reports;
};

struct SuiteReport {
    std::vector<CheckSummary> checks;
    bool pass = false;
};

SuiteReport run_suite(const SuiteConfig& config);

/// Fixed-width plain-text table, one line per check.
std::string format_table(const SuiteReport& report);

} // namespace ctrnn
