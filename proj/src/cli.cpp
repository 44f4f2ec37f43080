#include "ctrnn/cli.hpp"

#include "ctrnn/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace ctrnn::cli {

namespace {

namespace fs = std::filesystem;
using io::json;

struct GlobalOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

io::ExperimentConfig load(const GlobalOptions& opts)
{
    if (opts.config.empty())
        return io::parse_config(json::object(), {}, opts.seed);
    return io::load_config(opts.config, opts.seed);
}

std::optional<fs::path> output_dir(const GlobalOptions& opts, const io::ExperimentConfig& cfg)
{
    if (!opts.out.empty())
        return fs::path(opts.out);
    if (cfg.output.directory)
        return fs::path(*cfg.output.directory);
    return std::nullopt;
}

void write_json(const fs::path& file, const json& doc)
{
    if (file.has_parent_path())
        fs::create_directories(file.parent_path());
    std::ofstream os(file, std::ios::binary);
    if (!os)
        throw Error("cannot write " + file.string());
    os << doc.dump(2) << '\n';
}

const ModelD& require_model(const io::ExperimentConfig& cfg)
{
    if (!cfg.model)
        throw ConfigError({"model: required for this command"});
    return *cfg.model;
}

json report_header(const char* command, const io::ExperimentConfig& cfg)
{
    return {{"command", command}, {"config", cfg.raw}};
}

int cmd_transform(const GlobalOptions& opts, std::ostream& out)
{
    const auto cfg = load(opts);
    const ModelD m = apply_sequence(require_model(cfg), cfg.transforms);
    const std::string dig = io::hex_digest(m);
    if (!opts.quiet) {
        out << "time_domain: " << to_string(m.time_domain()) << "\n"
            << "form: " << to_string(m.form()) << "\n"
            << "activation: " << to_string(m.activation()) << "\n"
            << "gain: " << io::format_double(m.gain()) << "\n";
        if (m.is_discrete())
            out << "delta: " << io::format_double(m.delta()) << "\n"
                << "effective_step: " << io::format_double(m.effective_step()) << "\n";
        out << "digest: " << dig << "\n";
    }
    if (auto dir = output_dir(opts, cfg)) {
        json doc = report_header("transform", cfg);
        doc["result"] = {{"model", io::to_json(m)}, {"digest", dig}};
        write_json(*dir / "transform_report.json", doc);
        write_json(*dir / "model.json", io::to_json(m));
    }
    return kSuccess;
}

int cmd_simulate(const GlobalOptions& opts, std::ostream& out)
{
    const auto cfg = load(opts);
    ModelD m = apply_sequence(require_model(cfg), cfg.transforms);
    if (!cfg.simulation)
        throw ConfigError({"simulation: required for this command"});
    const auto& sim = *cfg.simulation;
    if (sim.discretize) {
        if (m.is_discrete())
            throw ConfigError({"simulation.discretize: model is already discrete after transforms"});
        m = discretize(m, *sim.discretize);
    }
    const Signal signal = sim.signal.value_or(Signal::zero(m.n_inputs()));
    const TrajectoryD traj = m.is_discrete() ? simulate(m, sim.h0, signal, sim.grid)
                                             : reference_solve(m, sim.h0, signal, sim.grid, sim.substeps);

    const fs::path dir = output_dir(opts, cfg).value_or(fs::path("."));
    fs::create_directories(dir);
    if (cfg.output.csv) {
        std::ofstream os(dir / "trajectory.csv", std::ios::binary);
        if (!os)
            throw Error("cannot write " + (dir / "trajectory.csv").string());
        io::write_trajectory_csv(os, traj);
    }
    json result = {{"generator", to_string(traj.generator)},
                   {"rows", traj.states.rows()},
                   {"diverged", traj.diverged},
                   {"first_bad_index", traj.first_bad_index ? json(*traj.first_bad_index) : json(nullptr)}};
    if (cfg.output.json) {
        write_json(dir / "trajectory.json", io::to_json(traj));
        json doc = report_header("simulate", cfg);
        doc["model"] = io::to_json(m);
        doc["digest"] = io::hex_digest(m);
        doc["result"] = result;
        write_json(dir / "simulate_report.json", doc);
    }
    if (!opts.quiet) {
        out << "generator: " << to_string(traj.generator) << "\n"
            << "rows: " << traj.states.rows() << "\n";
        if (traj.diverged)
            out << "diverged: yes (first bad index " << *traj.first_bad_index << ")\n";
        else {
            out << "final state:";
            for (Eigen::Index i = 0; i < traj.states.cols(); ++i)
                out << ' ' << io::format_double(traj.states(traj.states.rows() - 1, i));
            out << "\n";
        }
        out << "written to " << dir.string() << "\n";
    }
    return kSuccess;
}

int cmd_analyze(const GlobalOptions& opts, std::ostream& out)
{
    const auto cfg = load(opts);
    const ModelD m = apply_sequence(require_model(cfg), cfg.transforms);
    const ModelD cm = m.is_discrete() ? continuous_counterpart(m) : m;
    const auto& an = cfg.analysis;
    const Vector x = an.x.value_or(Vector::Zero(m.n_inputs()));
    Vector h_at = an.guess.value_or(Vector::Zero(m.n_units()));

    json result = json::object();
    if (an.fixed_point) {
        const FixedPointResultD fp =
            m.is_linearized() ? linear_fixed_point(cm, x) : fixed_point(cm, x, h_at, an.tol, an.max_iter);
        result["fixed_point"] = io::to_json(fp);
        result["fixed_point"]["method"] = m.is_linearized() ? "linear_solve" : "newton";
        h_at = fp.h_star;
        if (!opts.quiet) {
            out << "fixed point (" << (m.is_linearized() ? "linear solve" : "newton") << "): "
                << (fp.converged ? "converged" : "NOT converged") << ", residual "
                << io::format_double(fp.residual) << ", iterations " << fp.iterations << "\n  h* =";
            for (Eigen::Index i = 0; i < fp.h_star.size(); ++i)
                out << ' ' << io::format_double(fp.h_star(i));
            out << "\n";
        }
    }
    if (an.stability) {
        const Matrix jac = jacobian(cm, h_at, x);
        const auto sc = stability_continuous(jac);
        result["stability_continuous"] = io::to_json(sc);
        auto print = [&](const char* label, const StabilityReportD& r) {
            if (opts.quiet)
                return;
            out << label << ": " << to_string(r.classification) << " (margin " << io::format_double(r.margin)
                << ")\n  eigenvalues:";
            for (const auto& mu : r.eigenvalues)
                out << " (" << io::format_double(mu.real()) << ", " << io::format_double(mu.imag()) << ")";
            out << "\n";
        };
        print("continuous stability", sc);
        if (m.is_discrete()) {
            const auto sd = m.is_linearized() ? stability_discrete(m) : stability_discrete_at(m, h_at, x);
            result["stability_discrete"] = io::to_json(sd);
            print("discrete stability", sd);
        }
    }
    if (auto dir = output_dir(opts, cfg)) {
        json doc = report_header("analyze", cfg);
        doc["model"] = io::to_json(m);
        doc["digest"] = io::hex_digest(m);
        doc["result"] = result;
        write_json(*dir / "analysis.json", doc);
    }
    return kSuccess;
}

int cmd_verify(const GlobalOptions& opts, std::ostream& out)
{
    const auto cfg = load(opts);
    const SuiteReport report = run_suite(cfg.verify);
    if (!opts.quiet)
        out << format_table(report);
    if (auto dir = output_dir(opts, cfg)) {
        json doc = report_header("verify", cfg);
        doc["resolved"] = io::to_json(cfg.verify);
        doc["result"] = io::to_json(report);
        write_json(*dir / "verify_report.json", doc);
    }
    return report.pass ? kSuccess : kSuiteFailure;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Continuous-time RNN transforms: rescale, discretize, linearize"};
    app.require_subcommand(1);
    GlobalOptions opts;
    app.add_option("--config", opts.config, "Experiment config (JSON)");
    app.add_option("--out", opts.out, "Output directory");
    app.add_option("--seed", opts.seed, "Override every seed in the config");
    app.add_flag("--quiet", opts.quiet, "Only write files");
    auto* transform = app.add_subcommand("transform", "Apply the transform sequence and describe the result");
    auto* sim = app.add_subcommand("simulate", "Generate a trajectory (Euler or RK4 reference)");
    auto* analyze = app.add_subcommand("analyze", "Fixed point, Jacobian and stability");
    auto* verify = app.add_subcommand("verify", "Run the commutativity/stability suite");
    for (auto* sub : {transform, sim, analyze, verify})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kHardError;
    }

    try {
        if (*transform)
            return cmd_transform(opts, out);
        if (*sim)
            return cmd_simulate(opts, out);
        if (*analyze)
            return cmd_analyze(opts, out);
        return cmd_verify(opts, out);
    } catch (const ConfigError& e) {
        err << "error: invalid configuration\n";
        for (const auto& issue : e.issues())
            err << "  " << issue << "\n";
        return kHardError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kHardError;
    }
}

} // namespace ctrnn::cli
