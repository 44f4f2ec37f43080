#pragma once

// Config loading, model/report serialization and trajectory CSV.

#include "ctrnn/analysis.hpp"
#include "ctrnn/simulate.hpp"
#include "ctrnn/transforms.hpp"
#include "ctrnn/verify.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ctrnn::io {

using json = nlohmann::json;

struct SimulationBlock {
    Vector h0;
    std::optional<Signal> signal; ///< zero signal when absent
    Grid grid;
    int substeps = kDefaultSubsteps;
    /// Discretize with this step before simulating (continuous models only).
    std::optional<double> discretize;
};

struct AnalysisBlock {
    std::optional<Vector> x;     ///< constant input, zero when absent
    std::optional<Vector> guess; ///< Newton start, zero when absent
    double tol = kDefaultFixedPointTol;
    int max_iter = kDefaultFixedPointMaxIter;
    bool fixed_point = true;
    bool stability = true;
};

struct OutputBlock {
    std::optional<std::string> directory;
    bool csv = true;
    bool json = true;
};

struct ExperimentConfig {
    json raw; ///< config as read, echoed into reports
    std::filesystem::path base_dir;
    std::optional<ModelD> model;
    std::vector<Step> transforms;
    std::optional<SimulationBlock> simulation;
    AnalysisBlock analysis;
    SuiteConfig verify;
    OutputBlock output;
};

/// Parses and validates a whole experiment config. Sidecar CSV paths are
/// resolved against `base_dir`. `seed_override` replaces every seed in the
/// config. Throws ConfigError listing every bad field.
ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {},
                              std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& file,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

json to_json(const ModelD& model);
/// Inverse of to_json(ModelD); exact round trip.
ModelD model_from_json(const json& j, const std::filesystem::path& base_dir = {});

json to_json(const Step& step);
json to_json(const ParamComparison<double>& c);
json to_json(const TrajectoryD& traj);
json to_json(const StabilityReportD& report);
json to_json(const FixedPointResultD& result);
json to_json(const CommutatorReport& report);
json to_json(const SuiteReport& report);
json to_json(const SuiteConfig& config);

/// FNV-1a 64 over the canonical serialization of the model.
std::uint64_t digest(const ModelD& model);
std::string hex_digest(const ModelD& model);

/// Header `t,h_1,...,h_N`, one row per stored state, LF endings, %.17g floats.
void write_trajectory_csv(std::ostream& os, const TrajectoryD& traj);

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

/// Reads a numeric CSV with a header row.
CsvTable read_csv(std::istream& is);
/// Reads a headerless numeric matrix (sidecar weight files).
Matrix read_matrix_csv(const std::filesystem::path& file);

/// %.17g in the C locale.
std::string format_double(double v);

} // namespace ctrnn::io
