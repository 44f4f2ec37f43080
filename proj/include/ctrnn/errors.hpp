#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix/vector shapes disagree with n_units / n_inputs.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented precondition (non-positive rate, NaN entry, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A transform was applied to a model in the wrong state.
class TransformError : public Error {
public:
    TransformError(std::size_t step_index, const std::string& what)
        : Error("step " + std::to_string(step_index) + ": " + what), step_index_(step_index)
    {
    }

    std::size_t step_index() const noexcept { return step_index_; }

private:
    std::size_t step_index_;
};

/// The time grid does not match the model step, or two trajectories have different grids.
class GridError : public Error {
public:
    using Error::Error;
};

/// Linear system (state matrix A) is singular or too badly conditioned to solve.
class SingularError : public Error {
public:
    SingularError(const std::string& what, double condition_estimate)
        : Error(what), condition_estimate_(condition_estimate)
    {
    }

    double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

/// Invalid configuration; one entry per offending field, formatted "path: message".
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> issues)
        : Error(join(issues)), issues_(std::move(issues))
    {
    }

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues)
    {
        std::string out = "invalid configuration";
        for (const auto& i : issues)
            out += "\n  " + i;
        return out;
    }

    std::vector<std::string> issues_;
};

} // namespace ctrnn
