#pragma once

#include <iosfwd>

namespace ctrnn::cli {

/// Process exit statuses.
enum ExitCode : int { kSuccess = 0, kHardError = 1, kSuiteFailure = 2 };

/// Entry point shared by the executable and the tests:
///   ctrnn {transform|simulate|analyze|verify} [--config PATH] [--out DIR] [--seed N] [--quiet]
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ctrnn::cli
