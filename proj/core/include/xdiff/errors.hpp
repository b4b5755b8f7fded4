#pragma once

#include <stdexcept>
#include <string>

namespace xdiff {

/// Error taxonomy used by the CLI to produce machine-parseable exit lines.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A required input artifact is missing or its hash chain does not match.
struct DependencyError : std::runtime_error {
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training diverged (non-finite loss); carries the tail of the loss trace.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xdiff
