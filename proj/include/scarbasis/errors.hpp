#pragma once

#include <stdexcept>
#include <string>

namespace scarbasis {

// Bad user input: malformed files, inconsistent parameters, out-of-range
// requests. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Algorithmic failure at runtime: non-convergence, step-size underflow,
// energetically forbidden section points. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem trouble: unreadable, truncated or malformed data files.
// CLI maps this to exit code 4.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace scarbasis
