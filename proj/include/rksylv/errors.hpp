#pragma once

#include <stdexcept>
#include <string>

namespace rksylv {

// Zero or below-threshold pivot met during a factorization or solve.
struct SingularMatrixError : std::runtime_error {
  explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent user-facing configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Requested problem size exceeds a guard chosen to keep memory bounded.
struct SizeGuardError : std::runtime_error {
  explicit SizeGuardError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rksylv
