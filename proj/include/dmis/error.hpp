#pragma once

#include <stdexcept>
#include <string>

namespace dmis {

/// Invalid user-facing configuration (bad sizes, unknown names, bad keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, solver blow-up, training divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few distinct points or an all-collinear point set.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file the caller relies on is absent or unreadable.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (wrong tape, missing jet order, bad query).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Process exit codes shared by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitMissingArtifact = 4,
};

int exit_code_for_current_exception() noexcept;

}  // namespace dmis
