#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmis/config.hpp"
#include "dmis/metrics.hpp"
#include "dmis/reference.hpp"

namespace dmis {

std::string default_grid_path(const std::string& benchmark, int nx, int nt);

/// Solves and caches a reference grid. Returns false when an existing file
/// with the same header was reused.
bool cmd_reference(const std::string& benchmark, int nx, int nt, const std::string& path, std::ostream& log);

/// Loads the grid at `path`, solving it first if absent.
SolutionGrid ensure_reference(const std::string& benchmark, int nx, int nt, const std::string& path,
                              std::ostream& log);

/// Runs training into the config's run directory: config.txt, log.csv,
/// rebuilds.csv, curve.csv and checkpoint.dmis. Returns the directory.
std::string cmd_train(const RunConfig& cfg, std::ostream& log);

struct Evaluation {
  ErrorReport errors;
  ConvergenceReport convergence;
};

inline constexpr int kReportLevels[] = {2, 3, 4, 5};

/// Writes errors.csv, convergence.csv and summary.txt into the run directory.
Evaluation cmd_evaluate(const std::string& run_dir, const std::string& grid_path, std::ostream& log);

struct CompareOptions {
  std::string benchmark = "burgers";
  std::vector<std::uint64_t> seeds{0};
  std::vector<SamplerKind> samplers{SamplerKind::kUniform, SamplerKind::kDmis};
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string out_dir;    // empty: <output root>/compare-<benchmark>
  std::string grid_path;  // empty: the default cache location
};

struct RunOutcome {
  SamplerKind sampler = SamplerKind::kUniform;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Evaluation eval;
  std::vector<LossSample> curve;
  std::size_t rebuilds = 0;
  std::int64_t iterations = 0;
};

struct CompareResult {
  std::vector<RunOutcome> runs;
  int exit_code = 0;
};

/// Trains and evaluates every (sampler, seed) pair in sequence, then writes
/// comparison.csv (test-segment medians per sampler) and curves/<run>.csv.
CompareResult cmd_compare(const CompareOptions& opt, std::ostream& log);

}  // namespace dmis
