#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmis/trainer.hpp"

namespace dmis {

/// A training run as stored on disk: the trainer settings plus where the run
/// lives and which reference grid evaluates it.
struct RunConfig {
  TrainConfig train;
  std::string output;  // run directory; empty means <output root>/<benchmark>-<sampler>-s<seed>
  int ref_nx = 0;
  int ref_nt = 0;
  std::int64_t checkpoint_every = 1000;
};

/// Per-benchmark hyperparameters; fields they leave open keep TrainConfig defaults.
RunConfig table_defaults(std::string_view benchmark);

/// Reference grid resolution that passes the solver's resolution guard.
std::pair<int, int> default_reference_grid(std::string_view benchmark);

/// Recognized keys in echo order.
const std::vector<std::string>& config_keys();

std::string_view sampler_name(SamplerKind s);
SamplerKind parse_sampler(std::string_view name);

/// Applies one key=value setting; unknown keys and malformed values throw ConfigError.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Resolves a list of settings: the benchmark (last one wins, default burgers)
/// selects the per-benchmark defaults, then every other setting applies in order.
RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& settings);

/// Parses `key = value` lines; blank lines and `#` comments are skipped. An
/// optional first line `dmis-config v1` declares the version.
std::vector<std::pair<std::string, std::string>> parse_settings(std::istream& in);
std::vector<std::pair<std::string, std::string>> read_settings_file(const std::string& path);

/// Writes the versioned echo with every resolved key.
void write_config(std::ostream& out, const RunConfig& cfg);

std::string format_double(double v);

/// Output root from DMIS_OUTPUT_ROOT, or "dmis-runs".
std::string output_root();
std::string default_run_dir(const RunConfig& cfg);

}  // namespace dmis
