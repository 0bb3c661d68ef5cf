#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmis/commands.hpp"
#include "dmis/error.hpp"

namespace {

using Settings = std::vector<std::pair<std::string, std::string>>;

// One `--key value` flag per config key (underscores become dashes), plus
// repeated `--set key=value`.
struct OverrideFlags {
  std::map<std::string, std::optional<std::string>> values;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd, const std::string& skip = {}) {
    for (const std::string& key : dmis::config_keys()) {
      if (key == skip) continue;
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd->add_option("--" + flag, values[key], "config key " + key);
    }
    cmd->add_option("--set", sets, "extra key=value setting (repeatable)");
  }

  Settings collect() const {
    Settings out;
    for (const std::string& key : dmis::config_keys()) {
      const auto it = values.find(key);
      if (it != values.end() && it->second) out.emplace_back(key, *it->second);
    }
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw dmis::ConfigError("--set expects key=value, got '" + s + "'");
      out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PINN training with dynamic mesh-based importance sampling"};
  app.require_subcommand(1);

  auto* ref = app.add_subcommand("reference", "solve and cache a reference grid");
  std::string ref_benchmark, ref_out;
  std::optional<int> ref_nx, ref_nt;
  ref->add_option("benchmark", ref_benchmark)->required();
  ref->add_option("--nx", ref_nx, "spatial intervals");
  ref->add_option("--nt", ref_nt, "stored time intervals");
  ref->add_option("--out", ref_out, "grid file (default under the output root)");

  auto* tr = app.add_subcommand("train", "train one network");
  std::string config_file;
  OverrideFlags train_flags;
  tr->add_option("--config", config_file, "key = value config file");
  train_flags.attach(tr);

  auto* ev = app.add_subcommand("evaluate", "error and convergence reports for a run");
  std::string run_dir, eval_grid;
  ev->add_option("run-dir", run_dir)->required();
  ev->add_option("--grid", eval_grid, "reference grid (default: the run's cached grid)");

  auto* cmp = app.add_subcommand("compare", "train and evaluate several samplers and seeds");
  dmis::CompareOptions copt;
  std::vector<std::string> sampler_names{"uniform", "dmis"};
  OverrideFlags compare_flags;
  cmp->add_option("benchmark", copt.benchmark)->required();
  cmp->add_option("--seeds", copt.seeds, "seed list")->delimiter(',');
  cmp->add_option("--samplers", sampler_names, "sampler list")->delimiter(',');
  cmp->add_option("--out", copt.out_dir, "comparison directory");
  cmp->add_option("--grid", copt.grid_path, "reference grid");
  compare_flags.attach(cmp, "benchmark");  // positional here

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return dmis::kExitConfig;
  }

  try {
    if (*ref) {
      const auto [nx, nt] = dmis::default_reference_grid(ref_benchmark);
      const int use_nx = ref_nx.value_or(nx), use_nt = ref_nt.value_or(nt);
      const std::string path = ref_out.empty() ? dmis::default_grid_path(ref_benchmark, use_nx, use_nt) : ref_out;
      dmis::cmd_reference(ref_benchmark, use_nx, use_nt, path, std::cout);
    } else if (*tr) {
      Settings settings = config_file.empty() ? Settings{} : dmis::read_settings_file(config_file);
      const Settings extra = train_flags.collect();
      settings.insert(settings.end(), extra.begin(), extra.end());
      const std::string dir = dmis::cmd_train(dmis::resolve_config(settings), std::cout);
      std::cout << "run directory: " << dir << '\n';
    } else if (*ev) {
      std::string grid = eval_grid;
      if (grid.empty()) {
        const dmis::RunConfig cfg = dmis::resolve_config(dmis::read_settings_file(run_dir + "/config.txt"));
        grid = dmis::default_grid_path(cfg.train.benchmark, cfg.ref_nx, cfg.ref_nt);
      }
      dmis::cmd_evaluate(run_dir, grid, std::cout);
    } else if (*cmp) {
      copt.samplers.clear();
      for (const std::string& s : sampler_names) copt.samplers.push_back(dmis::parse_sampler(s));
      copt.overrides = compare_flags.collect();
      return dmis::cmd_compare(copt, std::cout).exit_code;
    }
  } catch (...) {
    const int code = dmis::exit_code_for_current_exception();
    try {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
    } catch (...) {
      std::cerr << "error: unknown failure\n";
    }
    return code;
  }
  return dmis::kExitOk;
}
