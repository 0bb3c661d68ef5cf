#include "dmis/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "dmis/error.hpp"

namespace fs = std::filesystem;

namespace dmis {
namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ArtifactError("cannot write " + p.string());
  return f;
}

std::string run_dir_of(const RunConfig& cfg) { return cfg.output.empty() ? default_run_dir(cfg) : cfg.output; }

TrainResult run_training(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  {
    std::ofstream echo = open_out(dir / "config.txt");
    write_config(echo, cfg);
  }
  std::ofstream train_log = open_out(dir / "log.csv");
  std::ofstream rebuilds = open_out(dir / "rebuilds.csv");
  rebuilds << "event,iter,sim,mesh_points\n";
  TrainSinks sinks;
  sinks.log = &train_log;
  sinks.rebuilds = &rebuilds;
  sinks.checkpoint_path = (dir / "checkpoint.dmis").string();
  sinks.checkpoint_every = cfg.checkpoint_every;

  log << "training " << cfg.train.benchmark << " (" << sampler_name(cfg.train.sampler) << ", seed "
      << cfg.train.seed << ", " << cfg.train.max_iters << " iterations) into " << dir.string() << '\n';
  const TrainResult r = train(cfg.train, sinks);
  std::ofstream curve = open_out(dir / "curve.csv");
  write_curve_csv(curve, r.curve);
  if (!r.curve.empty()) log << "final full-batch loss " << r.curve.back().loss << '\n';
  log << r.rebuilds.size() << " mesh rebuilds\n";
  return r;
}

std::string current_exception_message() {
  try {
    throw;
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

std::string format_optional(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

}  // namespace

std::string default_grid_path(const std::string& benchmark, int nx, int nt) {
  return output_root() + "/reference/" + benchmark + "-nx" + std::to_string(nx) + "-nt" + std::to_string(nt) +
         ".grid";
}

bool cmd_reference(const std::string& benchmark, int nx, int nt, const std::string& path, std::ostream& log) {
  const PdeProblem pb = make_problem(benchmark);
  SolutionGrid shell;
  shell.name = pb.name;
  shell.nx = nx;
  shell.nt = nt;
  shell.t_max = pb.domain.t_max;
  shell.x_min = pb.domain.x_min;
  shell.x_max = pb.domain.x_max;
  const std::string header = grid_header(shell);
  if (std::ifstream in{path, std::ios::binary}) {
    std::string existing;
    if (std::getline(in, existing) && existing == header) {
      log << "cached: " << path << '\n';
      return false;
    }
  }
  const SolutionGrid g = solve(pb, nx, nt);
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_grid(path, g);
  log << "wrote " << path << '\n';
  return true;
}

SolutionGrid ensure_reference(const std::string& benchmark, int nx, int nt, const std::string& path,
                              std::ostream& log) {
  cmd_reference(benchmark, nx, nt, path, log);
  return load_grid(path);
}

std::string cmd_train(const RunConfig& cfg, std::ostream& log) {
  const std::string dir = run_dir_of(cfg);
  run_training(cfg, dir, log);
  return dir;
}

Evaluation cmd_evaluate(const std::string& run_dir, const std::string& grid_path, std::ostream& log) {
  const fs::path dir(run_dir);
  const fs::path cfg_path = dir / "config.txt";
  if (!fs::exists(cfg_path)) throw ArtifactError("missing run config " + cfg_path.string());
  const RunConfig cfg = resolve_config(read_settings_file(cfg_path.string()));
  const PdeProblem pb = make_problem(cfg.train.benchmark);
  const MlpParams net = load_checkpoint((dir / "checkpoint.dmis").string());
  std::ifstream curve_in(dir / "curve.csv");
  if (!curve_in) throw ArtifactError("missing curve " + (dir / "curve.csv").string());
  const std::vector<LossSample> curve = read_curve_csv(curve_in);
  const SolutionGrid grid = load_grid(grid_path);
  if (grid.name != pb.name || grid.t_max != pb.domain.t_max || grid.x_min != pb.domain.x_min ||
      grid.x_max != pb.domain.x_max) {
    throw ConfigError("grid " + grid_path + " does not describe the " + pb.name + " domain");
  }

  Evaluation ev;
  ev.errors = error_report(net, pb, grid);
  ev.convergence = convergence_report(curve, kReportLevels);
  {
    std::ofstream e = open_out(dir / "errors.csv");
    write_errors_csv(e, ev.errors);
    std::ofstream c = open_out(dir / "convergence.csv");
    write_convergence_csv(c, ev.convergence);
    std::ofstream s = open_out(dir / "summary.txt");
    write_error_summary(s, ev.errors);
  }
  write_error_summary(log, ev.errors);
  return ev;
}

CompareResult cmd_compare(const CompareOptions& opt, std::ostream& log) {
  if (opt.seeds.empty()) throw ConfigError("compare needs at least one seed");
  if (opt.samplers.empty()) throw ConfigError("compare needs at least one sampler");
  const fs::path out = opt.out_dir.empty() ? fs::path(output_root()) / ("compare-" + opt.benchmark) : fs::path(opt.out_dir);
  fs::create_directories(out / "curves");

  // Resolve one config up front so configuration mistakes fail before any run.
  auto settings_for = [&](SamplerKind s, std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> kv{{"benchmark", opt.benchmark}};
    kv.insert(kv.end(), opt.overrides.begin(), opt.overrides.end());
    kv.emplace_back("sampler", std::string(sampler_name(s)));
    kv.emplace_back("seed", std::to_string(seed));
    return resolve_config(kv);
  };
  const RunConfig probe = settings_for(opt.samplers.front(), opt.seeds.front());
  const std::string grid_path =
      opt.grid_path.empty() ? default_grid_path(probe.train.benchmark, probe.ref_nx, probe.ref_nt) : opt.grid_path;
  cmd_reference(probe.train.benchmark, probe.ref_nx, probe.ref_nt, grid_path, log);

  CompareResult result;
  for (SamplerKind s : opt.samplers) {
    for (std::uint64_t seed : opt.seeds) {
      RunOutcome run;
      run.sampler = s;
      run.seed = seed;
      const std::string name = std::string(sampler_name(s)) + "-s" + std::to_string(seed);
      try {
        RunConfig cfg = settings_for(s, seed);
        cfg.output = (out / name).string();
        const TrainResult tr = run_training(cfg, cfg.output, log);
        run.curve = tr.curve;
        run.rebuilds = tr.rebuilds.size();
        run.iterations = static_cast<std::int64_t>(tr.records.size());
        run.eval = cmd_evaluate(cfg.output, grid_path, log);
        run.ok = true;
        std::ofstream c = open_out(out / "curves" / (name + ".csv"));
        c.precision(10);
        c << "iter,L\n";
        for (const LossSample& p : tr.curve) c << p.iter << ',' << p.loss << '\n';
      } catch (...) {
        result.exit_code = std::max(result.exit_code, exit_code_for_current_exception());
        run.error = current_exception_message();
        log << "run " << name << " failed: " << run.error << '\n';
      }
      result.runs.push_back(std::move(run));
    }
  }

  std::ofstream table = open_out(out / "comparison.csv");
  table << "sampler,runs,failed,ME,MAE,RMSE,NC_2,NC_3,TC_2,TC_3,status\n";
  const double inf = std::numeric_limits<double>::infinity();
  for (SamplerKind s : opt.samplers) {
    std::vector<double> me, mae, rmse, nc2, nc3, tc2, tc3;
    std::size_t failed = 0;
    for (const RunOutcome& r : result.runs) {
      if (r.sampler != s) continue;
      if (!r.ok) {
        ++failed;
        continue;
      }
      const ErrorStats& t = r.eval.errors[Segment::kTest];
      me.push_back(t.me);
      mae.push_back(t.mae);
      rmse.push_back(t.rmse);
      const ConvergenceLevel& l2 = r.eval.convergence.level(2);
      const ConvergenceLevel& l3 = r.eval.convergence.level(3);
      nc2.push_back(l2.nc ? static_cast<double>(*l2.nc) : inf);
      nc3.push_back(l3.nc ? static_cast<double>(*l3.nc) : inf);
      tc2.push_back(l2.tc_ms.value_or(inf));
      tc3.push_back(l3.tc_ms.value_or(inf));
    }
    auto med = [](const std::vector<double>& v) { return v.empty() ? std::string("NA") : format_optional(median(v)); };
    table << sampler_name(s) << ',' << opt.seeds.size() << ',' << failed << ',' << med(me) << ',' << med(mae) << ','
          << med(rmse) << ',' << med(nc2) << ',' << med(nc3) << ',' << med(tc2) << ',' << med(tc3) << ','
          << (failed ? "partial" : "complete") << '\n';
  }
  log << "wrote " << (out / "comparison.csv").string() << '\n';
  return result;
}

}  // namespace dmis
