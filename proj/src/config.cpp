#include "dmis/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <tuple>

#include "dmis/error.hpp"

namespace dmis {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

template <class T>
std::string format_int(T v) {
  return std::to_string(v);
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Entry>& entries() {
  using std::string_view;
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    auto real = [&t](const char* key, double TrainConfig::*field) {
      t.push_back({key, [=](RunConfig& c, string_view v) { c.train.*field = parse_number<double>(key, v); },
                   [=](const RunConfig& c) { return format_double(c.train.*field); }});
    };
    auto size = [&t](const char* key, std::size_t TrainConfig::*field) {
      t.push_back({key, [=](RunConfig& c, string_view v) { c.train.*field = parse_number<std::size_t>(key, v); },
                   [=](const RunConfig& c) { return format_int(c.train.*field); }});
    };
    t.push_back({"benchmark", [](RunConfig& c, string_view v) { c.train.benchmark = make_problem(v).name; },
                 [](const RunConfig& c) { return c.train.benchmark; }});
    t.push_back({"sampler", [](RunConfig& c, string_view v) { c.train.sampler = parse_sampler(v); },
                 [](const RunConfig& c) { return std::string(sampler_name(c.train.sampler)); }});
    t.push_back({"depth", [](RunConfig& c, string_view v) { c.train.depth = parse_number<int>("depth", v); },
                 [](const RunConfig& c) { return format_int(c.train.depth); }});
    t.push_back({"width", [](RunConfig& c, string_view v) { c.train.width = parse_number<int>("width", v); },
                 [](const RunConfig& c) { return format_int(c.train.width); }});
    t.push_back({"learning_rate",
                 [](RunConfig& c, string_view v) { c.train.adam.learning_rate = parse_number<double>("learning_rate", v); },
                 [](const RunConfig& c) { return format_double(c.train.adam.learning_rate); }});
    t.push_back({"mesh_size",
                 [](RunConfig& c, string_view v) { c.train.dmis.mesh_size = parse_number<std::size_t>("mesh_size", v); },
                 [](const RunConfig& c) { return format_int(c.train.dmis.mesh_size); }});
    t.push_back({"gamma", [](RunConfig& c, string_view v) { c.train.dmis.gamma = parse_number<double>("gamma", v); },
                 [](const RunConfig& c) { return format_double(c.train.dmis.gamma); }});
    t.push_back({"beta", [](RunConfig& c, string_view v) { c.train.dmis.beta = parse_number<double>("beta", v); },
                 [](const RunConfig& c) { return format_double(c.train.dmis.beta); }});
    size("n_f", &TrainConfig::n_f);
    size("n_i", &TrainConfig::n_i);
    size("n_b", &TrainConfig::n_b);
    size("batch_f", &TrainConfig::batch_f);
    size("batch_i", &TrainConfig::batch_i);
    size("batch_b", &TrainConfig::batch_b);
    real("lambda_i", &TrainConfig::lambda_i);
    real("lambda_b", &TrainConfig::lambda_b);
    t.push_back({"adam_beta1", [](RunConfig& c, string_view v) { c.train.adam.beta1 = parse_number<double>("adam_beta1", v); },
                 [](const RunConfig& c) { return format_double(c.train.adam.beta1); }});
    t.push_back({"adam_beta2", [](RunConfig& c, string_view v) { c.train.adam.beta2 = parse_number<double>("adam_beta2", v); },
                 [](const RunConfig& c) { return format_double(c.train.adam.beta2); }});
    t.push_back({"adam_epsilon",
                 [](RunConfig& c, string_view v) { c.train.adam.epsilon = parse_number<double>("adam_epsilon", v); },
                 [](const RunConfig& c) { return format_double(c.train.adam.epsilon); }});
    t.push_back({"max_iters",
                 [](RunConfig& c, string_view v) { c.train.max_iters = parse_number<std::int64_t>("max_iters", v); },
                 [](const RunConfig& c) { return format_int(c.train.max_iters); }});
    t.push_back({"seed", [](RunConfig& c, string_view v) { c.train.seed = parse_number<std::uint64_t>("seed", v); },
                 [](const RunConfig& c) { return format_int(c.train.seed); }});
    t.push_back({"recompute_every",
                 [](RunConfig& c, string_view v) { c.train.recompute_every = parse_number<std::int64_t>("recompute_every", v); },
                 [](const RunConfig& c) { return format_int(c.train.recompute_every); }});
    t.push_back({"checkpoint_every",
                 [](RunConfig& c, string_view v) { c.checkpoint_every = parse_number<std::int64_t>("checkpoint_every", v); },
                 [](const RunConfig& c) { return format_int(c.checkpoint_every); }});
    t.push_back({"ref_nx", [](RunConfig& c, string_view v) { c.ref_nx = parse_number<int>("ref_nx", v); },
                 [](const RunConfig& c) { return format_int(c.ref_nx); }});
    t.push_back({"ref_nt", [](RunConfig& c, string_view v) { c.ref_nt = parse_number<int>("ref_nt", v); },
                 [](const RunConfig& c) { return format_int(c.ref_nt); }});
    t.push_back({"output", [](RunConfig& c, string_view v) { c.output = std::string(v); },
                 [](const RunConfig& c) { return c.output; }});
    return t;
  }();
  return table;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

RunConfig table_defaults(std::string_view benchmark) {
  RunConfig c;
  TrainConfig& t = c.train;
  t.benchmark = make_problem(benchmark).name;
  t.dmis.mesh_size = 1000;
  t.dmis.gamma = 0.4;
  t.n_i = 2000;
  t.n_b = 2000;
  if (benchmark == "schrodinger") {
    t.depth = 4, t.width = 64, t.adam.learning_rate = 0.001, t.dmis.beta = 2.0;
    t.n_f = 60000, t.n_i = 200, t.n_b = 200;
  } else if (benchmark == "burgers") {
    t.depth = 3, t.width = 32, t.adam.learning_rate = 0.005, t.dmis.beta = 1.5, t.n_f = 100000;
  } else if (benchmark == "kdv") {
    t.depth = 4, t.width = 64, t.adam.learning_rate = 0.001, t.dmis.beta = 2.0, t.n_f = 60000;
  } else if (benchmark == "diffusion") {
    t.depth = 4, t.width = 32, t.adam.learning_rate = 0.002, t.dmis.beta = 2.0, t.n_f = 100000;
  } else {  // allen-cahn
    t.depth = 5, t.width = 64, t.adam.learning_rate = 0.001, t.dmis.beta = 1.5, t.n_f = 60000;
  }
  // The batch sizes are not published; keep them inside the smallest sets.
  t.batch_i = std::min(t.batch_i, t.n_i);
  t.batch_b = std::min(t.batch_b, t.n_b);
  std::tie(c.ref_nx, c.ref_nt) = default_reference_grid(benchmark);
  return c;
}

std::pair<int, int> default_reference_grid(std::string_view benchmark) {
  if (benchmark == "burgers") return {1024, 200};
  if (benchmark == "allen-cahn") return {1024, 200};
  return {256, 200};
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Entry& e : entries()) k.emplace_back(e.key);
    return k;
  }();
  return keys;
}

std::string_view sampler_name(SamplerKind s) { return s == SamplerKind::kDmis ? "dmis" : "uniform"; }

SamplerKind parse_sampler(std::string_view name) {
  if (name == "dmis") return SamplerKind::kDmis;
  if (name == "uniform") return SamplerKind::kUniform;
  throw ConfigError("unknown sampler '" + std::string(name) + "' (expected dmis or uniform)");
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const Entry& e : entries()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& settings) {
  std::string benchmark = "burgers";
  for (const auto& [k, v] : settings) {
    if (k == "benchmark") benchmark = v;
  }
  RunConfig cfg = table_defaults(benchmark);
  for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
  validate(cfg.train);
  if (cfg.checkpoint_every < 1) throw ConfigError("checkpoint_every must be positive");
  if (cfg.ref_nx < 1 || cfg.ref_nt < 1) throw ConfigError("reference grid sizes must be positive");
  return cfg;
}

std::vector<std::pair<std::string, std::string>> parse_settings(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  bool first = true;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (first && s.rfind("dmis-config", 0) == 0) {
      first = false;
      if (trim(s.substr(11)) != "v1") throw ConfigError("unsupported config version: " + s);
      continue;
    }
    first = false;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open config file " + path);
  return parse_settings(in);
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  out << "dmis-config v1\n";
  for (const Entry& e : entries()) out << e.key << " = " << e.get(cfg) << '\n';
}

std::string output_root() {
  const char* env = std::getenv("DMIS_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("dmis-runs");
}

std::string default_run_dir(const RunConfig& cfg) {
  return output_root() + "/" + cfg.train.benchmark + "-" + std::string(sampler_name(cfg.train.sampler)) + "-s" +
         std::to_string(cfg.train.seed);
}

}  // namespace dmis
