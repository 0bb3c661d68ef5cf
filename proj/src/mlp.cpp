#include "dmis/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dmis/binary_io.hpp"
#include "dmis/error.hpp"
#include "dmis/jet.hpp"
#include "dmis/rng.hpp"

namespace dmis {

std::size_t parameter_count(int depth, int width, int out_dim) {
  if (depth == 0) return (MlpParams::kInputDim + 1) * static_cast<std::size_t>(out_dim);
  const auto w = static_cast<std::size_t>(width);
  return (MlpParams::kInputDim + 1) * w +
         static_cast<std::size_t>(depth - 1) * (w + 1) * w +
         (w + 1) * static_cast<std::size_t>(out_dim);
}

MlpParams::MlpParams(int depth, int width, int out_dim, std::uint64_t seed)
    : depth_(depth), width_(width), out_dim_(out_dim), seed_(seed) {
  if (depth < 0 || width < 1 || (out_dim != 1 && out_dim != 2)) {
    throw ConfigError("invalid network dimensions: depth=" + std::to_string(depth) +
                      " width=" + std::to_string(width) +
                      " out_dim=" + std::to_string(out_dim));
  }
  std::size_t offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(fan_out(l)) * (fan_in(l) + 1);
  }
  theta_.assign(offset, 0.0);
}

int MlpParams::fan_in(int layer) const { return layer == 0 ? kInputDim : width_; }
int MlpParams::fan_out(int layer) const { return layer == depth_ ? out_dim_ : width_; }

std::size_t MlpParams::bias_offset(int layer) const {
  return offsets_[layer] + static_cast<std::size_t>(fan_out(layer)) * fan_in(layer);
}

Eigen::Map<const Eigen::MatrixXd> MlpParams::weight(int layer) const {
  return {theta_.data() + offsets_[layer], fan_out(layer), fan_in(layer)};
}
Eigen::Map<const Eigen::VectorXd> MlpParams::bias(int layer) const {
  return {theta_.data() + bias_offset(layer), fan_out(layer)};
}
Eigen::Map<Eigen::MatrixXd> MlpParams::weight(int layer) {
  return {theta_.data() + offsets_[layer], fan_out(layer), fan_in(layer)};
}
Eigen::Map<Eigen::VectorXd> MlpParams::bias(int layer) {
  return {theta_.data() + bias_offset(layer), fan_out(layer)};
}

bool MlpParams::all_finite() const {
  for (double v : theta_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

MlpParams init_mlp(int depth, int width, int out_dim, std::uint64_t seed) {
  if (depth < 1) throw ConfigError("network depth must be at least 1");
  MlpParams params(depth, width, out_dim, seed);
  Engine rng = make_engine(seed, 0x6d6c70);
  for (int l = 0; l < params.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (params.fan_in(l) + params.fan_out(l)));
    auto w = params.weight(l);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(rng, -limit, limit);
    }
  }
  return params;
}

std::vector<double> forward(const MlpParams& params, double t, double x) {
  const Point p{t, x};
  Eigen::MatrixXd out;
  propagate_jets(params, std::span<const Point>(&p, 1), kValueOnly, nullptr, out);
  std::vector<double> u(static_cast<std::size_t>(params.out_dim()));
  for (int c = 0; c < params.out_dim(); ++c) u[c] = out(c, 0);
  return u;
}

void write_checkpoint(std::ostream& out, const MlpParams& params) {
  out << "dmis-mlp v1 " << params.depth() << ' ' << params.width() << ' ' << params.out_dim()
      << ' ' << params.seed() << '\n';
  write_f64_le(out, params.flat());
}

MlpParams read_checkpoint(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ArtifactError("empty checkpoint");
  std::istringstream fields(header);
  std::string magic, version;
  int depth = 0, width = 0, out_dim = 0;
  std::uint64_t seed = 0;
  fields >> magic >> version >> depth >> width >> out_dim >> seed;
  if (!fields || magic != "dmis-mlp") throw ArtifactError("not a dmis-mlp checkpoint");
  if (version != "v1") throw ArtifactError("unsupported checkpoint version: " + version);
  MlpParams params(depth, width, out_dim, seed);
  read_f64_le(in, params.flat());
  return params;
}

void save_checkpoint(const std::string& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write checkpoint: " + path);
  write_checkpoint(out, params);
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace dmis
