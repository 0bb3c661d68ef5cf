#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dmis {

/// Parameters of a fully-connected tanh network mapping (t, x) to `out_dim`
/// outputs. All layers are stored in one flat vector so optimizers and
/// gradients can treat them uniformly; per-layer views are Eigen maps.
///
/// Layout: for each layer, the weight matrix (rows = fan-out, column-major)
/// followed by its bias vector.
class MlpParams {
 public:
  static constexpr int kInputDim = 2;

  MlpParams() = default;
  /// Zero-filled parameters. depth = 0 gives a plain affine map, which the
  /// initializer never produces but tests use as a hand-checkable network.
  MlpParams(int depth, int width, int out_dim, std::uint64_t seed);

  int depth() const { return depth_; }
  int width() const { return width_; }
  int out_dim() const { return out_dim_; }
  std::uint64_t seed() const { return seed_; }
  int num_layers() const { return depth_ + 1; }

  int fan_in(int layer) const;
  int fan_out(int layer) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  /// Offset of layer's weight block inside the flat vector; the bias follows.
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const;

  std::size_t size() const { return theta_.size(); }
  std::span<const double> flat() const { return theta_; }
  std::span<double> flat() { return theta_; }

  bool all_finite() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;

 private:
  int depth_ = 0;
  int width_ = 0;
  int out_dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::size_t> offsets_;
  // Aligned so that vectorized products see the same pointer alignment, and
  // hence the same summation order, from run to run.
  std::vector<double, Eigen::aligned_allocator<double>> theta_;
};

/// Closed-form parameter count for a (2 -> width^depth -> out_dim) network.
std::size_t parameter_count(int depth, int width, int out_dim);

/// Glorot-uniform weights, zero biases, reproducible from `seed`.
MlpParams init_mlp(int depth, int width, int out_dim, std::uint64_t seed);

/// Network output at one point. Identical, bit for bit, to the value part of
/// eval_jet at the same point.
std::vector<double> forward(const MlpParams& params, double t, double x);

// Checkpoint: header line "dmis-mlp v1 depth width out_dim seed" followed by
// the flat parameter vector as little-endian float64.
void write_checkpoint(std::ostream& out, const MlpParams& params);
MlpParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const MlpParams& params);
MlpParams load_checkpoint(const std::string& path);

}  // namespace dmis
