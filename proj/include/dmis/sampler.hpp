#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dmis/pde.hpp"
#include "dmis/rng.hpp"
#include "dmis/triangulation.hpp"

namespace dmis {

struct DmisConfig {
  std::size_t mesh_size = 1000;  // |S|, not counting the pinned corners
  double gamma = 0.4;            // rebuild when similarity drops below this
  double beta = 2.0;             // reweighting exponent, >= 1
};

/// Ids into N_f (drawn with replacement) and their weights alpha'.
struct WeightedBatch {
  std::vector<std::size_t> ids;
  std::vector<double> alpha_prime;
};

struct RebuildEvent {
  std::int64_t iter = 0;
  double similarity = 0.0;  // NaN when a weight vector was all zero
  std::size_t mesh_points = 0;
};

// Probability helpers. All are deterministic functions of their inputs.

/// q_i = l_i / sum(l); uniform when every loss is zero or the sum underflows.
/// Negative losses are a ContractError, non-finite ones a NumericalError.
std::vector<double> compute_probs(std::span<const double> losses);

/// alpha'_i = (1 / (n_f q_i))^beta, and 0 where q_i = 0.
std::vector<double> sample_weights(std::span<const double> q, std::size_t n_f, double beta);
double sample_weight(double q, std::size_t n_f, double beta);

/// Cosine similarity; nullopt if either vector is all zero.
std::optional<double> cosine_similarity(std::span<const double> v0, std::span<const double> v);

/// Mesh-point selection probabilities g ~ |q_now - q_t0|, uniform if all equal.
std::vector<double> selection_probs(std::span<const double> q_now, std::span<const double> q_t0);

/// `count` distinct indices drawn by weight (uniformly among zero weights once
/// the positive ones run out).
std::vector<std::size_t> draw_without_replacement(std::span<const double> weights, std::size_t count,
                                                  Engine& rng);
std::vector<std::size_t> draw_with_replacement(std::span<const double> q, std::size_t count,
                                               Engine& rng);

/// New S by selection_probs, followed by the corner ids.
std::vector<std::size_t> select_mesh_points(std::span<const double> q_now, std::span<const double> q_t0,
                                            std::size_t size, std::span<const std::size_t> corner_ids,
                                            Engine& rng);

/// Uniform ids with replacement and unit weights.
WeightedBatch uniform_step(std::size_t n_f, std::size_t batch_size, Engine& rng);

/// Writes l_f for each point into `out` (same length).
using LossEvaluator = std::function<void(std::span<const Point>, std::span<double>)>;

/// Exact residual losses of `net` for `pb`, evaluated as one batch.
LossEvaluator residual_loss_evaluator(const PdeProblem& pb, const MlpParams& net);

/// Dynamic-mesh importance sampler over a fixed residual set N_f.
///
/// The mesh lives in normalized coordinates (t / T_train, (x - x_min) / L).
/// The four corners of the training rectangle are always mesh vertices, with
/// ids n_f .. n_f + 3, so every point of N_f lies inside the hull.
class DmisSampler {
 public:
  DmisSampler(const DomainSpec& domain, std::vector<Point> residual_points, const DmisConfig& config,
              std::uint64_t seed);

  struct Step {
    WeightedBatch batch;
    bool rebuilt = false;
    std::optional<double> similarity;
  };

  Step step(const LossEvaluator& losses, std::size_t batch_size);
  Step step(const PdeProblem& pb, const MlpParams& net, std::size_t batch_size) {
    return step(residual_loss_evaluator(pb, net), batch_size);
  }

  std::size_t n_f() const { return points_.size(); }
  const std::vector<double>& q() const { return q_; }
  const std::vector<double>& q_t0() const { return q_t0_; }
  /// Last interpolated loss field over N_f (clamped at 0).
  const std::vector<double>& loss_estimate() const { return loss_hat_; }
  /// Full alpha' vector over N_f from the last step.
  const std::vector<double>& alpha_prime() const { return alpha_; }
  /// Ids of the mesh vertices, in vertex order; ids >= n_f are corners.
  const std::vector<std::size_t>& mesh_ids() const { return mesh_ids_; }
  const std::vector<double>& v_t0() const { return v_t0_; }
  const Triangulation& mesh() const { return mesh_; }
  std::int64_t iteration() const { return t_; }
  std::int64_t last_rebuild() const { return t0_; }
  const std::vector<RebuildEvent>& rebuilds() const { return events_; }
  std::array<std::size_t, 4> corner_ids() const;

 private:
  struct Stencil {
    std::array<int, 3> v;
    std::array<double, 3> w;
  };

  Point2 normalize(const Point& p) const;
  Point point_of(std::size_t id) const;
  void rebuild(std::vector<std::size_t> ids);
  std::vector<double> mesh_weights(std::span<const double> vertex_losses, double loss_sum) const;

  DomainSpec domain_;
  std::vector<Point> points_;
  DmisConfig config_;
  Engine rng_;

  std::vector<double> q_, q_t0_, loss_hat_, alpha_;
  std::vector<std::size_t> mesh_ids_;
  std::vector<double> v_t0_;
  Triangulation mesh_;
  std::vector<Stencil> stencil_;  // per N_f point
  std::int64_t t_ = 0;
  std::int64_t t0_ = 0;
  std::vector<RebuildEvent> events_;
};

void write_rebuild_log(std::ostream& out, std::span<const RebuildEvent> events);

}  // namespace dmis
