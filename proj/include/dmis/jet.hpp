#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dmis/mlp.hpp"
#include "dmis/types.hpp"

namespace dmis {

inline constexpr int kMaxOutputs = 2;
inline constexpr int kMaxXOrder = 3;

/// Network output at one point together with its input derivatives.
/// Only the first `out_dim` entries of each array are meaningful, and only
/// the x-derivatives up to `x_order` were computed.
template <class S>
struct Jet {
  int out_dim = 1;
  int x_order = 0;
  std::array<S, kMaxOutputs> u{};
  std::array<S, kMaxOutputs> u_t{};
  std::array<S, kMaxOutputs> u_x{};
  std::array<S, kMaxOutputs> u_xx{};
  std::array<S, kMaxOutputs> u_xxx{};
};

// Jet components travel through the network as separate column blocks:
// 0 = value, 1 = d/dt, 2 = d/dx, 3 = d2/dx2, 4 = d3/dx3.
inline constexpr int kValueOnly = 1;
inline constexpr int components_for_order(int x_order) { return 2 + x_order; }

/// Forward intermediates kept for the parameter backward pass.
struct JetCache {
  int components = 0;
  Eigen::Index batch = 0;
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   // hidden pre-activation jets
  std::vector<Eigen::MatrixXd> post;  // hidden activation jets
};

/// Propagates `components` jet blocks for every point through the network.
/// `out` becomes out_dim x (components * points.size()), block-major.
/// Throws NumericalError on non-finite inputs or parameters.
void propagate_jets(const MlpParams& params, std::span<const Point> points, int components,
                    JetCache* cache, Eigen::MatrixXd& out);

/// Accumulates d(loss)/d(theta) into `grad`, given the adjoint of `out` from
/// propagate_jets (same shape) and the cache it filled.
void backpropagate_jets(const MlpParams& params, const JetCache& cache,
                        const Eigen::MatrixXd& out_adjoint, std::span<double> grad);

Jet<double> eval_jet(const MlpParams& params, double t, double x, int max_x_order);
std::vector<Jet<double>> eval_jets(const MlpParams& params, std::span<const Point> points,
                                   int max_x_order);

/// Network values for a batch of points: out_dim x points.size().
Eigen::MatrixXd forward_batch(const MlpParams& params, std::span<const Point> points);

}  // namespace dmis
