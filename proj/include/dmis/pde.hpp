#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "dmis/error.hpp"
#include "dmis/jet.hpp"
#include "dmis/mlp.hpp"
#include "dmis/types.hpp"

namespace dmis {

enum class Benchmark { kSchrodinger, kBurgers, kKdv, kDiffusion, kAllenCahn };
enum class BoundaryKind { kDirichlet, kPeriodic };
enum class Segment { kTrain, kValidation, kTest };

/// Spatial interval and time horizon. Time is split into train [0, T/2],
/// validation [T/2, 3T/4] and test [3T/4, T].
struct DomainSpec {
  double x_min = 0.0;
  double x_max = 1.0;
  double t_max = 1.0;

  double length() const { return x_max - x_min; }
  double train_end() const { return 0.5 * t_max; }
  double validation_end() const { return 0.75 * t_max; }
  double segment_begin(Segment s) const;
  double segment_end(Segment s) const;
};

std::string_view segment_name(Segment s);

enum class InitialShape { kTwoSech, kNegSinPi, kCosPi, kSinPlusCubic, kSinPi, kXSquaredCosPi };

/// One benchmark problem u_t + N_x[u] = 0 with its initial and boundary data.
/// The residual coefficients are stored explicitly so that test variants
/// (e.g. the unforced heat equation) can be built from the same machinery.
struct PdeProblem {
  std::string name;
  Benchmark kind = Benchmark::kBurgers;
  DomainSpec domain;
  int out_dim = 1;
  BoundaryKind bc = BoundaryKind::kDirichlet;
  int required_order = 2;
  InitialShape initial = InitialShape::kNegSinPi;

  double diffusion = 0.0;   // coefficient of u_xx
  double dispersion = 0.0;  // coefficient of u_xxx (KdV)
  double forcing = 0.0;     // amplitude of the e^{-t} x source (diffusion)
  double reaction = 0.0;    // amplitude of the sin(pi u) source (Allen-Cahn)

  /// u0(x); the second entry is the imaginary part for Schrodinger, else 0.
  std::array<double, 2> initial_value(double x) const;
  /// g(t, x) on the Dirichlet boundary.
  double boundary_value(double /*t*/, double /*x*/) const { return 0.0; }
};

/// Known names: schrodinger, burgers, kdv, diffusion, allen-cahn.
PdeProblem make_problem(std::string_view name);
const std::vector<std::string>& benchmark_names();

/// u_t = u_xx on [0, 1] with u0 = sin(pi x), Dirichlet 0: the diffusion
/// benchmark with unit coefficient and the source removed.
PdeProblem make_heat_test_problem();

/// PDE residual components at `p` (one for real problems, two for Schrodinger).
template <class S>
std::array<S, 2> residual(const PdeProblem& pb, const Jet<S>& j, const Point& p) {
  if (j.x_order < pb.required_order || j.out_dim != pb.out_dim) {
    throw ContractError("jet does not carry the derivatives required by " + pb.name);
  }
  using std::sin;
  std::array<S, 2> r{};
  switch (pb.kind) {
    case Benchmark::kSchrodinger: {
      const S& u = j.u[0];
      const S& v = j.u[1];
      const S mod2 = u * u + v * v;
      r[0] = -j.u_t[1] + pb.diffusion * j.u_xx[0] + mod2 * u;
      r[1] = j.u_t[0] + pb.diffusion * j.u_xx[1] + mod2 * v;
      break;
    }
    case Benchmark::kBurgers:
      r[0] = j.u_t[0] + j.u[0] * j.u_x[0] - pb.diffusion * j.u_xx[0];
      break;
    case Benchmark::kKdv:
      r[0] = j.u_t[0] + j.u[0] * j.u_x[0] + pb.dispersion * j.u_xxx[0];
      break;
    case Benchmark::kDiffusion:
      r[0] = j.u_t[0] - pb.diffusion * j.u_xx[0] - pb.forcing * std::exp(-p.t) * p.x;
      break;
    case Benchmark::kAllenCahn:
      r[0] = j.u_t[0] - pb.diffusion * j.u_xx[0] - pb.reaction * sin(std::numbers::pi * j.u[0]);
      break;
  }
  return r;
}

/// Squared residual l_f at one collocation point.
template <class S>
S residual_loss(const PdeProblem& pb, const Jet<S>& j, const Point& p) {
  const auto r = residual(pb, j, p);
  S loss = r[0] * r[0];
  if (pb.out_dim == 2) loss = loss + r[1] * r[1];
  return loss;
}

/// Squared initial-condition mismatch of a jet evaluated at (0, x).
template <class S>
S initial_loss(const PdeProblem& pb, const Jet<S>& j, double x) {
  const auto target = pb.initial_value(x);
  S loss = (j.u[0] - target[0]) * (j.u[0] - target[0]);
  if (pb.out_dim == 2) loss = loss + (j.u[1] - target[1]) * (j.u[1] - target[1]);
  return loss;
}

/// Squared Dirichlet mismatch of a jet evaluated at boundary point `p`.
template <class S>
S dirichlet_loss(const PdeProblem& pb, const Jet<S>& j, const Point& p) {
  const double g = pb.boundary_value(p.t, p.x);
  S loss = (j.u[0] - g) * (j.u[0] - g);
  if (pb.out_dim == 2) loss = loss + (j.u[1] - g) * (j.u[1] - g);
  return loss;
}

/// Value plus first-derivative matching between (t, x_min) and (t, x_max).
template <class S>
S periodic_loss(const PdeProblem& pb, const Jet<S>& left, const Jet<S>& right) {
  if (left.x_order < 1 || right.x_order < 1) {
    throw ContractError("periodic boundary loss needs first x-derivatives");
  }
  S loss = 0.0;
  for (int c = 0; c < pb.out_dim; ++c) {
    const S du = left.u[c] - right.u[c];
    const S dux = left.u_x[c] - right.u_x[c];
    loss = loss + du * du + dux * dux;
  }
  return loss;
}

enum class Role { kResidual, kInitial, kBoundary };
std::string_view role_name(Role r);

/// Collocation points of one role; a point's id is its index.
struct CollocationSet {
  Role role = Role::kResidual;
  std::vector<Point> points;
  std::size_t size() const { return points.size(); }
};

struct CollocationData {
  CollocationSet residual;
  CollocationSet initial;
  CollocationSet boundary;
};

/// N_f uniform on [0, T/2] x [x_min, x_max]; N_i on {0} x [x_min, x_max];
/// N_b on [0, T/2] x {x_min, x_max}. Deterministic in `seed`.
CollocationData generate_collocation(const PdeProblem& pb, std::size_t n_f, std::size_t n_i,
                                     std::size_t n_b, std::uint64_t seed);

/// Writes "id,role,t,x" rows for all three sets.
void write_collocation_csv(std::ostream& out, const CollocationData& data);

/// Network-level point losses (untaped). For periodic problems the boundary
/// point's t selects the pair (t, x_min), (t, x_max).
double ic_bc_loss(const PdeProblem& pb, const MlpParams& net, Role role, const Point& p);
double residual_loss_at(const PdeProblem& pb, const MlpParams& net, const Point& p);

}  // namespace dmis
