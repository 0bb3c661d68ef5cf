#include "dmis/pde.hpp"

#include <ostream>

#include "dmis/rng.hpp"

namespace dmis {

using std::numbers::pi;

double DomainSpec::segment_begin(Segment s) const {
  switch (s) {
    case Segment::kTrain: return 0.0;
    case Segment::kValidation: return train_end();
    case Segment::kTest: return validation_end();
  }
  return 0.0;
}

double DomainSpec::segment_end(Segment s) const {
  switch (s) {
    case Segment::kTrain: return train_end();
    case Segment::kValidation: return validation_end();
    case Segment::kTest: return t_max;
  }
  return t_max;
}

std::string_view segment_name(Segment s) {
  switch (s) {
    case Segment::kTrain: return "train";
    case Segment::kValidation: return "val";
    case Segment::kTest: return "test";
  }
  return "?";
}

std::array<double, 2> PdeProblem::initial_value(double x) const {
  switch (initial) {
    case InitialShape::kTwoSech: return {2.0 / std::cosh(x), 0.0};
    case InitialShape::kNegSinPi: return {-std::sin(pi * x), 0.0};
    case InitialShape::kCosPi: return {std::cos(pi * x), 0.0};
    case InitialShape::kSinPlusCubic: return {2.0 * std::sin(pi * x) + 2.0 * x - 2.0 * x * x * x, 0.0};
    case InitialShape::kSinPi: return {std::sin(pi * x), 0.0};
    case InitialShape::kXSquaredCosPi: return {x * x * std::cos(pi * x), 0.0};
  }
  return {0.0, 0.0};
}

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names{"schrodinger", "burgers", "kdv", "diffusion",
                                              "allen-cahn"};
  return names;
}

PdeProblem make_problem(std::string_view name) {
  PdeProblem pb;
  pb.name = std::string(name);
  if (name == "schrodinger") {
    pb.kind = Benchmark::kSchrodinger;
    pb.domain = {-5.0, 5.0, pi / 2.0};
    pb.out_dim = 2;
    pb.bc = BoundaryKind::kPeriodic;
    pb.initial = InitialShape::kTwoSech;
    pb.diffusion = 0.5;
  } else if (name == "burgers") {
    pb.kind = Benchmark::kBurgers;
    pb.domain = {-1.0, 1.0, 1.0};
    pb.bc = BoundaryKind::kDirichlet;
    pb.initial = InitialShape::kNegSinPi;
    pb.diffusion = 0.04 / pi;
  } else if (name == "kdv") {
    pb.kind = Benchmark::kKdv;
    pb.domain = {-1.0, 1.0, 1.0};
    pb.bc = BoundaryKind::kPeriodic;
    pb.required_order = 3;
    pb.initial = InitialShape::kCosPi;
    pb.dispersion = 0.0025;
  } else if (name == "diffusion") {
    pb.kind = Benchmark::kDiffusion;
    pb.domain = {0.0, 1.0, 1.0};
    pb.bc = BoundaryKind::kDirichlet;
    pb.initial = InitialShape::kSinPlusCubic;
    pb.diffusion = 1.2;
    pb.forcing = 5.0;
  } else if (name == "allen-cahn") {
    pb.kind = Benchmark::kAllenCahn;
    pb.domain = {-1.0, 1.0, 1.0};
    pb.bc = BoundaryKind::kPeriodic;
    pb.initial = InitialShape::kXSquaredCosPi;
    pb.diffusion = 0.001 / pi;
    pb.reaction = 2.0;
  } else {
    throw ConfigError("unknown benchmark: " + std::string(name));
  }
  return pb;
}

PdeProblem make_heat_test_problem() {
  PdeProblem pb = make_problem("diffusion");
  pb.name = "heat";
  pb.diffusion = 1.0;
  pb.forcing = 0.0;
  pb.initial = InitialShape::kSinPi;
  return pb;
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::kResidual: return "residual";
    case Role::kInitial: return "initial";
    case Role::kBoundary: return "boundary";
  }
  return "?";
}

CollocationData generate_collocation(const PdeProblem& pb, std::size_t n_f, std::size_t n_i,
                                     std::size_t n_b, std::uint64_t seed) {
  if (n_f == 0 || n_i == 0 || n_b == 0) {
    throw ConfigError("collocation set sizes must be positive");
  }
  const DomainSpec& d = pb.domain;
  CollocationData data;
  data.residual.role = Role::kResidual;
  data.initial.role = Role::kInitial;
  data.boundary.role = Role::kBoundary;

  Engine rf = make_engine(seed, 1);
  data.residual.points.reserve(n_f);
  for (std::size_t i = 0; i < n_f; ++i) {
    const double t = uniform(rf, 0.0, d.train_end());
    const double x = uniform(rf, d.x_min, d.x_max);
    data.residual.points.push_back({t, x});
  }
  Engine ri = make_engine(seed, 2);
  data.initial.points.reserve(n_i);
  for (std::size_t i = 0; i < n_i; ++i) {
    data.initial.points.push_back({0.0, uniform(ri, d.x_min, d.x_max)});
  }
  Engine rb = make_engine(seed, 3);
  data.boundary.points.reserve(n_b);
  for (std::size_t i = 0; i < n_b; ++i) {
    const double t = uniform(rb, 0.0, d.train_end());
    const double x = (rb() >> 63) ? d.x_max : d.x_min;
    data.boundary.points.push_back({t, x});
  }
  return data;
}

void write_collocation_csv(std::ostream& out, const CollocationData& data) {
  out << "id,role,t,x\n";
  out.precision(17);
  for (const CollocationSet* set : {&data.residual, &data.initial, &data.boundary}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      out << i << ',' << role_name(set->role) << ',' << set->points[i].t << ','
          << set->points[i].x << '\n';
    }
  }
}

double ic_bc_loss(const PdeProblem& pb, const MlpParams& net, Role role, const Point& p) {
  switch (role) {
    case Role::kInitial:
      return initial_loss(pb, eval_jet(net, 0.0, p.x, 0), p.x);
    case Role::kBoundary:
      if (pb.bc == BoundaryKind::kPeriodic) {
        const Point pair[2] = {{p.t, pb.domain.x_min}, {p.t, pb.domain.x_max}};
        const auto jets = eval_jets(net, pair, 1);
        return periodic_loss(pb, jets[0], jets[1]);
      }
      return dirichlet_loss(pb, eval_jet(net, p.t, p.x, 0), p);
    case Role::kResidual:
      return residual_loss_at(pb, net, p);
  }
  return 0.0;
}

double residual_loss_at(const PdeProblem& pb, const MlpParams& net, const Point& p) {
  return residual_loss(pb, eval_jet(net, p.t, p.x, pb.required_order), p);
}

}  // namespace dmis
