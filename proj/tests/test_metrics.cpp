#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "dmis/error.hpp"
#include "dmis/metrics.hpp"

using namespace dmis;

namespace {

// One sample per iteration, as a dense trace.
std::vector<LossSample> trace(std::int64_t length, const std::function<double(std::int64_t)>& loss) {
  std::vector<LossSample> c;
  for (std::int64_t i = 0; i <= length; ++i) c.push_back({i, loss(i), 0, 0, 0, 0.5 * static_cast<double>(i)});
  return c;
}

SolutionGrid burgers_like_grid() {
  SolutionGrid g;
  g.name = "synthetic";
  g.nx = 40;
  g.nt = 20;
  g.t_max = 1.0;
  g.x_min = -1.0;
  g.x_max = 1.0;
  for (int k = 0; k <= g.nt; ++k) {
    for (int i = 0; i <= g.nx; ++i) g.values.push_back(std::sin(3.0 * g.x_at(i)) * std::exp(-g.t_at(k)));
  }
  return g;
}

}  // namespace

TEST_CASE("hand-computed error statistics") {
  const std::vector<double> pred{1.0, 2.0}, ref{1.0, 1.0};
  const ErrorStats s = error_stats(pred, ref);
  CHECK(s.me == 1.0);
  CHECK(s.mae == 0.5);
  CHECK(s.rmse == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(s.count == 2);
}

TEST_CASE("a field equal to the reference has zero error") {
  const SolutionGrid g = burgers_like_grid();
  const DomainSpec d{-1.0, 1.0, 1.0};
  const FieldFn exact = [&](std::span<const Point> pts, std::span<double> out) {
    for (std::size_t j = 0; j < pts.size(); ++j) out[j] = sample(g, pts[j].t, pts[j].x);
  };
  const ErrorReport r = error_report(exact, d, g);
  for (const ErrorStats& s : r.segments) {
    CHECK(s.me == 0.0);
    CHECK(s.mae == 0.0);
    CHECK(s.rmse == 0.0);
    CHECK(s.count == static_cast<std::size_t>(kEvalNx * kEvalNt));
  }
}

TEST_CASE("segments cover their own time ranges") {
  const SolutionGrid g = burgers_like_grid();
  const DomainSpec d{-1.0, 1.0, 1.0};
  double t_lo = 2.0, t_hi = -1.0;
  const FieldFn spy = [&](std::span<const Point> pts, std::span<double> out) {
    t_lo = 2.0;
    t_hi = -1.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      t_lo = std::min(t_lo, pts[j].t);
      t_hi = std::max(t_hi, pts[j].t);
      out[j] = 0.0;
    }
  };
  error_report(spy, d, g, 8, 5);  // the last segment evaluated is the test one
  CHECK(t_lo == 0.75);
  CHECK(t_hi == 1.0);
}

TEST_CASE("norm inequalities hold for a constant offset and for noise") {
  const SolutionGrid g = burgers_like_grid();
  const DomainSpec d{-1.0, 1.0, 1.0};
  const FieldFn offset = [&](std::span<const Point> pts, std::span<double> out) {
    for (std::size_t j = 0; j < pts.size(); ++j) out[j] = sample(g, pts[j].t, pts[j].x) + 0.25;
  };
  for (const ErrorStats& s : error_report(offset, d, g, 16, 9).segments) {
    CHECK(s.me == doctest::Approx(0.25));
    CHECK(s.mae == doctest::Approx(0.25));
    CHECK(s.rmse == doctest::Approx(0.25));
  }
  const FieldFn wavy = [](std::span<const Point> pts, std::span<double> out) {
    for (std::size_t j = 0; j < pts.size(); ++j) out[j] = std::cos(7.0 * pts[j].x + pts[j].t);
  };
  for (const ErrorStats& s : error_report(wavy, d, g, 16, 9).segments) {
    CHECK(s.mae <= s.me);
    CHECK(s.rmse <= s.me);
    CHECK(s.mae <= s.rmse);
  }
}

TEST_CASE("network report uses the modulus for two-component outputs") {
  const PdeProblem pb = make_problem("schrodinger");
  const MlpParams net = init_mlp(2, 5, 2, 3);
  SolutionGrid g;
  g.name = "zero";
  g.nx = 4;
  g.nt = 4;
  g.t_max = pb.domain.t_max;
  g.x_min = pb.domain.x_min;
  g.x_max = pb.domain.x_max;
  g.values.assign(25, 0.0);
  const ErrorReport r = error_report(net, pb, g, 6, 3);
  const Point p{pb.domain.t_max, pb.domain.x_max};
  const auto u = forward(net, p.t, p.x);
  CHECK(r[Segment::kTest].me >= std::hypot(u[0], u[1]) - 1e-15);
  CHECK(r[Segment::kTest].mae > 0.0);
}

TEST_CASE("NC example: loss settles at iteration 100") {
  const auto c = trace(2000, [](std::int64_t i) { return i < 100 ? 1.0 : 1e-6; });
  const std::vector<int> levels{5};
  const ConvergenceReport r = convergence_report(c, levels);
  REQUIRE(r.level(5).nc.has_value());
  CHECK(*r.level(5).nc == 100);
  CHECK(*r.level(5).tc_ms == 50.0);
}

TEST_CASE("NC example: never below the level") {
  const auto c = trace(2000, [](std::int64_t) { return 0.05; });
  const std::vector<int> levels{2};
  const ConvergenceReport r = convergence_report(c, levels);
  CHECK_FALSE(r.level(2).nc.has_value());
  CHECK_FALSE(r.level(2).tc_ms.has_value());
}

TEST_CASE("NC example: a dip that does not last") {
  const auto c = trace(2000, [](std::int64_t i) { return (i >= 50 && i < 300) || i >= 400 ? 1e-4 : 1.0; });
  const std::vector<int> levels{3};
  CHECK(*convergence_report(c, levels).level(3).nc == 400);
}

TEST_CASE("the window must fit inside the run") {
  const auto c = trace(1500, [](std::int64_t i) { return i < 600 ? 1.0 : 1e-6; });
  const std::vector<int> levels{5};
  CHECK_FALSE(convergence_report(c, levels).level(5).nc.has_value());
}

TEST_CASE("sparse curves are read as piecewise constant, and NC is monotone in k") {
  std::vector<LossSample> c;
  for (std::int64_t i = 0; i <= 4000; i += 100) {
    const double loss = i < 500 ? 1.0 : i < 1200 ? 5e-3 : 5e-4;
    c.push_back({i, loss, 0, 0, 0, static_cast<double>(i)});
  }
  const std::vector<int> levels{2, 3, 4};
  const ConvergenceReport r = convergence_report(c, levels);
  CHECK(*r.level(2).nc == 500);
  CHECK(*r.level(3).nc == 1200);
  CHECK_FALSE(r.level(4).nc.has_value());
  CHECK(*r.level(2).nc <= *r.level(3).nc);
}

TEST_CASE("median") {
  CHECK(median({0.1, 0.3, 0.2}) == 0.2);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median({1.0, inf, inf}) == inf);
  CHECK(median({1.0, 2.0, inf}) == 2.0);
  CHECK_THROWS_AS(median({}), ContractError);
}

TEST_CASE("report files") {
  ErrorReport r;
  r.segments[2] = {1.0, 0.5, 0.75, 4};
  std::ostringstream e;
  write_errors_csv(e, r);
  CHECK(e.str() == "segment,me,mae,rmse,count\ntrain,0,0,0,0\nval,0,0,0,0\ntest,1,0.5,0.75,4\n");

  ConvergenceReport c;
  c.levels.push_back({2, 1200, 3.5});
  c.levels.push_back({3, std::nullopt, std::nullopt});
  std::ostringstream v;
  write_convergence_csv(v, c);
  CHECK(v.str() == "NC_2,NC_3,TC_2,TC_3\n1200,NA,3.5,NA\n");

  std::ostringstream s;
  write_error_summary(s, r);
  CHECK(s.str().find("RMSE") != std::string::npos);
  CHECK(s.str().find("test") != std::string::npos);
}
