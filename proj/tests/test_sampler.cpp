#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "dmis/error.hpp"
#include "dmis/sampler.hpp"

using namespace dmis;

namespace {

DomainSpec unit_domain() { return {0.0, 1.0, 2.0}; }  // training rectangle [0,1] x [0,1]

std::vector<Point> grid_points(int n) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) pts.push_back({i / double(n - 1), j / double(n - 1)});
  }
  return pts;
}

std::vector<Point> random_points(std::size_t n, std::uint64_t seed) {
  Engine rng = make_engine(seed, 3);
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.t = uniform01(rng);
    p.x = uniform01(rng);
  }
  return pts;
}

LossEvaluator field(double (*f)(const Point&)) {
  return [f](std::span<const Point> pts, std::span<double> out) {
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = f(pts[i]);
  };
}

double affine_field(const Point& p) { return p.t + p.x; }
double constant_field(const Point&) { return 0.7; }

// Chi-square statistic of observed counts against expected probabilities.
double chi_square(const std::vector<std::size_t>& counts, std::span<const double> q, std::size_t draws) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = q[i] * static_cast<double>(draws);
    stat += (counts[i] - e) * (counts[i] - e) / e;
  }
  return stat;
}

}  // namespace

TEST_CASE("compute_probs hand values") {
  const std::vector<double> even{2, 2, 2, 2};
  for (double q : compute_probs(even)) CHECK(q == 0.25);
  const std::vector<double> lopsided{1, 3};
  const auto q = compute_probs(lopsided);
  CHECK(q[0] == 0.25);
  CHECK(q[1] == 0.75);
  const std::vector<double> zeros{0, 0, 0};
  for (double v : compute_probs(zeros)) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const std::vector<double> negative{1, -1};
  CHECK_THROWS_AS(compute_probs(negative), ContractError);
  const std::vector<double> tiny{1e-320, 3e-320};
  const auto qt = compute_probs(tiny);
  CHECK(qt[0] + qt[1] == doctest::Approx(1.0));
}

TEST_CASE("sample weight hand values") {
  const std::vector<double> uniform_q{0.25, 0.25, 0.25, 0.25};
  for (double beta : {1.0, 1.5, 2.0}) {
    for (double a : sample_weights(uniform_q, 4, beta)) CHECK(a == 1.0);
  }
  const std::vector<double> q{0.25, 0.75};
  const auto a1 = sample_weights(q, 2, 1.0);
  CHECK(a1[0] == 2.0);
  CHECK(a1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto a2 = sample_weights(q, 2, 2.0);
  CHECK(a2[0] == 4.0);
  CHECK(a2[1] == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  const std::vector<double> with_zero{0.0, 1.0};
  CHECK(sample_weights(with_zero, 2, 2.0)[0] == 0.0);
  CHECK_THROWS_AS(sample_weights(q, 2, 0.5), ConfigError);
}

TEST_CASE("cosine similarity hand values") {
  const std::vector<double> a{1, 0}, b{0, 1}, c{1, 1}, z{0, 0};
  CHECK(*cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(*cosine_similarity(a, b) == 0.0);
  CHECK(*cosine_similarity(a, c) == doctest::Approx(0.70710678118654752).epsilon(1e-15));
  CHECK_FALSE(cosine_similarity(a, z).has_value());
  const std::vector<double> big{1e200, 1e200};
  CHECK(*cosine_similarity(big, c) == doctest::Approx(1.0));
}

TEST_CASE("selection probabilities") {
  const std::vector<double> q0{0.2, 0.3, 0.5}, q1{0.3, 0.6, -0.1};
  const auto g = selection_probs(q1, q0);
  CHECK(g[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(0.6).epsilon(1e-12));
  for (double v : selection_probs(q0, q0)) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mesh point selection is reproducible, distinct, and carries corners") {
  const std::vector<double> q0(100, 0.01);
  std::vector<double> q1(100, 0.0);
  for (std::size_t i = 0; i < 100; ++i) q1[i] = (i + 1) / 5050.0;
  const std::vector<std::size_t> corners{100, 101, 102, 103};
  Engine r1 = make_engine(5, 1), r2 = make_engine(5, 1);
  const auto s1 = select_mesh_points(q1, q0, 30, corners, r1);
  const auto s2 = select_mesh_points(q1, q0, 30, corners, r2);
  CHECK(s1 == s2);
  CHECK(s1.size() == 34);
  auto sorted = s1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(std::equal(corners.begin(), corners.end(), s1.end() - 4));
}

TEST_CASE("weighted draws without replacement favour heavy points") {
  std::vector<double> w(10, 0.0);
  w[3] = 1.0;
  w[7] = 1.0;
  Engine rng = make_engine(2, 2);
  const auto pick = draw_without_replacement(w, 4, rng);
  CHECK(pick.size() == 4);
  CHECK(std::count(pick.begin(), pick.end(), 3) == 1);
  CHECK(std::count(pick.begin(), pick.end(), 7) == 1);
  CHECK_THROWS_AS(draw_without_replacement(w, 11, rng), ConfigError);
}

TEST_CASE("draws with replacement follow q and never pick zero-probability ids") {
  const std::vector<double> q{0.0, 0.1, 0.0, 0.2, 0.3, 0.4, 0.0};
  Engine rng = make_engine(8, 8);
  const std::size_t draws = 200000;
  const auto ids = draw_with_replacement(q, draws, rng);
  std::vector<std::size_t> counts(q.size(), 0);
  for (auto id : ids) ++counts[id];
  CHECK(counts[0] == 0);
  CHECK(counts[2] == 0);
  CHECK(counts[6] == 0);
  const std::vector<double> qp{0.1, 0.2, 0.3, 0.4};
  const std::vector<std::size_t> cp{counts[1], counts[3], counts[4], counts[5]};
  CHECK(chi_square(cp, qp, draws) < 11.34);  // 99% quantile, 3 dof
}

TEST_CASE("uniform step") {
  Engine a = make_engine(1, 1), b = make_engine(1, 1);
  const auto ba = uniform_step(50, 64, a);
  const auto bb = uniform_step(50, 64, b);
  CHECK(ba.ids == bb.ids);
  for (double w : ba.alpha_prime) CHECK(w == 1.0);

  const std::size_t n = 100, draws = 1000000;
  Engine rng = make_engine(4, 4);
  const auto big = uniform_step(n, draws, rng);
  std::vector<std::size_t> counts(n, 0);
  for (auto id : big.ids) ++counts[id];
  const std::vector<double> q(n, 1.0 / n);
  CHECK(chi_square(counts, q, draws) < 134.64);  // 99% quantile, 99 dof
}

TEST_CASE("sampler initialization") {
  const DmisSampler s4(unit_domain(), random_points(4, 1), {4, 0.4, 2.0}, 3);
  for (double q : s4.q()) CHECK(q == 0.25);

  const DmisSampler a(unit_domain(), random_points(60000, 2), {1000, 0.4, 2.0}, 9);
  const DmisSampler b(unit_domain(), random_points(60000, 2), {1000, 0.4, 2.0}, 9);
  CHECK(a.mesh_ids() == b.mesh_ids());
  CHECK(a.mesh_ids().size() >= 1000);
  CHECK(a.mesh_ids().size() <= 1004);
  CHECK(a.last_rebuild() == 0);
  for (std::size_t c : a.corner_ids()) {
    CHECK(std::find(a.mesh_ids().begin(), a.mesh_ids().end(), c) != a.mesh_ids().end());
  }

  CHECK_THROWS_AS(DmisSampler(unit_domain(), random_points(10, 1), {11, 0.4, 2.0}, 1), ConfigError);
  CHECK_THROWS_AS(DmisSampler(unit_domain(), random_points(10, 1), {5, 0.4, 0.5}, 1), ConfigError);
  CHECK_THROWS_AS(DmisSampler(unit_domain(), random_points(10, 1), {5, 1.5, 2.0}, 1), ConfigError);
}

TEST_CASE("affine loss field: full-grid mesh reproduces exact probabilities") {
  const auto pts = grid_points(21);
  DmisSampler s(unit_domain(), pts, {pts.size(), 0.4, 2.0}, 4);
  s.step(field(affine_field), 16);
  std::vector<double> exact;
  for (const auto& p : pts) exact.push_back(affine_field(p));
  const auto q = compute_probs(exact);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) worst = std::max(worst, std::abs(q[i] - s.q()[i]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("affine loss field: sparse mesh still reproduces it through interpolation") {
  const auto pts = random_points(3000, 6);
  DmisSampler s(unit_domain(), pts, {40, 0.4, 1.5}, 4);
  s.step(field(affine_field), 16);
  std::vector<double> exact;
  for (const auto& p : pts) exact.push_back(affine_field(p));
  const auto q = compute_probs(exact);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) worst = std::max(worst, std::abs(q[i] - s.q()[i]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("mesh points carry their exact loss bit for bit") {
  const auto pts = random_points(2000, 7);
  DmisSampler s(unit_domain(), pts, {100, 0.4, 2.0}, 8);
  auto wavy = [](const Point& p) { return 1.0 + std::sin(7 * p.t) * std::cos(5 * p.x); };
  const LossEvaluator eval = [&](std::span<const Point> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = wavy(in[i]);
  };
  const auto ids_before = s.mesh_ids();
  s.step(eval, 8);
  for (std::size_t id : ids_before) {
    if (id < pts.size()) CHECK(s.loss_estimate()[id] == wavy(pts[id]));
  }
}

TEST_CASE("constant loss gives uniform sampling with unit weights") {
  const std::size_t n = 50;
  DmisSampler s(unit_domain(), random_points(n, 11), {20, 0.4, 2.0}, 2);
  const auto st = s.step(field(constant_field), 200000);
  for (double q : s.q()) CHECK(q == doctest::Approx(1.0 / n).epsilon(1e-12));
  for (double a : st.batch.alpha_prime) CHECK(a == doctest::Approx(1.0).epsilon(1e-10));
  std::vector<std::size_t> counts(n, 0);
  for (auto id : st.batch.ids) ++counts[id];
  const std::vector<double> q(n, 1.0 / n);
  CHECK(chi_square(counts, q, st.batch.ids.size()) < 74.92);  // 99% quantile, 49 dof
  CHECK_FALSE(st.rebuilt);
  CHECK(*st.similarity == doctest::Approx(1.0));
}

TEST_CASE("probabilities stay on the simplex and keep the loss ranking") {
  const auto pts = random_points(5000, 12);
  DmisSampler s(unit_domain(), pts, {200, 0.4, 2.0}, 3);
  auto bump = [](const Point& p) { return std::exp(-40 * ((p.t - 0.3) * (p.t - 0.3) + (p.x - 0.6) * (p.x - 0.6))); };
  const LossEvaluator eval = [&](std::span<const Point> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = bump(in[i]);
  };
  for (int k = 0; k < 5; ++k) {
    s.step(eval, 64);
    const double sum = std::accumulate(s.q().begin(), s.q().end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(*std::min_element(s.q().begin(), s.q().end()) >= 0.0);
  }
  // Rank preservation of compute_probs itself.
  Engine rng = make_engine(1, 9);
  std::vector<double> losses(1000);
  for (double& l : losses) l = uniform01(rng);
  const auto q = compute_probs(losses);
  std::vector<std::size_t> by_l(1000), by_q(1000);
  std::iota(by_l.begin(), by_l.end(), 0);
  std::iota(by_q.begin(), by_q.end(), 0);
  std::stable_sort(by_l.begin(), by_l.end(), [&](auto a, auto b) { return losses[a] < losses[b]; });
  std::stable_sort(by_q.begin(), by_q.end(), [&](auto a, auto b) { return q[a] < q[b]; });
  CHECK(by_l == by_q);
}

TEST_CASE("importance weights make the estimator unbiased at beta 1") {
  Engine rng = make_engine(3, 3);
  const std::size_t n = 500;
  std::vector<double> losses(n);
  for (double& l : losses) l = 0.05 + uniform01(rng) * uniform01(rng) * 4;
  const auto q = compute_probs(losses);
  const auto alpha = sample_weights(q, n, 1.0);
  // Exact expectation of alpha_i l_i under q.
  double expectation = 0.0;
  for (std::size_t i = 0; i < n; ++i) expectation += q[i] * alpha[i] * losses[i];
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  CHECK(expectation == doctest::Approx(mean).epsilon(1e-12));

  const std::size_t draws = 100000;
  const auto ids = draw_with_replacement(q, draws, rng);
  double s1 = 0.0, s2 = 0.0;
  for (auto id : ids) {
    const double v = alpha[id] * losses[id];
    s1 += v;
    s2 += v * v;
  }
  const double est = s1 / draws;
  const double var = s2 / draws - est * est;
  CHECK(std::abs(est - mean) <= 3 * std::sqrt(std::max(var, 1e-30) / draws) + 1e-12);
}

TEST_CASE("no rebuild while similarity stays above gamma") {
  const auto pts = random_points(3000, 13);
  DmisSampler s(unit_domain(), pts, {100, 0.4, 2.0}, 5);
  const auto ids = s.mesh_ids();
  const auto q_t0 = s.q_t0();
  const auto st = s.step(field(constant_field), 32);
  REQUIRE(st.similarity.has_value());
  CHECK(*st.similarity >= 0.4);
  CHECK_FALSE(st.rebuilt);
  CHECK(s.mesh_ids() == ids);
  CHECK(s.q_t0() == q_t0);
  CHECK(s.last_rebuild() == 0);
  CHECK(s.iteration() == 1);
}

TEST_CASE("a loss field spanning decades triggers a rebuild toward high loss") {
  const auto pts = random_points(6000, 14);
  DmisSampler s(unit_domain(), pts, {150, 0.4, 2.0}, 6);
  // Weights ~ 1/l^2 concentrate on the low-loss corner, so the weight vector
  // turns away from the all-ones vector of initialization.
  auto peak = [](const Point& p) { return std::exp(-12 * (p.t + p.x)); };
  const LossEvaluator eval = [&](std::span<const Point> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = peak(in[i]);
  };
  const auto st = s.step(eval, 32);
  CHECK(st.rebuilt);
  CHECK(*st.similarity < 0.4);
  CHECK(s.last_rebuild() == 0);
  CHECK(s.q_t0() == s.q());
  REQUIRE(s.rebuilds().size() == 1);
  CHECK(s.rebuilds()[0].mesh_points == s.mesh_ids().size());
  // |q - q_t0| is largest near the origin, which covers 1/8 of the area.
  int near = 0, total = 0;
  for (std::size_t id : s.mesh_ids()) {
    if (id >= pts.size()) continue;
    ++total;
    near += pts[id].t + pts[id].x < 0.5;
  }
  CHECK(near > total / 4);
  std::ostringstream log;
  write_rebuild_log(log, s.rebuilds());
  CHECK(log.str().rfind("rebuild,0,", 0) == 0);
}

TEST_CASE("sampler runs are deterministic") {
  auto run = [] {
    DmisSampler s(unit_domain(), random_points(1500, 15), {60, 0.4, 1.5}, 7);
    auto wave = [](const Point& p) { return 1.1 + std::sin(9 * p.t + 4 * p.x); };
    const LossEvaluator eval = [&](std::span<const Point> in, std::span<double> out) {
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = wave(in[i]);
    };
    std::vector<std::size_t> all;
    for (int k = 0; k < 3; ++k) {
      const auto st = s.step(eval, 20);
      all.insert(all.end(), st.batch.ids.begin(), st.batch.ids.end());
    }
    return all;
  };
  CHECK(run() == run());
}

TEST_CASE("network-backed step evaluates the residual at mesh points") {
  const PdeProblem pb = make_problem("burgers");
  const MlpParams net = init_mlp(2, 8, 1, 3);
  const auto data = generate_collocation(pb, 800, 10, 10, 1);
  DmisSampler s(pb.domain, data.residual.points, {50, 0.4, 1.5}, 1);
  const auto ids = s.mesh_ids();
  std::vector<Point> at;
  for (std::size_t id : ids) at.push_back(id < 800 ? data.residual.points[id] : Point{});
  std::vector<double> exact(at.size());
  residual_loss_evaluator(pb, net)(at, exact);
  const auto st = s.step(pb, net, 32);
  CHECK(st.batch.ids.size() == 32);
  for (double a : st.batch.alpha_prime) {
    CHECK(a > 0);
    CHECK(std::isfinite(a));
  }
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 800) CHECK(s.loss_estimate()[ids[k]] == exact[k]);
  }
}
