#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dmis/error.hpp"
#include "dmis/trainer.hpp"
#include "fd_oracle.hpp"

using namespace dmis;

namespace {

TrainConfig small_burgers(SamplerKind sampler, std::int64_t iters) {
  TrainConfig cfg;
  cfg.benchmark = "burgers";
  cfg.depth = 2;
  cfg.width = 12;
  cfg.adam.learning_rate = 0.005;
  cfg.n_f = 2000;
  cfg.n_i = 200;
  cfg.n_b = 200;
  cfg.batch_f = 128;
  cfg.batch_i = 64;
  cfg.batch_b = 64;
  cfg.max_iters = iters;
  cfg.seed = 3;
  cfg.sampler = sampler;
  cfg.dmis = {100, 0.4, 1.5};
  return cfg;
}

}  // namespace

TEST_CASE("first Adam step moves by about the learning rate") {
  std::vector<double> theta{1.0};
  const std::vector<double> g{0.5};
  AdamState st;
  REQUIRE(adam_step(theta, g, st, {0.001, 0.9, 0.999, 1e-8}));
  CHECK(theta[0] - 1.0 == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(st.step == 1);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  std::vector<double> theta{0.3, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamState st;
  for (int k = 0; k < 3; ++k) REQUIRE(adam_step(theta, g, st, {}));
  CHECK(theta[0] == 0.3);
  CHECK(theta[1] == -2.0);
}

TEST_CASE("non-finite gradients abort the step without side effects") {
  std::vector<double> theta{0.3, -2.0};
  AdamState st;
  const std::vector<double> g{0.1, 0.2};
  REQUIRE(adam_step(theta, g, st, {}));
  const auto theta_before = theta;
  const auto st_before = st;
  const std::vector<double> bad{0.1, NAN};
  CHECK_FALSE(adam_step(theta, bad, st, {}));
  CHECK(theta == theta_before);
  CHECK(st.m == st_before.m);
  CHECK(st.step == st_before.step);
}

TEST_CASE("Adam steps are deterministic") {
  auto run = [] {
    std::vector<double> theta{0.1, 0.2, 0.3};
    AdamState st;
    for (int k = 0; k < 20; ++k) {
      const std::vector<double> g{std::sin(k * 1.0), std::cos(k * 0.5), 0.01 * k};
      adam_step(theta, g, st, {0.01, 0.9, 0.999, 1e-8});
    }
    return theta;
  };
  CHECK(run() == run());
}

TEST_CASE("weighted residual loss hand example") {
  // The zero network on the diffusion problem has l_f = (5 e^{-t} x)^2.
  const PdeProblem pb = make_problem("diffusion");
  const MlpParams net(2, 4, 1, 0);
  const std::vector<Point> pts{{0.0, std::sqrt(0.1) / 5.0}, {0.0, std::sqrt(0.3) / 5.0}};
  const WeightedBatch batch{{0, 1}, {2.0, 2.0 / 3.0}};
  const std::vector<Point> ic{{0.0, 0.5}}, bc{{0.1, 0.0}};
  Tape tape(net);
  const LossParts parts = assemble_loss(tape, pb, batch, pts, ic, bc, 1.0, 1.0);
  CHECK(parts.f.value() == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("unit weights give the plain batch mean, and a satisfied IC gives zero") {
  const PdeProblem pb = make_problem("burgers");
  const MlpParams net = init_mlp(2, 6, 1, 4);
  const std::vector<Point> pts{{0.1, 0.2}, {0.3, -0.5}, {0.05, 0.9}};
  const WeightedBatch batch{{0, 1, 2}, {1.0, 1.0, 1.0}};
  const std::vector<Point> ic{{0.0, 0.3}}, bc{{0.2, 1.0}};
  Tape tape(net);
  const LossParts parts = assemble_loss(tape, pb, batch, pts, ic, bc, 1.0, 1.0);
  double mean = 0.0;
  for (const Point& p : pts) mean += residual_loss_at(pb, net, p) / 3.0;
  CHECK(parts.f.value() == doctest::Approx(mean).epsilon(1e-13));

  // Zero network: u(0, 0) = 0 = -sin(0).
  const MlpParams zero(2, 6, 1, 0);
  Tape z(zero);
  const std::vector<Point> origin{{0.0, 0.0}};
  CHECK(assemble_loss(z, pb, batch, pts, origin, bc, 1.0, 1.0).i.value() == 0.0);
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  for (const char* name : {"burgers", "kdv", "schrodinger", "allen-cahn", "diffusion"}) {
    const PdeProblem pb = make_problem(name);
    MlpParams net = init_mlp(2, 4, pb.out_dim, 21);
    Engine rng = make_engine(21, 1);
    for (double& v : net.flat()) v += uniform(rng, -0.1, 0.1);
    const std::vector<Point> pts{{0.1, 0.2}, {0.3, -0.5}, {0.05, 0.9}};
    const WeightedBatch batch{{0, 1, 2}, {1.5, 0.5, 2.0}};
    const std::vector<Point> ic{{0.0, 0.3}, {0.0, -0.7}};
    const std::vector<Point> bc{{0.2, pb.domain.x_min}, {0.4, pb.domain.x_max}};
    auto loss_of = [&](const MlpParams& n) {
      Tape t(n);
      return assemble_loss(t, pb, batch, pts, ic, bc, 0.7, 1.3).total.value();
    };
    Tape tape(net);
    const auto g = tape.backprop(assemble_loss(tape, pb, batch, pts, ic, bc, 0.7, 1.3).total);
    const auto fd = testing::fd_param_gradient(net, loss_of);
    INFO(name);
    CHECK(testing::max_abs_diff(g, fd) <= 1e-5 * testing::max_abs(fd));
  }
}

TEST_CASE("zero iterations return the initial network and no records") {
  const TrainConfig cfg = small_burgers(SamplerKind::kDmis, 0);
  const TrainResult r = train(cfg);
  CHECK(r.params == init_mlp(cfg.depth, cfg.width, 1, cfg.seed));
  CHECK(r.records.empty());
  CHECK(r.curve.empty());
}

TEST_CASE("table defaults for Burgers are accepted") {
  TrainConfig cfg;
  cfg.benchmark = "burgers";
  cfg.depth = 3;
  cfg.width = 32;
  cfg.adam.learning_rate = 0.005;
  cfg.dmis = {1000, 0.4, 1.5};
  CHECK_NOTHROW(validate(cfg));
  cfg.batch_f = cfg.n_f + 1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("uniform smoke run lowers the full-batch loss") {
  const TrainResult r = train(small_burgers(SamplerKind::kUniform, 500));
  REQUIRE(r.curve.size() == 6);
  CHECK(r.curve.front().iter == 0);
  CHECK(r.curve.back().iter == 500);
  CHECK(r.curve.back().loss < r.curve.front().loss);
  CHECK(r.records.size() == 500);
  for (std::size_t k = 1; k < r.records.size(); ++k) CHECK(r.records[k].ms >= r.records[k - 1].ms);
  CHECK(r.rebuilds.empty());
}

TEST_CASE("DMIS smoke run lowers the loss and is deterministic") {
  const TrainConfig cfg = small_burgers(SamplerKind::kDmis, 300);
  std::ostringstream log1, reb1;
  TrainSinks sinks;
  sinks.log = &log1;
  sinks.rebuilds = &reb1;
  const TrainResult a = train(cfg, sinks);
  const TrainResult b = train(cfg);
  CHECK(a.params == b.params);
  CHECK(a.curve.back().loss < a.curve.front().loss);
  CHECK(log1.str().rfind("iter,L,L_f,L_i,L_b,ms,rebuild\n0,", 0) == 0);
  std::size_t rebuild_rows = 0;
  for (const auto& rec : a.records) rebuild_rows += rec.rebuild;
  CHECK(rebuild_rows == a.rebuilds.size());
  std::size_t lines = 0;
  for (char c : reb1.str()) lines += c == '\n';
  CHECK(lines == a.rebuilds.size());
}

TEST_CASE("runaway learning rate is reported as a numerical failure") {
  TrainConfig cfg = small_burgers(SamplerKind::kUniform, 200);
  cfg.adam.learning_rate = 1e300;
  CHECK_THROWS_AS(train(cfg), NumericalError);
}

TEST_CASE("curve files round trip") {
  const std::vector<LossSample> curve{{0, 1.5, 1.0, 0.25, 0.25, 0.0}, {100, 0.125, 0.1, 0.0125, 0.0125, 12.5}};
  std::stringstream buf;
  write_curve_csv(buf, curve);
  const auto back = read_curve_csv(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[1].iter == 100);
  CHECK(back[1].loss == 0.125);
  CHECK(back[1].ms == 12.5);
  std::stringstream bad("iter,loss\n");
  CHECK_THROWS_AS(read_curve_csv(bad), ArtifactError);
}
