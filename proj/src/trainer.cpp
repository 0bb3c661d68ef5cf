#include "dmis/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>

#include "dmis/error.hpp"

namespace dmis {

bool adam_step(std::span<double> theta, std::span<const double> grad, AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != theta.size()) throw ContractError("gradient length differs from parameter count");
  for (double g : grad) {
    if (!std::isfinite(g)) return false;
  }
  if (state.m.size() != theta.size()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grad[k];
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    theta[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  return true;
}

void validate(const TrainConfig& cfg) {
  make_problem(cfg.benchmark);
  if (cfg.depth < 1 || cfg.width < 1) throw ConfigError("depth and width must be positive");
  if (!(cfg.adam.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.adam.beta1 >= 0 && cfg.adam.beta1 < 1 && cfg.adam.beta2 >= 0 && cfg.adam.beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.adam.epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
  if (!(cfg.lambda_i >= 0 && cfg.lambda_b >= 0)) throw ConfigError("loss weights must be non-negative");
  if (cfg.n_f == 0 || cfg.n_i == 0 || cfg.n_b == 0) throw ConfigError("collocation set sizes must be positive");
  if (cfg.batch_f == 0 || cfg.batch_i == 0 || cfg.batch_b == 0) throw ConfigError("batch sizes must be positive");
  if (cfg.batch_f > cfg.n_f || cfg.batch_i > cfg.n_i || cfg.batch_b > cfg.n_b) {
    throw ConfigError("batch size exceeds its collocation set");
  }
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (cfg.recompute_every < 1) throw ConfigError("recompute cadence must be positive");
  if (cfg.sampler == SamplerKind::kDmis) {
    if (cfg.dmis.mesh_size < 3 || cfg.dmis.mesh_size > cfg.n_f) throw ConfigError("mesh size out of range");
    if (!(cfg.dmis.beta >= 1)) throw ConfigError("beta must be at least 1");
    if (!(cfg.dmis.gamma > 0 && cfg.dmis.gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
  }
}

namespace {

std::vector<Point> periodic_pairs(const PdeProblem& pb, std::span<const Point> boundary) {
  const std::size_t m = boundary.size();
  std::vector<Point> pts(2 * m);
  for (std::size_t k = 0; k < m; ++k) {
    pts[k] = {boundary[k].t, pb.domain.x_min};
    pts[m + k] = {boundary[k].t, pb.domain.x_max};
  }
  return pts;
}

// Sums of the per-point losses of one chunk, for any scalar type.
template <class S, class EvalJets>
S boundary_sum(const PdeProblem& pb, std::span<const Point> boundary, EvalJets&& eval) {
  S sum = 0.0;
  if (pb.bc == BoundaryKind::kPeriodic) {
    const auto pts = periodic_pairs(pb, boundary);
    const auto jets = eval(std::span<const Point>(pts), 1);
    for (std::size_t k = 0; k < boundary.size(); ++k) {
      sum = sum + periodic_loss(pb, jets[k], jets[boundary.size() + k]);
    }
  } else {
    const auto jets = eval(boundary, 0);
    for (std::size_t k = 0; k < boundary.size(); ++k) sum = sum + dirichlet_loss(pb, jets[k], boundary[k]);
  }
  return sum;
}

}  // namespace

LossParts assemble_loss(Tape& tape, const PdeProblem& pb, const WeightedBatch& batch_f,
                        std::span<const Point> residual_points, std::span<const Point> initial_batch,
                        std::span<const Point> boundary_batch, double lambda_i, double lambda_b) {
  if (batch_f.ids.empty() || initial_batch.empty() || boundary_batch.empty()) {
    throw ContractError("loss batches must be non-empty");
  }
  auto eval = [&tape](std::span<const Point> pts, int order) { return tape.eval_jets(pts, order); };

  std::vector<Point> f_pts(batch_f.ids.size());
  for (std::size_t k = 0; k < f_pts.size(); ++k) f_pts[k] = residual_points[batch_f.ids[k]];
  const auto jets_f = tape.eval_jets(f_pts, pb.required_order);
  Var sum_f = 0.0;
  for (std::size_t k = 0; k < f_pts.size(); ++k) {
    sum_f += batch_f.alpha_prime[k] * residual_loss(pb, jets_f[k], f_pts[k]);
  }

  const auto jets_i = tape.eval_jets(initial_batch, 0);
  Var sum_i = 0.0;
  for (std::size_t k = 0; k < initial_batch.size(); ++k) sum_i += initial_loss(pb, jets_i[k], initial_batch[k].x);

  const Var sum_b = boundary_sum<Var>(pb, boundary_batch, eval);

  LossParts parts;
  parts.f = sum_f * (1.0 / static_cast<double>(f_pts.size()));
  parts.i = sum_i * (1.0 / static_cast<double>(initial_batch.size()));
  parts.b = sum_b * (1.0 / static_cast<double>(boundary_batch.size()));
  parts.total = parts.f + lambda_i * parts.i + lambda_b * parts.b;
  return parts;
}

FullLoss full_batch_loss(const PdeProblem& pb, const MlpParams& net, const CollocationData& data,
                         double lambda_i, double lambda_b) {
  constexpr std::size_t kChunk = 2048;
  auto eval = [&net](std::span<const Point> pts, int order) { return eval_jets(net, pts, order); };
  auto chunked = [&](const std::vector<Point>& pts, auto&& chunk_sum) {
    double sum = 0.0;
    for (std::size_t start = 0; start < pts.size(); start += kChunk) {
      const std::size_t len = std::min(kChunk, pts.size() - start);
      sum += chunk_sum(std::span<const Point>(pts.data() + start, len));
    }
    return sum / static_cast<double>(pts.size());
  };
  FullLoss out;
  out.f = chunked(data.residual.points, [&](std::span<const Point> c) {
    const auto jets = eval_jets(net, c, pb.required_order);
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += residual_loss(pb, jets[k], c[k]);
    return s;
  });
  out.i = chunked(data.initial.points, [&](std::span<const Point> c) {
    const auto jets = eval_jets(net, c, 0);
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += initial_loss(pb, jets[k], c[k].x);
    return s;
  });
  out.b = chunked(data.boundary.points, [&](std::span<const Point> c) { return boundary_sum<double>(pb, c, eval); });
  out.total = out.f + lambda_i * out.i + lambda_b * out.b;
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

void save_atomically(const std::string& path, const MlpParams& params) {
  const std::string tmp = path + ".tmp";
  save_checkpoint(tmp, params);
  std::filesystem::rename(tmp, path);
}

std::vector<Point> gather(const std::vector<Point>& pts, const std::vector<std::size_t>& ids) {
  std::vector<Point> out(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) out[k] = pts[ids[k]];
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainSinks& sinks) {
  validate(cfg);
  const PdeProblem pb = make_problem(cfg.benchmark);
  const CollocationData data = generate_collocation(pb, cfg.n_f, cfg.n_i, cfg.n_b, cfg.seed);

  TrainResult result;
  result.params = init_mlp(cfg.depth, cfg.width, pb.out_dim, cfg.seed);
  MlpParams& net = result.params;

  const auto start = Clock::now();
  Clock::duration overhead{};  // full-batch evaluation and I/O, excluded from ms
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start - overhead).count();
  };

  std::optional<DmisSampler> dmis;
  if (cfg.sampler == SamplerKind::kDmis) dmis.emplace(pb.domain, data.residual.points, cfg.dmis, cfg.seed);
  Engine batch_rng = make_engine(cfg.seed, 0x66);
  Engine ic_rng = make_engine(cfg.seed, 0x69);
  Engine bc_rng = make_engine(cfg.seed, 0x62);
  AdamState adam;

  auto record_full = [&](std::int64_t iter) {
    const double ms = elapsed_ms();
    const auto t0 = Clock::now();
    const FullLoss fl = full_batch_loss(pb, net, data, cfg.lambda_i, cfg.lambda_b);
    result.curve.push_back({iter, fl.total, fl.f, fl.i, fl.b, ms});
    overhead += Clock::now() - t0;
  };
  auto checkpoint = [&] {
    if (sinks.checkpoint_path.empty()) return;
    const auto t0 = Clock::now();
    save_atomically(sinks.checkpoint_path, net);
    overhead += Clock::now() - t0;
  };

  if (sinks.log) write_log_header(*sinks.log);
  checkpoint();
  if (cfg.max_iters == 0) return result;
  record_full(0);

  std::int64_t consecutive_aborts = 0;
  std::size_t rebuilds_logged = 0;
  for (std::int64_t iter = 0; iter < cfg.max_iters; ++iter) {
    WeightedBatch batch_f;
    bool rebuilt = false;
    if (dmis) {
      auto step = dmis->step(pb, net, cfg.batch_f);
      batch_f = std::move(step.batch);
      rebuilt = step.rebuilt;
    } else {
      batch_f = uniform_step(cfg.n_f, cfg.batch_f, batch_rng);
    }
    const auto ic = gather(data.initial.points, uniform_step(cfg.n_i, cfg.batch_i, ic_rng).ids);
    const auto bc = gather(data.boundary.points, uniform_step(cfg.n_b, cfg.batch_b, bc_rng).ids);

    Tape tape(net);
    const LossParts parts =
        assemble_loss(tape, pb, batch_f, data.residual.points, ic, bc, cfg.lambda_i, cfg.lambda_b);
    bool ok = std::isfinite(parts.total.value());
    if (ok) {
      const auto grad = tape.backprop(parts.total);
      ok = adam_step(net.flat(), grad, adam, cfg.adam);
    }
    if (!ok) {
      ++result.aborted;
      if (++consecutive_aborts > 10) {
        throw NumericalError("training diverged: more than 10 consecutive non-finite iterations at iteration " +
                             std::to_string(iter));
      }
    } else {
      consecutive_aborts = 0;
      const TrainRecord rec{iter, parts.total.value(), parts.f.value(), parts.i.value(), parts.b.value(),
                            elapsed_ms(), rebuilt};
      result.records.push_back(rec);
      if (sinks.log) write_log_row(*sinks.log, rec);
    }

    const std::int64_t done = iter + 1;
    if (done % cfg.recompute_every == 0 || done == cfg.max_iters) record_full(done);
    if (sinks.checkpoint_every > 0 && done % sinks.checkpoint_every == 0) checkpoint();
    if (done % 100 == 0 || done == cfg.max_iters) {
      if (sinks.log) sinks.log->flush();
      if (sinks.rebuilds && dmis) {
        const auto& ev = dmis->rebuilds();
        write_rebuild_log(*sinks.rebuilds, std::span(ev).subspan(rebuilds_logged));
        rebuilds_logged = ev.size();
        sinks.rebuilds->flush();
      }
    }
  }
  if (dmis) result.rebuilds = dmis->rebuilds();
  checkpoint();
  return result;
}

void write_log_header(std::ostream& out) { out << "iter,L,L_f,L_i,L_b,ms,rebuild\n"; }

void write_log_row(std::ostream& out, const TrainRecord& r) {
  out.precision(10);
  out << r.iter << ',' << r.loss << ',' << r.loss_f << ',' << r.loss_i << ',' << r.loss_b << ','
      << r.ms << ',' << (r.rebuild ? 1 : 0) << '\n';
}

void write_curve_csv(std::ostream& out, std::span<const LossSample> curve) {
  out << "iter,L,L_f,L_i,L_b,ms\n";
  out.precision(17);
  for (const LossSample& s : curve) {
    out << s.iter << ',' << s.loss << ',' << s.loss_f << ',' << s.loss_i << ',' << s.loss_b << ',' << s.ms << '\n';
  }
}

std::vector<LossSample> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "iter,L,L_f,L_i,L_b,ms") {
    throw ArtifactError("unrecognized curve file header");
  }
  std::vector<LossSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    LossSample s;
    char c1, c2, c3, c4, c5;
    if (!(row >> s.iter >> c1 >> s.loss >> c2 >> s.loss_f >> c3 >> s.loss_i >> c4 >> s.loss_b >> c5 >> s.ms)) {
      throw ArtifactError("malformed curve row: " + line);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace dmis
