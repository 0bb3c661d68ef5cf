#include "dmis/sampler.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "dmis/error.hpp"

namespace dmis {

std::vector<double> compute_probs(std::span<const double> losses) {
  const std::size_t n = losses.size();
  if (n == 0) throw ContractError("compute_probs on an empty loss vector");
  double sum = 0.0, peak = 0.0;
  for (double l : losses) {
    if (!std::isfinite(l)) throw NumericalError("non-finite residual loss");
    if (l < 0) throw ContractError("negative loss passed to compute_probs");
    sum += l;
    peak = std::max(peak, l);
  }
  std::vector<double> q(n);
  if (peak == 0.0) {
    std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(n));
    return q;
  }
  if (!std::isfinite(sum) || sum < DBL_MIN) {
    // Rescale so the sum neither overflows nor sits in the subnormal range.
    sum = 0.0;
    for (double l : losses) sum += l / peak;
    for (std::size_t i = 0; i < n; ++i) q[i] = (losses[i] / peak) / sum;
    return q;
  }
  for (std::size_t i = 0; i < n; ++i) q[i] = losses[i] / sum;
  return q;
}

double sample_weight(double q, std::size_t n_f, double beta) {
  if (q <= 0.0) return 0.0;
  return std::pow(1.0 / (static_cast<double>(n_f) * q), beta);
}

std::vector<double> sample_weights(std::span<const double> q, std::size_t n_f, double beta) {
  if (!(beta >= 1.0)) throw ConfigError("beta must be at least 1");
  std::vector<double> alpha(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) alpha[i] = sample_weight(q[i], n_f, beta);
  return alpha;
}

std::optional<double> cosine_similarity(std::span<const double> v0, std::span<const double> v) {
  if (v0.size() != v.size()) throw ContractError("cosine similarity of unequal lengths");
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    m0 = std::max(m0, std::abs(v0[i]));
    m1 = std::max(m1, std::abs(v[i]));
  }
  if (m0 == 0.0 || m1 == 0.0 || !std::isfinite(m0) || !std::isfinite(m1)) return std::nullopt;
  double dot = 0.0, n0 = 0.0, n1 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = v0[i] / m0, b = v[i] / m1;
    dot += a * b;
    n0 += a * a;
    n1 += b * b;
  }
  return std::clamp(dot / (std::sqrt(n0) * std::sqrt(n1)), -1.0, 1.0);
}

std::vector<double> selection_probs(std::span<const double> q_now, std::span<const double> q_t0) {
  if (q_now.size() != q_t0.size()) throw ContractError("probability vectors differ in length");
  std::vector<double> diff(q_now.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(q_now[i] - q_t0[i]);
  return compute_probs(diff);
}

std::vector<std::size_t> draw_without_replacement(std::span<const double> weights, std::size_t count,
                                                  Engine& rng) {
  const std::size_t n = weights.size();
  if (count > n) throw ConfigError("cannot draw more distinct points than exist");
  // Weighted reservoir keys log(u) / w; the largest keys win.
  std::vector<std::pair<double, std::size_t>> keyed;
  std::vector<std::size_t> zeros;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] > 0) {
      const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
      keyed.emplace_back(std::log(u) / weights[i], i);
    } else {
      zeros.push_back(i);
    }
  }
  auto by_key = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::vector<std::size_t> out;
  out.reserve(count);
  const std::size_t take = std::min(count, keyed.size());
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(take), keyed.end(), by_key);
  for (std::size_t k = 0; k < take; ++k) out.push_back(keyed[k].second);
  for (std::size_t k = 0; out.size() < count; ++k) {
    const std::size_t j = k + uniform_index(rng, zeros.size() - k);
    std::swap(zeros[k], zeros[j]);
    out.push_back(zeros[k]);
  }
  return out;
}

std::vector<std::size_t> draw_with_replacement(std::span<const double> q, std::size_t count, Engine& rng) {
  std::vector<double> cumulative(q.size());
  std::partial_sum(q.begin(), q.end(), cumulative.begin());
  const double total = cumulative.back();
  std::vector<std::size_t> ids(count);
  for (auto& id : ids) {
    const double r = uniform01(rng) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    id = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                           static_cast<std::ptrdiff_t>(q.size()) - 1));
  }
  return ids;
}

std::vector<std::size_t> select_mesh_points(std::span<const double> q_now, std::span<const double> q_t0,
                                            std::size_t size, std::span<const std::size_t> corner_ids,
                                            Engine& rng) {
  const auto g = selection_probs(q_now, q_t0);
  auto ids = draw_without_replacement(g, size, rng);
  for (std::size_t c : corner_ids) {
    if (std::find(ids.begin(), ids.end(), c) == ids.end()) ids.push_back(c);
  }
  return ids;
}

WeightedBatch uniform_step(std::size_t n_f, std::size_t batch_size, Engine& rng) {
  WeightedBatch b;
  b.ids.resize(batch_size);
  for (auto& id : b.ids) id = static_cast<std::size_t>(uniform_index(rng, n_f));
  b.alpha_prime.assign(batch_size, 1.0);
  return b;
}

LossEvaluator residual_loss_evaluator(const PdeProblem& pb, const MlpParams& net) {
  return [&pb, &net](std::span<const Point> pts, std::span<double> out) {
    const auto jets = eval_jets(net, pts, pb.required_order);
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = residual_loss(pb, jets[i], pts[i]);
  };
}

DmisSampler::DmisSampler(const DomainSpec& domain, std::vector<Point> residual_points,
                         const DmisConfig& config, std::uint64_t seed)
    : domain_(domain), points_(std::move(residual_points)), config_(config), rng_(make_engine(seed, 0x646d6973)) {
  const std::size_t n = points_.size();
  if (config_.mesh_size < 3) throw ConfigError("mesh size must be at least 3");
  if (config_.mesh_size > n) throw ConfigError("mesh size exceeds the residual set");
  if (!(config_.beta >= 1.0)) throw ConfigError("beta must be at least 1");
  if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");

  q_.assign(n, 1.0 / static_cast<double>(n));
  q_t0_ = q_;
  loss_hat_.assign(n, 0.0);
  alpha_.assign(n, 1.0);
  const std::vector<double> uniform_weights(n, 1.0);
  auto ids = draw_without_replacement(uniform_weights, config_.mesh_size, rng_);
  for (std::size_t c : corner_ids()) ids.push_back(c);
  rebuild(std::move(ids));
  v_t0_.assign(mesh_ids_.size(), 1.0);
}

std::array<std::size_t, 4> DmisSampler::corner_ids() const {
  const std::size_t n = points_.size();
  return {n, n + 1, n + 2, n + 3};
}

Point DmisSampler::point_of(std::size_t id) const {
  const std::size_t n = points_.size();
  if (id < n) return points_[id];
  const std::size_t c = id - n;
  return {(c & 1) ? domain_.train_end() : 0.0, (c & 2) ? domain_.x_max : domain_.x_min};
}

Point2 DmisSampler::normalize(const Point& p) const {
  return {p.t / domain_.train_end(), (p.x - domain_.x_min) / domain_.length()};
}

void DmisSampler::rebuild(std::vector<std::size_t> ids) {
  auto build = [&](const std::vector<std::size_t>& chosen) {
    std::vector<MeshPoint> mp;
    mp.reserve(chosen.size());
    for (std::size_t id : chosen) mp.push_back({static_cast<std::int64_t>(id), normalize(point_of(id))});
    return Triangulation::build(mp);
  };
  try {
    mesh_ = build(ids);
  } catch (const GeometryError&) {
    const std::vector<double> uniform_weights(points_.size(), 1.0);
    ids = draw_without_replacement(uniform_weights, config_.mesh_size, rng_);
    for (std::size_t c : corner_ids()) ids.push_back(c);
    mesh_ = build(ids);  // a second failure propagates
  }

  const std::size_t n = points_.size();
  mesh_ids_.clear();
  std::vector<int> vertex_of(n, -1);
  for (std::size_t v = 0; v < mesh_.num_vertices(); ++v) {
    const auto id = static_cast<std::size_t>(mesh_.vertices()[v].id);
    mesh_ids_.push_back(id);
    if (id < n) vertex_of[id] = static_cast<int>(v);
  }

  stencil_.resize(n);
  int hint = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (vertex_of[i] >= 0) {
      stencil_[i] = {{vertex_of[i], vertex_of[i], vertex_of[i]}, {1.0, 0.0, 0.0}};
      continue;
    }
    const Point2 p = normalize(points_[i]);
    const int k = mesh_.locate(p, hint);
    if (k == Triangulation::kOutside) {
      const int v = static_cast<int>(mesh_.nearest_vertex(p));
      stencil_[i] = {{v, v, v}, {1.0, 0.0, 0.0}};
      continue;
    }
    hint = k;
    stencil_[i] = {mesh_.triangles()[k].v, mesh_.barycentric(k, p)};
  }
}

std::vector<double> DmisSampler::mesh_weights(std::span<const double> vertex_losses, double loss_sum) const {
  // Corners are not in N_f; they are weighed as if they were, by their share.
  const std::size_t n = points_.size();
  std::vector<double> v(vertex_losses.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double q = loss_sum > 0 ? vertex_losses[k] / loss_sum : 1.0 / static_cast<double>(n);
    v[k] = sample_weight(q, n, config_.beta);
  }
  return v;
}

DmisSampler::Step DmisSampler::step(const LossEvaluator& losses, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t n = points_.size();

  std::vector<Point> at(mesh_ids_.size());
  for (std::size_t k = 0; k < at.size(); ++k) at[k] = point_of(mesh_ids_[k]);
  std::vector<double> exact(at.size());
  losses(at, exact);
  for (double l : exact) {
    if (!std::isfinite(l)) throw NumericalError("non-finite residual loss on the mesh");
  }
  mesh_.set_values(exact);

  for (std::size_t i = 0; i < n; ++i) {
    const Stencil& s = stencil_[i];
    const double l = s.w[0] * exact[s.v[0]] + s.w[1] * exact[s.v[1]] + s.w[2] * exact[s.v[2]];
    loss_hat_[i] = std::max(l, 0.0);
  }
  q_ = compute_probs(loss_hat_);

  Step out;
  out.batch.ids = draw_with_replacement(q_, batch_size, rng_);
  alpha_ = sample_weights(q_, n, config_.beta);
  out.batch.alpha_prime.reserve(batch_size);
  for (std::size_t id : out.batch.ids) out.batch.alpha_prime.push_back(alpha_[id]);

  double loss_sum = 0.0;
  for (double l : loss_hat_) loss_sum += l;
  out.similarity = cosine_similarity(v_t0_, mesh_weights(exact, loss_sum));
  if (!out.similarity || *out.similarity < config_.gamma) {
    rebuild(select_mesh_points(q_, q_t0_, config_.mesh_size, corner_ids(), rng_));
    q_t0_ = q_;
    // The reference vector holds exact weights of the new S at this step.
    at.resize(mesh_ids_.size());
    for (std::size_t k = 0; k < at.size(); ++k) at[k] = point_of(mesh_ids_[k]);
    exact.resize(at.size());
    losses(at, exact);
    for (double l : exact) {
      if (!std::isfinite(l)) throw NumericalError("non-finite residual loss on the mesh");
    }
    v_t0_ = mesh_weights(exact, loss_sum);
    t0_ = t_;
    out.rebuilt = true;
    events_.push_back({t_, out.similarity.value_or(std::numeric_limits<double>::quiet_NaN()),
                       mesh_ids_.size()});
  }
  ++t_;
  return out;
}

void write_rebuild_log(std::ostream& out, std::span<const RebuildEvent> events) {
  out.precision(10);
  for (const RebuildEvent& e : events) {
    out << "rebuild," << e.iter << ',' << e.similarity << ',' << e.mesh_points << '\n';
  }
}

}  // namespace dmis
