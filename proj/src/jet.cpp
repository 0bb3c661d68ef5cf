#include "dmis/jet.hpp"

#include <cmath>
#include <string>

#include "dmis/error.hpp"

namespace dmis {
namespace {

void check_inputs(const MlpParams& params, std::span<const Point> points) {
  for (const Point& p : points) {
    if (!std::isfinite(p.t) || !std::isfinite(p.x)) {
      throw NumericalError("non-finite network input (t=" + std::to_string(p.t) +
                           ", x=" + std::to_string(p.x) + ")");
    }
  }
  if (!params.all_finite()) throw NumericalError("non-finite network parameter");
}

// Seeds the input jets: value (t, x), d/dt = e_t, d/dx = e_x, higher zero.
void seed_input(std::span<const Point> points, int components, Eigen::MatrixXd& input) {
  const auto batch = static_cast<Eigen::Index>(points.size());
  input.setZero(MlpParams::kInputDim, components * batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    input(0, j) = points[j].t;
    input(1, j) = points[j].x;
  }
  if (components > 1) input.block(0, batch, 1, batch).setOnes();
  if (components > 2) input.block(1, 2 * batch, 1, batch).setOnes();
}

// Z_k = W A_k for every component block; the bias only enters the value.
void affine(const Eigen::Map<const Eigen::MatrixXd>& w, const Eigen::Map<const Eigen::VectorXd>& b,
            const Eigen::MatrixXd& a, int components, Eigen::Index batch, Eigen::MatrixXd& z) {
  z.resize(w.rows(), components * batch);
  for (int k = 0; k < components; ++k) {
    z.middleCols(k * batch, batch).noalias() = w * a.middleCols(k * batch, batch);
  }
  z.leftCols(batch).colwise() += b;
}

// tanh and its first four derivatives expressed through s = tanh(z).
struct TanhDerivs {
  double d1, d2, d3, d4;
  explicit TanhDerivs(double s) {
    const double s2 = s * s;
    d1 = 1.0 - s2;
    d2 = -2.0 * s * d1;
    d3 = -2.0 * d1 * d1 + 4.0 * s2 * d1;
    d4 = 16.0 * s * d1 * d1 - 8.0 * s2 * s * d1;
  }
};

// Faa di Bruno for y = tanh(z) along the jet components.
void activate(const Eigen::MatrixXd& z, int components, Eigen::Index batch, Eigen::MatrixXd& y) {
  y.resize(z.rows(), z.cols());
  const Eigen::Index rows = z.rows();
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) y(i, j) = std::tanh(z(i, j));
  }
  if (components == 1) return;
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const TanhDerivs d(y(i, j));
      y(i, batch + j) = d.d1 * z(i, batch + j);
      if (components < 3) continue;
      const double zx = z(i, 2 * batch + j);
      y(i, 2 * batch + j) = d.d1 * zx;
      if (components < 4) continue;
      const double zxx = z(i, 3 * batch + j);
      y(i, 3 * batch + j) = d.d2 * zx * zx + d.d1 * zxx;
      if (components < 5) continue;
      const double zxxx = z(i, 4 * batch + j);
      y(i, 4 * batch + j) = d.d3 * zx * zx * zx + 3.0 * d.d2 * zx * zxx + d.d1 * zxxx;
    }
  }
}

// Adjoint of activate(): maps dL/dy to dL/dz in place of `bar`.
void activate_adjoint(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, int components,
                      Eigen::Index batch, Eigen::MatrixXd& bar) {
  const Eigen::Index rows = z.rows();
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const TanhDerivs d(y(i, j));
      const double y0 = bar(i, j);
      double z0 = y0 * d.d1;
      if (components > 1) {
        const double zt = z(i, batch + j);
        const double yt = bar(i, batch + j);
        z0 += yt * d.d2 * zt;
        bar(i, batch + j) = yt * d.d1;
      }
      if (components > 2) {
        const double zx = z(i, 2 * batch + j);
        const double yx = bar(i, 2 * batch + j);
        double zx_bar = yx * d.d1;
        z0 += yx * d.d2 * zx;
        if (components > 3) {
          const double zxx = z(i, 3 * batch + j);
          const double yxx = bar(i, 3 * batch + j);
          zx_bar += yxx * 2.0 * d.d2 * zx;
          z0 += yxx * (d.d3 * zx * zx + d.d2 * zxx);
          double zxx_bar = yxx * d.d1;
          if (components > 4) {
            const double zxxx = z(i, 4 * batch + j);
            const double yxxx = bar(i, 4 * batch + j);
            zx_bar += yxxx * (3.0 * d.d3 * zx * zx + 3.0 * d.d2 * zxx);
            zxx_bar += yxxx * 3.0 * d.d2 * zx;
            z0 += yxxx * (d.d4 * zx * zx * zx + 3.0 * d.d3 * zx * zxx + d.d2 * zxxx);
            bar(i, 4 * batch + j) = yxxx * d.d1;
          }
          bar(i, 3 * batch + j) = zxx_bar;
        }
        bar(i, 2 * batch + j) = zx_bar;
      }
      bar(i, j) = z0;
    }
  }
}

}  // namespace

void propagate_jets(const MlpParams& params, std::span<const Point> points, int components,
                    JetCache* cache, Eigen::MatrixXd& out) {
  if (components < 1 || components > components_for_order(kMaxXOrder)) {
    throw ContractError("jet component count out of range");
  }
  check_inputs(params, points);
  const auto batch = static_cast<Eigen::Index>(points.size());
  const int hidden = params.depth();

  JetCache local;
  JetCache& c = cache ? *cache : local;
  c.components = components;
  c.batch = batch;
  c.pre.resize(hidden);
  c.post.resize(hidden);
  seed_input(points, components, c.input);

  for (int l = 0; l < hidden; ++l) {
    const Eigen::MatrixXd& a = l == 0 ? c.input : c.post[l - 1];
    affine(params.weight(l), params.bias(l), a, components, batch, c.pre[l]);
    activate(c.pre[l], components, batch, c.post[l]);
  }
  const Eigen::MatrixXd& last = hidden == 0 ? c.input : c.post[hidden - 1];
  affine(params.weight(hidden), params.bias(hidden), last, components, batch, out);
}

void backpropagate_jets(const MlpParams& params, const JetCache& cache,
                        const Eigen::MatrixXd& out_adjoint, std::span<double> grad) {
  if (grad.size() != params.size()) throw ContractError("gradient size mismatch");
  const int hidden = params.depth();
  const Eigen::Index batch = cache.batch;

  Eigen::MatrixXd bar = out_adjoint;
  Eigen::MatrixXd next, gw_tmp;
  Eigen::VectorXd gb_tmp;
  for (int l = hidden; l >= 0; --l) {
    const Eigen::MatrixXd& a = l == 0 ? cache.input : cache.post[l - 1];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + params.weight_offset(l), params.fan_out(l),
                                   params.fan_in(l));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + params.bias_offset(l), params.fan_out(l));
    // Reductions go through owned (aligned) temporaries: `grad` may have any
    // alignment, which would change the kernels' summation order.
    gw_tmp.noalias() = bar * a.transpose();
    gw += gw_tmp;
    gb_tmp = bar.leftCols(batch).rowwise().sum();
    gb += gb_tmp;
    if (l == 0) break;
    next.noalias() = params.weight(l).transpose() * bar;
    activate_adjoint(cache.pre[l - 1], cache.post[l - 1], cache.components, batch, next);
    bar.swap(next);
  }
}

std::vector<Jet<double>> eval_jets(const MlpParams& params, std::span<const Point> points,
                                   int max_x_order) {
  if (max_x_order < 0 || max_x_order > kMaxXOrder) {
    throw ContractError("x-derivative order must be in 0..3");
  }
  const int components = components_for_order(max_x_order);
  Eigen::MatrixXd out;
  propagate_jets(params, points, components, nullptr, out);
  const auto batch = static_cast<Eigen::Index>(points.size());
  std::vector<Jet<double>> jets(points.size());
  for (Eigen::Index j = 0; j < batch; ++j) {
    Jet<double>& jet = jets[j];
    jet.out_dim = params.out_dim();
    jet.x_order = max_x_order;
    for (int c = 0; c < params.out_dim(); ++c) {
      jet.u[c] = out(c, j);
      jet.u_t[c] = out(c, batch + j);
      if (components > 2) jet.u_x[c] = out(c, 2 * batch + j);
      if (components > 3) jet.u_xx[c] = out(c, 3 * batch + j);
      if (components > 4) jet.u_xxx[c] = out(c, 4 * batch + j);
    }
  }
  return jets;
}

Jet<double> eval_jet(const MlpParams& params, double t, double x, int max_x_order) {
  const Point p{t, x};
  return eval_jets(params, std::span<const Point>(&p, 1), max_x_order).front();
}

Eigen::MatrixXd forward_batch(const MlpParams& params, std::span<const Point> points) {
  Eigen::MatrixXd out;
  propagate_jets(params, points, kValueOnly, nullptr, out);
  return out;
}

}  // namespace dmis
