#include "dmis/tape.hpp"

#include "dmis/error.hpp"

namespace dmis {

namespace detail {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.is_constant()) return b.tape();
  if (b.is_constant() || a.tape() == b.tape()) return a.tape();
  throw ContractError("arithmetic between variables of different tapes");
}

}  // namespace detail

Var Tape::unary(const Var& a, double value, double da) {
  nodes_.push_back({a.index(), -1, da, 0.0});
  return {this, static_cast<std::int32_t>(nodes_.size() - 1), value};
}

Var Tape::binary(const Var& a, const Var& b, double value, double da, double db) {
  if (a.is_constant()) return unary(b, value, db);
  if (b.is_constant()) return unary(a, value, da);
  nodes_.push_back({a.index(), b.index(), da, db});
  return {this, static_cast<std::int32_t>(nodes_.size() - 1), value};
}

std::vector<Jet<Var>> Tape::eval_jets(std::span<const Point> points, int max_x_order) {
  if (max_x_order < 0 || max_x_order > kMaxXOrder) {
    throw ContractError("x-derivative order must be in 0..3");
  }
  const int components = components_for_order(max_x_order);
  const int out_dim = params_->out_dim();

  Block block;
  Eigen::MatrixXd out;
  propagate_jets(*params_, points, components, &block.cache, out);
  block.first_leaf = static_cast<std::int32_t>(nodes_.size());
  block.columns = out.cols();

  // Leaf (row c, column col) lives at first_leaf + col * out_dim + c.
  nodes_.resize(nodes_.size() + static_cast<std::size_t>(out.size()));
  auto leaf = [&](int c, Eigen::Index col) {
    return Var(this, block.first_leaf + static_cast<std::int32_t>(col * out_dim + c), out(c, col));
  };

  const auto batch = static_cast<Eigen::Index>(points.size());
  std::vector<Jet<Var>> jets(points.size());
  for (Eigen::Index j = 0; j < batch; ++j) {
    Jet<Var>& jet = jets[j];
    jet.out_dim = out_dim;
    jet.x_order = max_x_order;
    for (int c = 0; c < out_dim; ++c) {
      jet.u[c] = leaf(c, j);
      jet.u_t[c] = leaf(c, batch + j);
      if (components > 2) jet.u_x[c] = leaf(c, 2 * batch + j);
      if (components > 3) jet.u_xx[c] = leaf(c, 3 * batch + j);
      if (components > 4) jet.u_xxx[c] = leaf(c, 4 * batch + j);
    }
  }
  blocks_.push_back(std::move(block));
  return jets;
}

Jet<Var> Tape::eval_jet(double t, double x, int max_x_order) {
  const Point p{t, x};
  return eval_jets(std::span<const Point>(&p, 1), max_x_order).front();
}

std::vector<double> Tape::backprop(const Var& loss) const {
  std::vector<double> grad(params_->size(), 0.0);
  if (loss.is_constant()) return grad;
  if (loss.tape() != this) throw ContractError("loss node is not on this tape");

  std::vector<double> bar(nodes_.size(), 0.0);
  bar[loss.index()] = 1.0;
  for (std::int32_t i = loss.index(); i >= 0; --i) {
    const double g = bar[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.a >= 0) bar[n.a] += n.da * g;
    if (n.b >= 0) bar[n.b] += n.db * g;
  }

  const int out_dim = params_->out_dim();
  Eigen::MatrixXd adjoint;
  for (const Block& block : blocks_) {
    if (block.first_leaf > loss.index()) break;
    adjoint.resize(out_dim, block.columns);
    for (Eigen::Index col = 0; col < block.columns; ++col) {
      for (int c = 0; c < out_dim; ++c) adjoint(c, col) = bar[block.first_leaf + col * out_dim + c];
    }
    backpropagate_jets(*params_, block.cache, adjoint, grad);
  }
  return grad;
}

std::vector<double> backprop_params(const Tape& tape, const Var& loss) {
  return tape.backprop(loss);
}

}  // namespace dmis
