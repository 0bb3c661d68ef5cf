#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dmis/jet.hpp"
#include "dmis/mlp.hpp"

namespace dmis {

class Tape;

/// Scalar handle on a Tape. A Var without a tape is a constant.
class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

  double value() const { return value_; }
  bool is_constant() const { return index_ < 0; }
  Tape* tape() const { return tape_; }
  std::int32_t index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
  double value_ = 0.0;
};

/// Records scalar arithmetic on top of batched network jet evaluations and
/// replays it backwards to the network parameters.
///
/// Network evaluations enter the tape as blocks: every jet component of every
/// point becomes a leaf node, and the block keeps the forward intermediates so
/// the leaf adjoints can be pushed through the layers in one batched pass.
class Tape {
 public:
  explicit Tape(const MlpParams& params) : params_(&params) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const MlpParams& params() const { return *params_; }

  Jet<Var> eval_jet(double t, double x, int max_x_order);
  std::vector<Jet<Var>> eval_jets(std::span<const Point> points, int max_x_order);

  /// d(loss)/d(theta), one entry per network parameter. Constants give zeros.
  /// Throws ContractError if `loss` belongs to another tape.
  std::vector<double> backprop(const Var& loss) const;

  std::size_t num_nodes() const { return nodes_.size(); }

  // Recording primitives used by the Var operators.
  Var unary(const Var& a, double value, double da);
  Var binary(const Var& a, const Var& b, double value, double da, double db);

 private:
  struct Node {
    std::int32_t a = -1;
    std::int32_t b = -1;
    double da = 0.0;
    double db = 0.0;
  };
  struct Block {
    JetCache cache;
    std::int32_t first_leaf = 0;
    Eigen::Index columns = 0;
  };

  const MlpParams* params_;
  std::vector<Node> nodes_;
  std::vector<Block> blocks_;
};

std::vector<double> backprop_params(const Tape& tape, const Var& loss);

namespace detail {
Tape* common_tape(const Var& a, const Var& b);
}

inline Var operator+(const Var& a, const Var& b) {
  Tape* tape = detail::common_tape(a, b);
  const double v = a.value() + b.value();
  return tape ? tape->binary(a, b, v, 1.0, 1.0) : Var(v);
}
inline Var operator-(const Var& a, const Var& b) {
  Tape* tape = detail::common_tape(a, b);
  const double v = a.value() - b.value();
  return tape ? tape->binary(a, b, v, 1.0, -1.0) : Var(v);
}
inline Var operator*(const Var& a, const Var& b) {
  Tape* tape = detail::common_tape(a, b);
  const double v = a.value() * b.value();
  return tape ? tape->binary(a, b, v, b.value(), a.value()) : Var(v);
}
inline Var operator/(const Var& a, const Var& b) {
  Tape* tape = detail::common_tape(a, b);
  const double v = a.value() / b.value();
  return tape ? tape->binary(a, b, v, 1.0 / b.value(), -v / b.value()) : Var(v);
}
inline Var operator-(const Var& a) {
  return a.is_constant() ? Var(-a.value()) : a.tape()->unary(a, -a.value(), -1.0);
}
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var sin(const Var& a) {
  const double v = std::sin(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(a, v, std::cos(a.value()));
}
inline Var cos(const Var& a) {
  const double v = std::cos(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(a, v, -std::sin(a.value()));
}
inline Var exp(const Var& a) {
  const double v = std::exp(a.value());
  return a.is_constant() ? Var(v) : a.tape()->unary(a, v, v);
}

// Overloads so residual code can be written once for double and Var.
inline double value_of(double v) { return v; }
inline double value_of(const Var& v) { return v.value(); }

}  // namespace dmis
