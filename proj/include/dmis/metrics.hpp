#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dmis/mlp.hpp"
#include "dmis/pde.hpp"
#include "dmis/reference.hpp"
#include "dmis/trainer.hpp"

namespace dmis {

struct ErrorStats {
  double me = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

/// Max, mean-absolute and root-mean-square of pred - ref.
ErrorStats error_stats(std::span<const double> pred, std::span<const double> ref);

struct ErrorReport {
  std::array<ErrorStats, 3> segments;  // indexed by Segment
  const ErrorStats& operator[](Segment s) const { return segments[static_cast<int>(s)]; }
};

inline constexpr int kEvalNx = 256;
inline constexpr int kEvalNt = 201;

/// Scalar field to compare against the reference, evaluated pointwise.
using FieldFn = std::function<void(std::span<const Point>, std::span<double>)>;

/// Evaluates `field` on an eval_nt x eval_nx uniform node set per time
/// segment (both ends included) and compares it with the sampled grid.
ErrorReport error_report(const FieldFn& field, const DomainSpec& domain, const SolutionGrid& grid,
                         int eval_nx = kEvalNx, int eval_nt = kEvalNt);

/// Network prediction; Schrodinger is compared through its modulus.
ErrorReport error_report(const MlpParams& net, const PdeProblem& pb, const SolutionGrid& grid,
                         int eval_nx = kEvalNx, int eval_nt = kEvalNt);

struct ConvergenceLevel {
  int k = 0;
  std::optional<std::int64_t> nc;  // empty when not reached
  std::optional<double> tc_ms;
};

struct ConvergenceReport {
  std::vector<ConvergenceLevel> levels;
  const ConvergenceLevel& level(int k) const;
};

inline constexpr std::int64_t kStableWindow = 1000;

/// NC_k is the first sampled iteration i whose loss, and every later sample
/// up to i + window, lies below 10^-k. The curve is treated as piecewise
/// constant and the window must fit inside the run (i + window <= last iter).
ConvergenceReport convergence_report(std::span<const LossSample> curve, std::span<const int> levels,
                                     std::int64_t window = kStableWindow);

/// Median with the mean of the two middle values for even sizes. +inf marks
/// a level that was not reached and sorts last.
double median(std::vector<double> values);

void write_errors_csv(std::ostream& out, const ErrorReport& r);
void write_convergence_csv(std::ostream& out, const ConvergenceReport& r);
/// Plain-text block with one row per segment: ME, MAE, RMSE.
void write_error_summary(std::ostream& out, const ErrorReport& r);

}  // namespace dmis
