#include "dmis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "dmis/error.hpp"
#include "dmis/jet.hpp"

namespace dmis {

ErrorStats error_stats(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) throw ContractError("prediction and reference differ in length");
  ErrorStats s;
  s.count = pred.size();
  if (s.count == 0) return s;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred[i] - ref[i]);
    s.me = std::max(s.me, e);
    abs_sum += e;
    sq_sum += e * e;
  }
  s.mae = abs_sum / static_cast<double>(s.count);
  s.rmse = std::sqrt(sq_sum / static_cast<double>(s.count));
  return s;
}

ErrorReport error_report(const FieldFn& field, const DomainSpec& domain, const SolutionGrid& grid, int eval_nx,
                         int eval_nt) {
  if (eval_nx < 2 || eval_nt < 2) throw ConfigError("evaluation grid needs at least 2 x 2 nodes");
  ErrorReport r;
  std::vector<Point> pts;
  std::vector<double> pred, ref;
  for (Segment seg : {Segment::kTrain, Segment::kValidation, Segment::kTest}) {
    const double t0 = domain.segment_begin(seg), t1 = domain.segment_end(seg);
    pts.clear();
    for (int k = 0; k < eval_nt; ++k) {
      const double t = t0 + (t1 - t0) * k / (eval_nt - 1);
      for (int i = 0; i < eval_nx; ++i) pts.push_back({t, domain.x_min + domain.length() * i / (eval_nx - 1)});
    }
    pred.assign(pts.size(), 0.0);
    field(pts, pred);
    ref.resize(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) ref[j] = sample(grid, pts[j].t, pts[j].x);
    r.segments[static_cast<int>(seg)] = error_stats(pred, ref);
  }
  return r;
}

ErrorReport error_report(const MlpParams& net, const PdeProblem& pb, const SolutionGrid& grid, int eval_nx,
                         int eval_nt) {
  const FieldFn field = [&](std::span<const Point> pts, std::span<double> out) {
    constexpr std::size_t kChunk = 4096;
    for (std::size_t a = 0; a < pts.size(); a += kChunk) {
      const std::size_t b = std::min(pts.size(), a + kChunk);
      const Eigen::MatrixXd u = forward_batch(net, pts.subspan(a, b - a));
      for (std::size_t j = a; j < b; ++j) {
        const auto c = static_cast<Eigen::Index>(j - a);
        out[j] = pb.out_dim == 2 ? std::hypot(u(0, c), u(1, c)) : u(0, c);
      }
    }
  };
  return error_report(field, pb.domain, grid, eval_nx, eval_nt);
}

const ConvergenceLevel& ConvergenceReport::level(int k) const {
  for (const ConvergenceLevel& l : levels) {
    if (l.k == k) return l;
  }
  throw ContractError("convergence level " + std::to_string(k) + " was not computed");
}

ConvergenceReport convergence_report(std::span<const LossSample> curve, std::span<const int> levels,
                                     std::int64_t window) {
  ConvergenceReport r;
  const std::int64_t last = curve.empty() ? 0 : curve.back().iter;
  for (int k : levels) {
    ConvergenceLevel lvl;
    lvl.k = k;
    const double threshold = std::pow(10.0, -k);
    // Scan backwards tracking how far the current below-threshold run extends.
    std::int64_t run_end = -1;  // iter of the first sample at or above threshold after i
    for (std::size_t j = curve.size(); j-- > 0;) {
      if (!(curve[j].loss < threshold)) {
        run_end = curve[j].iter;
        continue;
      }
      const bool stable = run_end < 0 || run_end > curve[j].iter + window;
      if (stable && curve[j].iter + window <= last) {
        lvl.nc = curve[j].iter;
        lvl.tc_ms = curve[j].ms;
      }
    }
    r.levels.push_back(lvl);
  }
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  const double a = values[n / 2 - 1], b = values[n / 2];
  return std::isinf(b) ? b : 0.5 * (a + b);
}

void write_errors_csv(std::ostream& out, const ErrorReport& r) {
  out.precision(10);
  out << "segment,me,mae,rmse,count\n";
  for (Segment s : {Segment::kTrain, Segment::kValidation, Segment::kTest}) {
    const ErrorStats& e = r[s];
    out << segment_name(s) << ',' << e.me << ',' << e.mae << ',' << e.rmse << ',' << e.count << '\n';
  }
}

void write_convergence_csv(std::ostream& out, const ConvergenceReport& r) {
  out.precision(10);
  for (std::size_t j = 0; j < r.levels.size(); ++j) out << (j ? "," : "") << "NC_" << r.levels[j].k;
  for (const ConvergenceLevel& l : r.levels) out << ",TC_" << l.k;
  out << '\n';
  for (std::size_t j = 0; j < r.levels.size(); ++j) {
    out << (j ? "," : "");
    if (r.levels[j].nc) out << *r.levels[j].nc; else out << "NA";
  }
  for (const ConvergenceLevel& l : r.levels) {
    out << ',';
    if (l.tc_ms) out << *l.tc_ms; else out << "NA";
  }
  out << '\n';
}

void write_error_summary(std::ostream& out, const ErrorReport& r) {
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %12s %12s %12s\n", "segment", "ME", "MAE", "RMSE");
  out << line;
  for (Segment s : {Segment::kTrain, Segment::kValidation, Segment::kTest}) {
    const ErrorStats& e = r[s];
    std::snprintf(line, sizeof line, "%-12s %12.4e %12.4e %12.4e\n", std::string(segment_name(s)).c_str(), e.me,
                  e.mae, e.rmse);
    out << line;
  }
}

}  // namespace dmis
