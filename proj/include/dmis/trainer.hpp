#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmis/mlp.hpp"
#include "dmis/pde.hpp"
#include "dmis/sampler.hpp"
#include "dmis/tape.hpp"

namespace dmis {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update in place. Returns false, leaving both the
/// parameters and the state untouched, if any gradient entry is non-finite.
bool adam_step(std::span<double> theta, std::span<const double> grad, AdamState& state, const AdamConfig& cfg);

enum class SamplerKind { kUniform, kDmis };

struct TrainConfig {
  std::string benchmark = "burgers";
  int depth = 3;
  int width = 32;
  AdamConfig adam;
  double lambda_i = 1.0;
  double lambda_b = 1.0;
  std::size_t n_f = 100000;
  std::size_t n_i = 2000;
  std::size_t n_b = 2000;
  std::size_t batch_f = 512;
  std::size_t batch_i = 128;
  std::size_t batch_b = 128;
  std::int64_t max_iters = 10000;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::kDmis;
  DmisConfig dmis;
  std::int64_t recompute_every = 100;  // full-batch loss cadence
};

/// Throws ConfigError on out-of-range values.
void validate(const TrainConfig& cfg);

/// Mini-batch loss of one iteration.
struct TrainRecord {
  std::int64_t iter = 0;
  double loss = 0.0;
  double loss_f = 0.0;
  double loss_i = 0.0;
  double loss_b = 0.0;
  double ms = 0.0;
  bool rebuild = false;
};

/// Full-batch training loss after `iter` updates.
struct LossSample {
  std::int64_t iter = 0;
  double loss = 0.0;
  double loss_f = 0.0;
  double loss_i = 0.0;
  double loss_b = 0.0;
  double ms = 0.0;
};

struct LossParts {
  Var total, f, i, b;
};

/// L = L_f + lambda_i L_i + lambda_b L_b on the tape, with
/// L_f = mean(alpha' * l_f) over the weighted batch.
LossParts assemble_loss(Tape& tape, const PdeProblem& pb, const WeightedBatch& batch_f,
                        std::span<const Point> residual_points, std::span<const Point> initial_batch,
                        std::span<const Point> boundary_batch, double lambda_i, double lambda_b);

/// Unweighted means over whole collocation sets, evaluated in chunks.
struct FullLoss {
  double total = 0.0, f = 0.0, i = 0.0, b = 0.0;
};
FullLoss full_batch_loss(const PdeProblem& pb, const MlpParams& net, const CollocationData& data,
                         double lambda_i, double lambda_b);

/// Optional streaming outputs of a training run.
struct TrainSinks {
  std::ostream* log = nullptr;       // iter,L,L_f,L_i,L_b,ms,rebuild
  std::ostream* rebuilds = nullptr;  // event,iter,sim,mesh_points
  std::string checkpoint_path;       // rewritten every checkpoint_every iterations
  std::int64_t checkpoint_every = 1000;
};

struct TrainResult {
  MlpParams params;
  std::vector<TrainRecord> records;
  std::vector<LossSample> curve;
  std::vector<RebuildEvent> rebuilds;
  std::int64_t aborted = 0;
};

/// Runs the configured optimization. More than 10 consecutive aborted
/// iterations (non-finite loss or gradient) raise NumericalError.
TrainResult train(const TrainConfig& cfg, const TrainSinks& sinks = {});

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const TrainRecord& r);
void write_curve_csv(std::ostream& out, std::span<const LossSample> curve);
std::vector<LossSample> read_curve_csv(std::istream& in);

}  // namespace dmis
