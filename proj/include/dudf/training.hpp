#pragma once

#include "dudf/common.hpp"
#include "dudf/field_math.hpp"
#include "dudf/sampling.hpp"
#include "dudf/siren.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dudf {

struct LossWeights {
  double eikonal = 1e4;
  double dirichlet = 1e4;
  double neumann = 1e4;
  double mcurv = 1e3;
  double refine_mean = 1e5;
  double refine_std = 1e5;

  void check() const;
};

/// One stretch of the schedule. Refinement phases optimize only the
/// refinement loss; the others the four-term loss.
struct LrPhase {
  double fraction = 1.0;
  double learning_rate = 1e-4;
  bool cosine = false;
  bool refinement = false;
};

/// 1e-4 and 1e-5 for the first two thirds, then 1e-7 with cosine decay and
/// only the refinement loss.
std::vector<LrPhase> default_phases();

struct TrainConfig {
  int iterations = 1500;
  std::size_t batch_size = 3000;
  ScalingParams alpha{100.0};
  LossWeights weights;
  std::vector<LrPhase> phases = default_phases();
  std::uint64_t seed = 0;
  bool deterministic = true;
  double near_sigma = 0.01;
  double clip_norm = 10.0;

  int hidden_layers = 4;
  int width = 64;
  double omega0 = 30.0;

  void check() const;
};

/// Phase index and learning rate used at an iteration.
struct ScheduleStep {
  std::size_t phase = 0;
  double learning_rate = 0.0;
  bool refinement = false;
};
ScheduleStep schedule_at(const TrainConfig& config, int iteration);

struct AdamState {
  ParameterGradients first;
  ParameterGradients second;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const SirenNetwork& net);
};

/// Bias-corrected Adam update. Rejects non-finite gradients.
void adam_step(SirenNetwork& net, const ParameterGradients& grads, AdamState& state, double lr);

/// Raised when a loss or gradient becomes non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int iteration, std::string term, long index = -1);
  int iteration() const { return iteration_; }
  const std::string& term() const { return term_; }
  long index() const { return index_; }

 private:
  int iteration_;
  std::string term_;
  long index_;
};

// Individual terms, unweighted. Each is a mean over its samples.
double eikonal_loss(std::span<const Jet2> jets, std::span<const double> distances, const ScalingParams& p);
double dirichlet_loss(std::span<const Jet2> jets, std::span<const double> targets);
double neumann_loss(std::span<const Jet2> surface_jets);

struct McurvResult {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

/// Mean of 1 - |v1 . n| with v1 the principal Hessian eigenvector. Samples
/// whose top two eigenvalue magnitudes are within 1e-9 are skipped; throws
/// when more than half are.
McurvResult mcurv_loss(std::span<const Jet2> surface_jets, std::span<const Vec3> normals);

/// Smooth stand-in optimized during training: 1 - |n.Hn| / ||Hn||, zero
/// exactly when n is an eigenvector.
McurvResult mcurv_surrogate(std::span<const Jet2> surface_jets, std::span<const Vec3> normals);

/// lambda_mu * |mean(f)| + lambda_sigma * std(f), population std.
double refinement_loss(std::span<const double> surface_values, double lambda_mean, double lambda_std);

struct LossBreakdown {
  double eikonal = 0.0;
  double dirichlet = 0.0;
  double neumann = 0.0;
  double mcurv = 0.0;        // surrogate actually optimized
  double mcurv_eigen = 0.0;  // eigenvector form, for monitoring
  std::size_t mcurv_skipped = 0;
  double refinement = 0.0;   // already includes its lambdas
  double total = 0.0;
};

/// Weighted objective of a batch for either the four-term phase or the
/// refinement phase.
LossBreakdown total_loss(const TrainingBatch& batch, const SirenNetwork& net, const TrainConfig& config,
                         bool refinement);

/// Total loss with its parameter gradient. Jet orders are the minimum the
/// active terms need.
struct BatchGradient {
  LossBreakdown breakdown;
  ParameterGradients gradients;
};
BatchGradient total_loss_gradients(const TrainingBatch& batch, const SirenNetwork& net, const TrainConfig& config,
                                   bool refinement);

struct LogRecord {
  int iteration = 0;
  std::size_t phase = 0;
  double learning_rate = 0.0;
  LossBreakdown loss;
  double grad_norm = 0.0;
  bool clipped = false;
};

/// Plain text, one record per line after a '#' header:
/// iteration phase lr total eikonal dirichlet neumann mcurv mcurv_eigen refinement grad_norm clipped
void write_training_log(const std::vector<LogRecord>& log, const std::filesystem::path& path);

struct TrainResult {
  SirenNetwork network;
  std::vector<LogRecord> log;
  double seconds = 0.0;
};

using TrainObserver = std::function<void(const LogRecord&)>;

/// Seed of the batch drawn at a training iteration.
std::uint64_t batch_seed(std::uint64_t seed, int iteration);

/// Runs the schedule on a normalized oriented cloud.
TrainResult train(const OrientedPointCloud& cloud, const TrainConfig& config, const TrainObserver& observer = {});

}  // namespace dudf
