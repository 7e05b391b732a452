#pragma once

#include "dudf/checkpoint.hpp"
#include "dudf/config.hpp"
#include "dudf/mesh.hpp"
#include "dudf/metrics.hpp"
#include "dudf/reconstruction.hpp"
#include "dudf/rendering.hpp"
#include "dudf/training.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace dudf {

/// Training cloud in the normalized cube and the reference cloud metrics are
/// measured against. Analytic shapes are sampled (training and reference use
/// different seeds); file inputs are loaded, normalized and serve as both.
struct PreparedInput {
  NormalizedCloud training;
  OrientedPointCloud reference;
};
PreparedInput prepare_input(const RunConfig& config);

struct TrainOutcome {
  TrainResult result;
  std::filesystem::path checkpoint;  // <output>/model.ckpt
  std::filesystem::path log;         // <output>/train.log
};

/// Trains and writes the checkpoint, the training log and the effective
/// configuration (<output>/run.cfg). Progress lines go to `progress`.
TrainOutcome run_train(const RunConfig& config, std::ostream* progress = nullptr);

struct Reconstruction {
  TriangleMesh mesh;
  MeshingStats meshing;
  RecoveryWarnings recovery;
  EdgeStats edges;
};

Reconstruction reconstruct(const ScalarField& field, const ScalingParams& p, int resolution);

/// Loads the checkpoint, reconstructs and writes the mesh as OBJ. With
/// `curvature` the per-vertex mean and Gaussian curvature records are added.
Reconstruction run_reconstruct(const std::filesystem::path& checkpoint, int resolution,
                               const std::filesystem::path& mesh_out, bool curvature = false);

RenderReport run_render(const std::filesystem::path& checkpoint, const Camera& camera, const RenderSettings& settings,
                        const std::filesystem::path& image_out);

/// True when the file starts with the checkpoint magic.
bool is_checkpoint(const std::filesystem::path& path);

/// Metrics for a checkpoint (reconstructed at the configured resolution) or
/// an OBJ mesh against the configured reference. The report is written to
/// `report_out` when non-empty.
MetricReport run_eval(const std::filesystem::path& model_or_mesh, const RunConfig& config,
                      const std::filesystem::path& report_out = {});

struct AblationRow {
  std::string id;
  double seconds = 0.0;  // training time
  MetricReport report;
  bool ok = false;
  std::string error;
};

/// Configurations of the ablation matrix: one per alpha, then a baseline
/// and one per toggled-off loss term. Throws ConfigError when empty.
std::vector<std::pair<std::string, RunConfig>> ablation_cells(const RunConfig& config);

/// Trains, reconstructs and evaluates every cell. Failures are recorded in
/// the row and the harness moves on. The table is rewritten from scratch.
std::vector<AblationRow> run_ablate(const RunConfig& config, const std::filesystem::path& table_out,
                                    std::ostream* progress = nullptr);

/// Writes one training batch as text: "<group> x y z target [nx ny nz]".
TrainingBatch run_sample(const RunConfig& config, const std::filesystem::path& out);

}  // namespace dudf
