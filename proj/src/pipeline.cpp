#include "dudf/pipeline.hpp"

#include <cstdio>
#include <fstream>

namespace dudf {

namespace {

constexpr std::uint64_t kReferenceSeedSalt = 0x9e3779b97f4a7c15ULL;

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

PreparedInput prepare_input(const RunConfig& config) {
  PreparedInput out;
  if (config.shape) {
    const AnalyticShape shape = parse_shape(*config.shape);
    validate(shape);
    out.training.cloud = sample_shape_surface(shape, config.cloud_points, config.train.seed);
    out.reference = sample_shape_surface(shape, config.reference_points, config.train.seed ^ kReferenceSeedSalt);
    return out;
  }
  if (!config.input) throw ConfigError("no input: set [input] cloud or shape");
  out.training = normalize_to_cube(load_cloud(*config.input, config.input_format));
  out.reference = out.training.cloud;
  return out;
}

TrainOutcome run_train(const RunConfig& config, std::ostream* progress) {
  config.check();
  const PreparedInput input = prepare_input(config);
  std::filesystem::create_directories(config.output_dir);

  const int every = std::max(1, config.train.iterations / 20);
  TrainObserver observer;
  if (progress)
    observer = [&](const LogRecord& r) {
      if (r.iteration % every != 0 && r.iteration + 1 != config.train.iterations) return;
      char buf[160];
      std::snprintf(buf, sizeof buf, "iter %5d  phase %zu  lr %.1e  loss %.6e%s\n", r.iteration, r.phase,
                    r.learning_rate, r.loss.total, r.clipped ? "  (clipped)" : "");
      *progress << buf << std::flush;
    };

  TrainOutcome out;
  out.result = train(input.training.cloud, config.train, observer);
  out.checkpoint = config.output_dir / "model.ckpt";
  out.log = config.output_dir / "train.log";
  save_checkpoint({out.result.network, config.train.alpha, config.train.seed}, out.checkpoint);
  write_training_log(out.result.log, out.log);
  std::ofstream echo(config.output_dir / "run.cfg", std::ios::trunc);
  echo << format_run_config(config);
  if (!echo) throw IoError("cannot write '" + (config.output_dir / "run.cfg").string() + "'");
  return out;
}

Reconstruction reconstruct(const ScalarField& field, const ScalingParams& p, int resolution) {
  Reconstruction r;
  const ScalarGrid grid = evaluate_grid(field, resolution);
  const ScalarGrid distance = recover_grid_distance(grid, p, &r.recovery);
  r.mesh = extract_mesh_gradient_mc(distance, {}, &r.meshing);
  r.edges = edge_stats(r.mesh);
  return r;
}

Reconstruction run_reconstruct(const std::filesystem::path& checkpoint, int resolution,
                               const std::filesystem::path& mesh_out, bool curvature) {
  if (resolution < 8) throw std::invalid_argument("grid resolution must be at least 8");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const NetworkField field(ck.network);
  Reconstruction r = reconstruct(field, ck.alpha, resolution);
  ensure_parent(mesh_out);
  if (curvature) {
    VertexCurvature vc;
    for (const CurvatureSample& c : surface_curvature(field, r.mesh.vertices)) {
      vc.mean.push_back(c.mean);
      vc.gaussian.push_back(c.gaussian);
    }
    export_obj(r.mesh, mesh_out, &vc);
  } else {
    export_obj(r.mesh, mesh_out);
  }
  return r;
}

RenderReport run_render(const std::filesystem::path& checkpoint, const Camera& camera, const RenderSettings& settings,
                        const std::filesystem::path& image_out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const NetworkField field(ck.network);
  RenderReport report;
  const Image image = render(field, ck.alpha, camera, settings, &report);
  ensure_parent(image_out);
  write_image(image, image_out);
  return report;
}

bool is_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[5] = {};
  in.read(magic, 5);
  return in.gcount() == 5 && std::string(magic, 5) == "DUDF1";
}

MetricReport run_eval(const std::filesystem::path& model_or_mesh, const RunConfig& config,
                      const std::filesystem::path& report_out) {
  OrientedPointCloud reference;
  if (config.eval_reference)
    reference = load_cloud(*config.eval_reference, CloudFormat::Auto, false);
  else
    reference = prepare_input(config).reference;

  TriangleMesh mesh;
  int resolution = 0;
  if (is_checkpoint(model_or_mesh)) {
    const Checkpoint ck = load_checkpoint(model_or_mesh);
    mesh = reconstruct(NetworkField(ck.network), ck.alpha, config.grid_resolution).mesh;
    resolution = config.grid_resolution;
  } else {
    mesh = import_obj(model_or_mesh);
  }
  MetricReport report = evaluate_reconstruction(mesh, reference, config.eval_samples, config.eval_seed);
  report.grid_resolution = resolution;
  if (!report_out.empty()) {
    ensure_parent(report_out);
    std::ofstream out(report_out, std::ios::trunc);
    out << report.to_text();
    if (!out) throw IoError("cannot write '" + report_out.string() + "'");
  }
  return report;
}

std::vector<std::pair<std::string, RunConfig>> ablation_cells(const RunConfig& config) {
  std::vector<std::pair<std::string, RunConfig>> cells;
  char buf[64];
  for (double a : config.ablate_alpha) {
    RunConfig c = config;
    c.train.alpha = ScalingParams(a);
    std::snprintf(buf, sizeof buf, "alpha=%g", a);
    cells.emplace_back(buf, c);
  }
  if (!config.ablate_toggles.empty()) {
    cells.emplace_back("baseline", config);
    for (const std::string& t : config.ablate_toggles) {
      RunConfig c = config;
      apply_toggle(c.train.weights, t);
      cells.emplace_back("no_" + t, c);
    }
  }
  if (cells.empty()) throw ConfigError("ablation matrix is empty: set [ablate] alpha and/or toggles");
  return cells;
}

std::vector<AblationRow> run_ablate(const RunConfig& config, const std::filesystem::path& table_out,
                                    std::ostream* progress) {
  const auto cells = ablation_cells(config);
  const PreparedInput input = prepare_input(config);
  ensure_parent(table_out);
  std::filesystem::remove(table_out);

  std::vector<AblationRow> rows;
  for (const auto& [id, cell] : cells) {
    AblationRow row;
    row.id = id;
    try {
      cell.check();
      if (progress) *progress << "ablate: " << id << "\n" << std::flush;
      const TrainResult trained = train(input.training.cloud, cell.train);
      row.seconds = trained.seconds;
      const Reconstruction rec = reconstruct(NetworkField(trained.network), cell.train.alpha, cell.grid_resolution);
      row.report = evaluate_reconstruction(rec.mesh, input.reference, cell.eval_samples, cell.eval_seed);
      row.report.grid_resolution = cell.grid_resolution;
      row.ok = !row.report.failed;
      if (row.report.failed) row.error = row.report.message;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.report.failed = true;
    }
    if (progress && !row.ok) *progress << "ablate: " << id << " failed: " << row.error << "\n";
    append_results_row(table_out, row.id, row.seconds, row.report);
    rows.push_back(row);
  }
  return rows;
}

TrainingBatch run_sample(const RunConfig& config, const std::filesystem::path& out_path) {
  config.check();
  const PreparedInput input = prepare_input(config);
  const SpatialIndex index(input.training.cloud);
  const TrainingBatch batch = sample_batch(input.training.cloud, index, config.train.batch_size,
                                           config.train.near_sigma, batch_seed(config.train.seed, 0));
  ensure_parent(out_path);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + out_path.string() + "' for writing");
  out << "# group x y z target [nx ny nz]\n";
  char buf[256];
  auto dump = [&](const char* group, const std::vector<TrainingSample>& samples) {
    for (const auto& s : samples) {
      std::snprintf(buf, sizeof buf, "%s %.9g %.9g %.9g %.9g", group, s.position.x(), s.position.y(), s.position.z(),
                    s.target_distance);
      out << buf;
      if (s.normal) {
        std::snprintf(buf, sizeof buf, " %.9g %.9g %.9g", s.normal->x(), s.normal->y(), s.normal->z());
        out << buf;
      }
      out << "\n";
    }
  };
  dump("surface", batch.surface);
  dump("near", batch.near);
  dump("far", batch.far);
  if (!out) throw IoError("write to '" + out_path.string() + "' failed");
  return batch;
}

}  // namespace dudf
