// Command line front end. Exit codes: 0 success, 1 usage or configuration
// error, 2 runtime failure.

#include "dudf/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural unsigned distance fields: train, reconstruct, render and evaluate"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool deterministic = false;
  app.add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the training seed");
  app.add_option("--threads", threads, "Worker threads (0: DUDF_THREADS or all cores)");
  app.add_flag("--deterministic", deterministic, "Request bit-reproducible training");

  auto* train = app.add_subcommand("train", "Train a network and write <output>/model.ckpt");
  std::string output_dir;
  std::optional<int> iterations;
  train->add_option("--output", output_dir, "Output directory");
  train->add_option("--iterations", iterations, "Override the iteration count");

  auto* reconstruct = app.add_subcommand("reconstruct", "Extract a mesh from a checkpoint");
  std::string rec_checkpoint, rec_out;
  std::optional<int> resolution;
  bool curvature = false;
  reconstruct->add_option("checkpoint", rec_checkpoint)->required();
  reconstruct->add_option("mesh", rec_out, "Output OBJ")->required();
  reconstruct->add_option("--resolution", resolution, "Grid resolution per axis (>= 8)");
  reconstruct->add_flag("--curvature", curvature, "Append per-vertex curvature records");

  auto* render_cmd = app.add_subcommand("render", "Sphere-trace a checkpoint to a PPM image");
  std::string ren_checkpoint, ren_out;
  render_cmd->add_option("checkpoint", ren_checkpoint)->required();
  render_cmd->add_option("image", ren_out, "Output PPM")->required();

  auto* eval = app.add_subcommand("eval", "Chamfer and normal consistency against the reference");
  std::string eval_input, eval_reference, eval_report, eval_table;
  eval->add_option("input", eval_input, "Checkpoint or OBJ mesh")->required();
  eval->add_option("--reference", eval_reference, "Reference cloud in the normalized frame");
  eval->add_option("--report", eval_report, "Write the key=value report here");
  eval->add_option("--table", eval_table, "Append a row to this results table");

  auto* ablate = app.add_subcommand("ablate", "Train, reconstruct and evaluate an ablation matrix");
  std::string ablate_alpha, ablate_toggles, ablate_table;
  ablate->add_option("--alpha", ablate_alpha, "Comma-separated alpha values");
  ablate->add_option("--toggles", ablate_toggles, "Comma-separated loss terms to switch off");
  ablate->add_option("--table", ablate_table, "Results table (default <output>/ablation.txt)");

  auto* sample = app.add_subcommand("sample", "Dump one training batch as text");
  std::string sample_out;
  sample->add_option("out", sample_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    dudf::set_thread_count(threads);
    dudf::RunConfig config = config_path.empty() ? dudf::RunConfig{} : dudf::load_run_config(config_path);
    if (seed) config.train.seed = *seed;
    if (deterministic) config.train.deterministic = true;
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (iterations) config.train.iterations = *iterations;
    if (resolution) config.grid_resolution = *resolution;
    if (!eval_reference.empty()) config.eval_reference = eval_reference;
    if (!ablate_alpha.empty()) {
      config.ablate_alpha.clear();
      for (const auto& a : split_list(ablate_alpha)) config.ablate_alpha.push_back(std::stod(a));
    }
    if (!ablate_toggles.empty()) config.ablate_toggles = split_list(ablate_toggles);
    config.check();

    if (*train) {
      const auto out = dudf::run_train(config, &std::cout);
      std::printf("checkpoint=%s\nlog=%s\nseconds=%.2f\n", out.checkpoint.string().c_str(), out.log.string().c_str(),
                  out.result.seconds);
    } else if (*reconstruct) {
      const auto r = dudf::run_reconstruct(rec_checkpoint, config.grid_resolution, rec_out, curvature);
      std::printf("vertices=%zu\ntriangles=%zu\nboundary_edges=%zu\nnon_manifold_edges=%zu\nwatertight=%d\n",
                  r.mesh.vertices.size(), r.mesh.triangles.size(), r.edges.boundary, r.edges.non_manifold,
                  r.edges.watertight() ? 1 : 0);
      if (r.recovery.below_tolerance)
        std::fprintf(stderr, "warning: %zu grid values below -1e-3 (min %.3g) were clamped\n",
                     r.recovery.below_tolerance, r.recovery.most_negative);
    } else if (*render_cmd) {
      const auto rep = dudf::run_render(ren_checkpoint, config.camera, config.render, ren_out);
      std::printf("pixels=%zu\nhit_ratio=%.6f\nfallback_ratio=%.6f\ninvalid_normals=%zu\nmean_steps=%.3f\n",
                  rep.pixels, rep.hit_ratio(), rep.fallback_ratio(), rep.invalid_normals, rep.mean_steps);
    } else if (*eval) {
      const auto report = dudf::run_eval(eval_input, config, eval_report);
      if (!report.has_nc) std::fprintf(stderr, "warning: reference has no normals; nc omitted\n");
      std::cout << report.to_text();
      if (!eval_table.empty()) dudf::append_results_row(eval_table, eval_input, 0.0, report);
      if (report.failed) return 2;
    } else if (*ablate) {
      const std::filesystem::path table = ablate_table.empty() ? config.output_dir / "ablation.txt" : std::filesystem::path(ablate_table);
      const auto rows = dudf::run_ablate(config, table, &std::cerr);
      std::printf("%-16s %10s %12s %12s %10s\n", "id", "time_s", "l1cd_x1e3", "l2cd_x1e3", "nc");
      for (const auto& r : rows)
        std::printf("%-16s %10.2f %12.5g %12.5g %10.5g%s\n", r.id.c_str(), r.seconds, r.report.l1cd_x1e3,
                    r.report.l2cd_x1e3, r.report.nc, r.ok ? "" : "  FAILED");
    } else if (*sample) {
      const auto batch = dudf::run_sample(config, sample_out);
      std::printf("surface=%zu\nnear=%zu\nfar=%zu\n", batch.surface.size(), batch.near.size(), batch.far.size());
    }
  } catch (const dudf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
