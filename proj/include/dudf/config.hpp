#pragma once

#include "dudf/common.hpp"
#include "dudf/rendering.hpp"
#include "dudf/sampling.hpp"
#include "dudf/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dudf {

/// Invalid configuration text or values. Messages name the key and line.
class ConfigError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Everything a run needs. Exactly one of `input` and `shape` is set.
struct RunConfig {
  std::optional<std::filesystem::path> input;
  CloudFormat input_format = CloudFormat::Auto;
  std::optional<std::string> shape;       // parse_shape syntax
  std::size_t cloud_points = 20000;       // training points drawn from `shape`
  std::size_t reference_points = 100000;  // held-out ground truth drawn from `shape`

  std::filesystem::path output_dir = "dudf_out";
  TrainConfig train;
  int grid_resolution = 128;
  Camera camera;
  RenderSettings render;

  std::size_t eval_samples = 100000;
  std::uint64_t eval_seed = 0;
  std::optional<std::filesystem::path> eval_reference;

  std::vector<double> ablate_alpha;
  std::vector<std::string> ablate_toggles;  // loss terms to switch off

  /// Throws ConfigError when the input sources clash or values are out of
  /// range.
  void check() const;
};

/// Parses the sectioned key=value format; '#' starts a comment.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Text that parse_run_config maps back to the same configuration.
std::string format_run_config(const RunConfig& config);

/// Loss terms accepted by [ablate] toggles.
const std::vector<std::string>& ablation_toggle_names();
/// Zeroes the weights of a toggle ("eikonal", "dirichlet", "neumann",
/// "mcurv", "refinement").
void apply_toggle(LossWeights& weights, const std::string& toggle);

}  // namespace dudf
