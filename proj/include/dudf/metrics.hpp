#pragma once

#include "dudf/common.hpp"
#include "dudf/mesh.hpp"
#include "dudf/sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dudf {

/// 0.5 * (mean over A of nn-distance^order into B + the same from B to A).
/// order is 1 or 2. Throws std::invalid_argument on empty sets.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b, int order);

/// 1 - 0.5 * (mean over A of |n_a . n_nn(a)| + the same from B to A); 0 is
/// perfect, unoriented. Normals off unit length by more than 1e-3 are
/// renormalized and counted in `renormalized`.
double normal_consistency(const OrientedPointCloud& a, const OrientedPointCloud& b,
                          std::size_t* renormalized = nullptr);

struct MetricReport {
  double l1cd_x1e3 = 0.0;
  double l2cd_x1e3 = 0.0;
  double nc = 0.0;
  bool has_nc = true;            // false when the reference carries no normals
  std::size_t mesh_samples = 0;
  std::size_t reference_points = 0;
  int grid_resolution = 0;       // 0 when not produced from a grid
  bool failed = false;           // empty mesh: CDs are infinite, NC is 1
  std::string message;

  /// One key=value pair per line.
  std::string to_text() const;
};

/// Samples n points with face normals from the mesh and compares them with
/// the reference cloud.
MetricReport evaluate_reconstruction(const TriangleMesh& mesh, const OrientedPointCloud& reference,
                                     std::size_t n_samples = 100000, std::uint64_t seed = 0);

/// Appends "id time_s l1cd_x1e3 l2cd_x1e3 nc" to a whitespace table, writing
/// the header line first when the file is new or empty.
void append_results_row(const std::filesystem::path& path, const std::string& id, double seconds,
                        const MetricReport& report);

}  // namespace dudf
