#pragma once

#include "dudf/common.hpp"
#include "dudf/field.hpp"
#include "dudf/field_math.hpp"
#include "dudf/mesh.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dudf {

/// Samples on the lattice origin + spacing * (i, j, k), i fastest.
struct ScalarGrid {
  int resolution = 0;
  Vec3 origin = Vec3::Constant(-1.0);
  double spacing = 0.0;
  std::vector<double> values;
  std::vector<Vec3> gradients;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution) * (static_cast<std::size_t>(j) +
                                                   static_cast<std::size_t>(resolution) * static_cast<std::size_t>(k));
  }
  Vec3 position(int i, int j, int k) const { return origin + spacing * Vec3(i, j, k); }
  std::size_t size() const { return values.size(); }
};

/// Values and gradients of the field on an N^3 lattice spanning [-1, 1]^3.
/// Throws on N < 8 and on non-finite values (message names the lattice
/// coordinates).
ScalarGrid evaluate_grid(const ScalarField& field, int resolution);

struct RecoveryWarnings {
  std::size_t below_tolerance = 0;  // values < -negative_tolerance
  double most_negative = 0.0;
};

/// Replaces scaled values t by sqrt(max(t, 0) / alpha). Values below
/// -negative_tolerance are counted in `warnings`. Gradients are kept.
ScalarGrid recover_grid_distance(const ScalarGrid& grid, const ScalingParams& p,
                                 RecoveryWarnings* warnings = nullptr, double negative_tolerance = 1e-3);

struct MeshingOptions {
  double value_floor = 1e-6;    // added to distances before signing
  double drop_factor = 1.5;     // triangles farther than this many spacings are dropped
};

struct MeshingStats {
  std::size_t cells_skipped = 0;
  std::size_t cells_crossed = 0;
  std::size_t triangles_dropped = 0;
  /// Lattice indices of the two corners each vertex was interpolated between.
  std::vector<std::array<std::size_t, 2>> vertex_edges;
};

/// Marching cubes on an unsigned distance grid. Each cell signs its corners
/// by the dot product of their gradients with corner 0's gradient, then
/// triangulates s_i * (d_i + floor). Shared edge vertices are welded.
TriangleMesh extract_mesh_gradient_mc(const ScalarGrid& grid, const MeshingOptions& options = {},
                                      MeshingStats* stats = nullptr);

/// Cube corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
/// Triangles of the configuration whose bit c is set when corner c is
/// positive, as triples of edge indices. Oriented with normals toward the
/// positive corners.
const std::vector<std::array<int, 3>>& marching_cubes_case(int config);
/// Corner pair of each of the 12 cube edges.
const std::array<std::array<int, 2>, 12>& cube_edges();

/// Binary dump: ASCII header "N ox oy oz spacing\n" then N^3 little-endian
/// float64 values.
void write_grid_dump(const ScalarGrid& grid, const std::filesystem::path& path);
ScalarGrid read_grid_dump(const std::filesystem::path& path);

}  // namespace dudf
