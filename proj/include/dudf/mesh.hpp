#pragma once

#include "dudf/common.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace dudf {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> normals;  // optional, per vertex

  bool empty() const { return triangles.empty(); }
  double triangle_area(std::size_t t) const;
  Vec3 face_normal(std::size_t t) const;  // unit, zero for degenerate faces
  /// Throws std::invalid_argument on out-of-range indices.
  void check() const;
};

/// Edge incidence summary: an edge with one incident triangle is a boundary
/// edge; more than two is non-manifold.
struct EdgeStats {
  std::size_t edges = 0;
  std::size_t boundary = 0;
  std::size_t manifold = 0;
  std::size_t non_manifold = 0;
  bool watertight() const { return edges > 0 && boundary == 0 && non_manifold == 0; }
};

EdgeStats edge_stats(const TriangleMesh& mesh);

/// Per-vertex scalars written as "# vH <value>" / "# vK <value>" records.
struct VertexCurvature {
  std::vector<double> mean;
  std::vector<double> gaussian;
};

/// ASCII OBJ: a header comment, "v x y z" with 9 significant digits, then
/// 1-based "f a b c". Curvature records follow the faces when given.
void export_obj(const TriangleMesh& mesh, const std::filesystem::path& path,
                const VertexCurvature* curvature = nullptr);

/// Reads v and f records (polygons are fan-triangulated; v/vt/vn index forms
/// accepted) and any curvature comment records.
TriangleMesh import_obj(const std::filesystem::path& path, VertexCurvature* curvature = nullptr);

}  // namespace dudf
