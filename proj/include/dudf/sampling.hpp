#pragma once

#include "dudf/common.hpp"
#include "dudf/field_math.hpp"
#include "dudf/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace dudf {

struct OrientedPointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;  // unit, one per position

  std::size_t size() const { return positions.size(); }
  /// Throws std::invalid_argument when empty, sizes differ or a normal is not
  /// unit length within 1e-6.
  void check() const;
};

enum class CloudFormat { Auto, Obj, Ply, Xyz };

/// Reads an oriented cloud. Formats:
///   Obj: "v x y z" and "vn nx ny nz" records, paired by order.
///   Ply: ASCII, vertex element with float properties x y z nx ny nz.
///   Xyz: whitespace separated "x y z nx ny nz" per line, '#' comments.
/// Auto picks by extension (.obj, .ply, anything else is Xyz). Normals are
/// renormalized; zero normals are rejected. With require_normals false a
/// file lacking normals loads with an empty normals list.
OrientedPointCloud load_cloud(const std::filesystem::path& path, CloudFormat format = CloudFormat::Auto,
                              bool require_normals = true);

/// Writes the Xyz format with 17 significant digits.
void save_cloud_xyz(const OrientedPointCloud& cloud, const std::filesystem::path& path);

/// x_cube = scale * x + translation.
struct SimilarityTransform {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * x + translation; }
  Vec3 invert(const Vec3& y) const { return (y - translation) / scale; }
};

struct NormalizedCloud {
  OrientedPointCloud cloud;
  SimilarityTransform to_cube;
};

/// Centers the bounding box at the origin and scales its longest side to
/// 2 * (1 - margin).
NormalizedCloud normalize_to_cube(const OrientedPointCloud& cloud, double margin = 0.1);

/// kd-tree over a point set. Nearest-neighbour ties go to the lowest index.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<Vec3> points, std::vector<Vec3> normals = {});
  explicit SpatialIndex(const OrientedPointCloud& cloud) : SpatialIndex(cloud.positions, cloud.normals) {}

  struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
  };

  Neighbor nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  const std::vector<Vec3>& normals() const { return normals_; }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, std::size_t& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<Vec3> normals_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct ApproxUdf {
  double distance = 0.0;
  Vec3 normal = Vec3::Zero();  // normal of the nearest cloud point, zero if the index has none
  Vec3 point = Vec3::Zero();
};

ApproxUdf approx_udf(const SpatialIndex& index, const Vec3& x);

struct TrainingSample {
  Vec3 position = Vec3::Zero();
  double target_distance = 0.0;
  std::optional<Vec3> normal;  // surface group only
};

/// near[i] is surface[i] displaced along its normal.
struct TrainingBatch {
  std::vector<TrainingSample> surface;
  std::vector<TrainingSample> near;
  std::vector<TrainingSample> far;
};

/// Draws n_total / 3 samples per group: surface points from the cloud, near
/// points displaced by N(0, sigma) along the normal (target = displacement
/// length, resampled up to 10 times to stay in the cube), and far points
/// uniform in [-1, 1]^3 with nearest-neighbour targets.
TrainingBatch sample_batch(const OrientedPointCloud& cloud, const SpatialIndex& index, std::size_t n_total,
                           double sigma, std::uint64_t seed);

/// Area-weighted uniform sampling with face normals.
OrientedPointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Uniform area sampling of an analytic shape with exact normals.
OrientedPointCloud sample_shape_surface(const AnalyticShape& shape, std::size_t n, std::uint64_t seed);

}  // namespace dudf
