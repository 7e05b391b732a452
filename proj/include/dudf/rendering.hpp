#pragma once

#include "dudf/common.hpp"
#include "dudf/eigen3.hpp"
#include "dudf/field.hpp"
#include "dudf/field_math.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace dudf {

struct Camera {
  Vec3 position{0.0, 0.0, 3.0};
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitY();
  double fov_degrees = 40.0;
  int width = 256;
  int height = 256;

  /// Throws std::invalid_argument for a degenerate frame, fov outside
  /// (0, 180) or empty resolution.
  void check() const;
  /// Unit direction through the center of pixel (x, y); row 0 is the top.
  Vec3 ray_direction(int x, int y) const;
};

struct PointLight {
  Vec3 position{2.0, 2.0, 3.0};
  double intensity = 1.0;
};

struct Material {
  Vec3 ambient{0.08, 0.08, 0.1};
  Vec3 diffuse{0.75, 0.72, 0.65};
  Vec3 specular{0.3, 0.3, 0.3};
  double shininess = 32.0;
};

struct RenderSettings {
  int max_steps = 256;
  double epsilon = 1e-4;          // hit threshold on the raw field value
  double safety = 0.9;            // step scale in (0, 1]
  int refine_iterations = 4;      // Newton polish of hits along the ray
  Vec3 background{1.0, 1.0, 1.0};
  Vec3 invalid_color{1.0, 0.0, 1.0};
  std::vector<PointLight> lights{PointLight{}};
  Material material;

  void check() const;
};

struct TraceStep {
  Vec3 origin;    // position the step was taken from
  double length;  // distance advanced
};

struct RayHit {
  bool hit = false;
  Vec3 point = Vec3::Zero();
  double value = 0.0;  // field value at `point`
  int steps = 0;       // marching steps taken
};

/// Conservative sphere tracing of a scaled field inside [-1, 1]^3. Each step
/// advances max(f, sqrt(f / alpha)) * safety; a value below epsilon (or
/// negative) is a hit. Rays that miss the cube take no steps. When
/// `steps_out` is given it receives every marching step.
RayHit sphere_trace(const ScalarField& field, const ScalingParams& p, const Vec3& origin, const Vec3& direction,
                    const RenderSettings& settings, std::vector<TraceStep>* steps_out = nullptr);

/// Batched form of sphere_trace: all live rays advance in lockstep.
std::vector<RayHit> trace_rays(const ScalarField& field, const ScalingParams& p, const std::vector<Vec3>& origins,
                               const std::vector<Vec3>& directions, const RenderSettings& settings);

struct SurfaceNormal {
  Vec3 normal = Vec3::Zero();
  bool valid = false;
  bool fallback = false;  // gradient used because the eigen gap vanished
};

/// Principal Hessian eigenvector, flipped so that normal . view_direction < 0.
SurfaceNormal surface_normal(const Jet2& jet, const Vec3& view_direction);
SurfaceNormal surface_normal(const ScalarField& field, const Vec3& point, const Vec3& view_direction);

/// Blinn-Phong radiance before gamma. `to_viewer` points from the surface
/// toward the camera.
Vec3 shade_linear(const Vec3& point, const Vec3& normal, const Vec3& to_viewer, const std::vector<PointLight>& lights,
                  const Material& material);
/// Gamma-encoded (2.2) color clamped to [0, 1].
Vec3 shade_blinn_phong(const Vec3& point, const Vec3& normal, const Vec3& to_viewer,
                       const std::vector<PointLight>& lights, const Material& material);

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Vec3> pixels;  // row-major from the top, components in [0, 1]

  Vec3& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Vec3& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderReport {
  std::size_t pixels = 0;
  std::size_t hits = 0;
  std::size_t fallback_normals = 0;
  std::size_t invalid_normals = 0;
  double mean_steps = 0.0;  // over all pixels

  double hit_ratio() const { return pixels ? static_cast<double>(hits) / pixels : 0.0; }
  double fallback_ratio() const { return hits ? static_cast<double>(fallback_normals) / hits : 0.0; }
};

Image render(const ScalarField& field, const ScalingParams& p, const Camera& camera, const RenderSettings& settings,
             RenderReport* report = nullptr);

/// Binary PPM (P6, maxval 255).
void write_image(const Image& image, const std::filesystem::path& path);
Image read_image(const std::filesystem::path& path);
std::uint8_t to_byte(double c);

struct CurvatureSample {
  double mean = 0.0;      // NaN when any stencil point is degenerate
  double gaussian = 0.0;  // NaN when any stencil point is degenerate
  bool valid = false;
};

/// Mean (0.5 div n) and Gaussian (-det [[J_n, n], [n^T, 0]]) curvature from
/// central differences of the eigenvector normal field with step h. Each
/// neighbor normal is sign-aligned to the center. The mean curvature is
/// reported as |H| unless `orientation` is given, in which case the center
/// normal is flipped to agree with it and H keeps its sign.
std::vector<CurvatureSample> surface_curvature(const ScalarField& field, const std::vector<Vec3>& points,
                                               double h = 1e-3, const Vec3* orientation = nullptr);
/// -det [[J, n], [n^T, 0]] for a normal-field Jacobian J (J(a, i) = dn_a/dx_i).
double gaussian_from_jacobian(const Mat3& jacobian, const Vec3& normal);

double mean_curvature(const ScalarField& field, const Vec3& point, double h = 1e-3,
                      const Vec3* orientation = nullptr);
double gaussian_curvature(const ScalarField& field, const Vec3& point, double h = 1e-3);

}  // namespace dudf
