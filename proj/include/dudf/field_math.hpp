#pragma once

#include "dudf/common.hpp"
#include "dudf/jet.hpp"

#include <string>
#include <variant>

namespace dudf {

/// Width control of the hyperbolic scaling t = d * tanh(alpha * d).
class ScalingParams {
 public:
  explicit ScalingParams(double alpha = 100.0);
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

double scaled_distance(double d, const ScalingParams& p);

/// Norm of the gradient of the scaled field at unsigned distance d.
double phi(double d, const ScalingParams& p);

/// sqrt(t / alpha). Never larger than the distance t was computed from, and
/// only accurate inside the quadratic band (d << 1/alpha).
double recover_distance_sqrt(double t, const ScalingParams& p);

/// Exact inverse of scaled_distance by bracketed Newton/bisection.
double invert_scaled_distance(double t, const ScalingParams& p);

// Analytic ground-truth shapes. Lengths are in normalized-cube units.
struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
};

struct Torus {
  Vec3 center = Vec3::Zero();
  double major_radius = 0.5;
  double minor_radius = 0.2;
  Vec3 axis = Vec3::UnitZ();
};

struct OpenDisk {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  Vec3 normal = Vec3::UnitZ();
};

using AnalyticShape = std::variant<Sphere, Torus, OpenDisk>;

/// Throws std::invalid_argument when radii are non-positive, directions are
/// not unit length, or the shape leaves the side-2 cube.
void validate(const AnalyticShape& shape);

std::string shape_name(const AnalyticShape& shape);

/// Parses "sphere", "torus" or "disk" with default parameters, or a description such
/// as "sphere r=0.4 cx=0.1" / "torus R=0.5 r=0.2" / "disk r=0.6 nz=1".
AnalyticShape parse_shape(const std::string& text);

struct UdfSample {
  double distance = 0.0;
  Vec3 normal = Vec3::UnitZ();   // unoriented surface normal at the footpoint
  Vec3 closest = Vec3::Zero();   // footpoint on the surface
};

UdfSample analytic_udf(const AnalyticShape& shape, const Vec3& x);

/// Distance from x to the shape's known medial set (sphere center, torus core
/// circle and symmetry axis, disk rim circle), where grad d is undefined or
/// finite differences straddle a kink.
double medial_distance(const AnalyticShape& shape, const Vec3& x);

/// Scaled field of an analytic shape. Gradient is grad(d) * phi(d) (zero on
/// the surface); Hessian is a central difference of that gradient with step
/// 1e-5. Meant as a test oracle.
Jet2 analytic_scaled_field(const AnalyticShape& shape, const Vec3& x, const ScalingParams& p);

/// Gradient part of analytic_scaled_field.
Vec3 analytic_scaled_gradient(const AnalyticShape& shape, const Vec3& x, const ScalingParams& p);

}  // namespace dudf
