#include "dudf/field_math.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dudf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_distance(double d, const char* what) {
  if (!std::isfinite(d) || d < 0.0)
    throw std::invalid_argument(std::string(what) + ": expected a finite nonnegative value, got " +
                                std::to_string(d));
}

// Any unit vector orthogonal to n.
Vec3 orthogonal_unit(const Vec3& n) {
  Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(a).normalized();
}

void require_unit(const Vec3& v, const char* what) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + " must be unit length");
}

}  // namespace

ScalingParams::ScalingParams(double alpha) : alpha_(alpha) {
  if (!std::isfinite(alpha) || alpha <= 0.0)
    throw std::invalid_argument("alpha must be finite and positive");
}

double scaled_distance(double d, const ScalingParams& p) {
  require_distance(d, "scaled_distance");
  return d * std::tanh(p.alpha() * d);
}

double phi(double d, const ScalingParams& p) {
  require_distance(d, "phi");
  const double u = p.alpha() * d;
  const double th = std::tanh(u);
  return th + u * (1.0 - th * th);
}

double recover_distance_sqrt(double t, const ScalingParams& p) {
  require_distance(t, "recover_distance_sqrt");
  return std::sqrt(t / p.alpha());
}

double invert_scaled_distance(double t, const ScalingParams& p) {
  require_distance(t, "invert_scaled_distance");
  if (t == 0.0) return 0.0;

  // d*tanh(alpha d) <= min(d, alpha d^2), so the root is at least this.
  double lo = std::max(t, std::sqrt(t / p.alpha()));
  double hi = lo;
  while (hi * std::tanh(p.alpha() * hi) < t) {
    lo = hi;
    hi *= 2.0;
  }
  double d = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double r = d * std::tanh(p.alpha() * d) - t;
    if (std::abs(r) <= 4.0 * std::numeric_limits<double>::epsilon() * t) break;
    if (r > 0.0)
      hi = d;
    else
      lo = d;
    const double slope = phi(d, p);
    double next = slope > 0.0 ? d - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == d || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      d = next;
      break;
    }
    d = next;
  }
  return d;
}

void validate(const AnalyticShape& shape) {
  std::visit(overloaded{
                 [](const Sphere& s) {
                   if (!(s.radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
                   if (s.center.cwiseAbs().maxCoeff() + s.radius > 1.0)
                     throw std::invalid_argument("sphere does not fit in the domain cube");
                 },
                 [](const Torus& t) {
                   if (!(t.major_radius > 0.0) || !(t.minor_radius > 0.0))
                     throw std::invalid_argument("torus radii must be positive");
                   require_unit(t.axis, "torus axis");
                   if (t.center.cwiseAbs().maxCoeff() + t.major_radius + t.minor_radius > 1.0)
                     throw std::invalid_argument("torus does not fit in the domain cube");
                 },
                 [](const OpenDisk& d) {
                   if (!(d.radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
                   require_unit(d.normal, "disk normal");
                   if (d.center.cwiseAbs().maxCoeff() + d.radius > 1.0)
                     throw std::invalid_argument("disk does not fit in the domain cube");
                 },
             },
             shape);
}

std::string shape_name(const AnalyticShape& shape) {
  return std::visit(overloaded{
                        [](const Sphere&) { return std::string("sphere"); },
                        [](const Torus&) { return std::string("torus"); },
                        [](const OpenDisk&) { return std::string("disk"); },
                    },
                    shape);
}

AnalyticShape parse_shape(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  Vec3 center = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double r = -1.0, big_r = -1.0;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError("shape parameter without '=': " + token);
    const std::string key = token.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(token.substr(eq + 1));
    } catch (const std::exception&) {
      throw ParseError("shape parameter '" + key + "' is not a number");
    }
    if (key == "cx") center.x() = value;
    else if (key == "cy") center.y() = value;
    else if (key == "cz") center.z() = value;
    else if (key == "r") r = value;
    else if (key == "R") big_r = value;
    else if (key == "ax" || key == "nx") direction.x() = value;
    else if (key == "ay" || key == "ny") direction.y() = value;
    else if (key == "az" || key == "nz") direction.z() = value;
    else throw ParseError("unknown shape parameter '" + key + "'");
  }
  if (direction.norm() == 0.0) throw ParseError("shape direction must be nonzero");
  direction.normalize();

  AnalyticShape shape;
  if (kind == "sphere") {
    shape = Sphere{center, r > 0 ? r : 0.5};
  } else if (kind == "torus") {
    shape = Torus{center, big_r > 0 ? big_r : 0.5, r > 0 ? r : 0.2, direction};
  } else if (kind == "disk" || kind == "open_disk") {
    shape = OpenDisk{center, r > 0 ? r : 0.5, direction};
  } else {
    throw ParseError("unknown analytic shape '" + kind + "'");
  }
  validate(shape);
  return shape;
}

UdfSample analytic_udf(const AnalyticShape& shape, const Vec3& x) {
  return std::visit(
      overloaded{
          [&](const Sphere& s) {
            const Vec3 rel = x - s.center;
            const double rho = rel.norm();
            const Vec3 dir = rho > 0.0 ? Vec3(rel / rho) : Vec3(Vec3::UnitZ());
            return UdfSample{std::abs(rho - s.radius), dir, s.center + s.radius * dir};
          },
          [&](const Torus& t) {
            const Vec3 rel = x - t.center;
            const double h = rel.dot(t.axis);
            const Vec3 radial = rel - h * t.axis;
            const double rho = radial.norm();
            const Vec3 rdir = rho > 0.0 ? Vec3(radial / rho) : orthogonal_unit(t.axis);
            const Vec3 core = t.center + t.major_radius * rdir;
            const Vec3 off = x - core;
            const double q = off.norm();
            const Vec3 dir = q > 0.0 ? Vec3(off / q) : rdir;
            return UdfSample{std::abs(q - t.minor_radius), dir, core + t.minor_radius * dir};
          },
          [&](const OpenDisk& d) {
            const Vec3 rel = x - d.center;
            const double h = rel.dot(d.normal);
            const Vec3 radial = rel - h * d.normal;
            const double rho = radial.norm();
            if (rho <= d.radius) return UdfSample{std::abs(h), d.normal, x - h * d.normal};
            const Vec3 rim = d.center + d.radius * (radial / rho);
            return UdfSample{(x - rim).norm(), d.normal, rim};
          },
      },
      shape);
}

double medial_distance(const AnalyticShape& shape, const Vec3& x) {
  return std::visit(
      overloaded{
          [&](const Sphere& s) { return (x - s.center).norm(); },
          [&](const Torus& t) {
            const Vec3 rel = x - t.center;
            const double h = rel.dot(t.axis);
            const double rho = (rel - h * t.axis).norm();
            const double to_core = std::hypot(rho - t.major_radius, h);
            return std::min(to_core, rho);
          },
          [&](const OpenDisk& d) {
            const Vec3 rel = x - d.center;
            const double h = rel.dot(d.normal);
            const double rho = (rel - h * d.normal).norm();
            return std::hypot(rho - d.radius, h);
          },
      },
      shape);
}

Vec3 analytic_scaled_gradient(const AnalyticShape& shape, const Vec3& x, const ScalingParams& p) {
  const UdfSample s = analytic_udf(shape, x);
  if (s.distance == 0.0) return Vec3::Zero();
  const Vec3 grad_d = (x - s.closest) / s.distance;
  return grad_d * phi(s.distance, p);
}

Jet2 analytic_scaled_field(const AnalyticShape& shape, const Vec3& x, const ScalingParams& p) {
  constexpr double h = 1e-5;
  Jet2 jet;
  jet.value = scaled_distance(analytic_udf(shape, x).distance, p);
  jet.gradient = analytic_scaled_gradient(shape, x, p);
  Mat3 hess;
  for (int j = 0; j < 3; ++j) {
    Vec3 step = Vec3::Zero();
    step[j] = h;
    hess.col(j) = (analytic_scaled_gradient(shape, x + step, p) -
                   analytic_scaled_gradient(shape, x - step, p)) / (2.0 * h);
  }
  jet.hessian = to_entries(hess);
  return jet;
}

}  // namespace dudf
