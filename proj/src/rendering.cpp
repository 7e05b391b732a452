#include "dudf/rendering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dudf {

void Camera::check() const {
  if (!position.allFinite() || !look_at.allFinite() || !up.allFinite())
    throw std::invalid_argument("camera vectors must be finite");
  const Vec3 forward = look_at - position;
  if (forward.norm() < 1e-12) throw std::invalid_argument("camera position and look_at coincide");
  if (forward.normalized().cross(up).norm() < 1e-9 * std::max(1.0, up.norm()))
    throw std::invalid_argument("camera up vector is parallel to the view direction");
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) throw std::invalid_argument("camera fov must lie in (0, 180)");
  if (width < 1 || height < 1) throw std::invalid_argument("camera resolution must be positive");
}

Vec3 Camera::ray_direction(int x, int y) const {
  const Vec3 forward = (look_at - position).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 true_up = right.cross(forward);
  const double tan_half = std::tan(0.5 * fov_degrees * std::numbers::pi / 180.0);
  const double aspect = static_cast<double>(width) / height;
  const double px = (2.0 * (x + 0.5) / width - 1.0) * tan_half * aspect;
  const double py = (1.0 - 2.0 * (y + 0.5) / height) * tan_half;
  return (forward + px * right + py * true_up).normalized();
}

void RenderSettings::check() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("surface epsilon must be positive");
  if (!(safety > 0.0 && safety <= 1.0)) throw std::invalid_argument("step safety factor must lie in (0, 1]");
  if (refine_iterations < 0) throw std::invalid_argument("refine_iterations must be nonnegative");
}

namespace {

// Parametric interval of the ray inside [-1, 1]^3, empty when first > second.
std::pair<double, double> cube_interval(const Vec3& o, const Vec3& d) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < -1.0 || o[a] > 1.0) return {1.0, 0.0};
      continue;
    }
    double ta = (-1.0 - o[a]) / d[a], tb = (1.0 - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return {t0, t1};
}

struct RayState {
  double s = 0.0, s_end = 0.0;
  bool active = false;
};

std::vector<RayHit> trace_impl(const ScalarField& field, const ScalingParams& p, const std::vector<Vec3>& origins,
                               const std::vector<Vec3>& directions, const RenderSettings& settings,
                               std::vector<TraceStep>* log) {
  settings.check();
  if (origins.size() != directions.size()) throw std::invalid_argument("trace_rays: size mismatch");
  const std::size_t n = origins.size();
  std::vector<RayHit> hits(n);
  std::vector<RayState> state(n);
  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < n; ++r) {
    const auto [t0, t1] = cube_interval(origins[r], directions[r]);
    if (t0 > t1) continue;
    state[r] = {t0, t1, true};
    active.push_back(r);
  }

  std::vector<Vec3> pts;
  std::vector<Jet2> jets;
  while (!active.empty()) {
    pts.resize(active.size());
    jets.resize(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t r = active[k];
      pts[k] = origins[r] + state[r].s * directions[r];
    }
    field.evaluate(pts, JetOrder::Value, jets);
    std::vector<std::size_t> still;
    still.reserve(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t r = active[k];
      const double f = jets[k].value;
      RayHit& hit = hits[r];
      if (f < settings.epsilon) {
        hit.hit = true;
        hit.point = pts[k];
        hit.value = f;
        continue;
      }
      if (!std::isfinite(f) || hit.steps >= settings.max_steps) continue;
      const double step = std::max(f, std::sqrt(f / p.alpha())) * settings.safety;
      if (log) log->push_back({pts[k], step});
      state[r].s += step;
      ++hit.steps;
      if (state[r].s > state[r].s_end) continue;
      still.push_back(r);
    }
    active.swap(still);
  }

  if (settings.refine_iterations == 0) return hits;
  std::vector<std::size_t> hit_rays;
  for (std::size_t r = 0; r < n; ++r)
    if (hits[r].hit && hits[r].value >= 0.0) hit_rays.push_back(r);
  for (int it = 0; it < settings.refine_iterations && !hit_rays.empty(); ++it) {
    pts.resize(hit_rays.size());
    for (std::size_t k = 0; k < hit_rays.size(); ++k) pts[k] = hits[hit_rays[k]].point;
    jets.resize(pts.size());
    field.evaluate(pts, JetOrder::Hessian, jets);
    std::vector<Vec3> candidates(pts.size());
    for (std::size_t k = 0; k < hit_rays.size(); ++k) {
      const Vec3& d = directions[hit_rays[k]];
      const double g = d.dot(jets[k].gradient);
      const double curv = d.dot(jets[k].hessian_matrix() * d);
      double delta = 0.0;
      if (curv > 0.0 && std::isfinite(g)) {
        // Near the surface f ~ alpha (c s)^2 along the ray, with c the cosine
        // to the normal and curv ~ 2 alpha c^2, so the zero lies about
        // sqrt(f / alpha) / c away; allow twice that, with c floored at 0.01.
        const double c = std::max(std::sqrt(curv / (2.0 * p.alpha())), 0.01);
        const double limit = 2.0 * std::sqrt(std::max(jets[k].value, 0.0) / p.alpha()) / c;
        delta = std::clamp(-g / curv, -limit, limit);
      }
      candidates[k] = pts[k] + delta * d;
    }
    field.evaluate(candidates, JetOrder::Value, jets);
    for (std::size_t k = 0; k < hit_rays.size(); ++k) {
      RayHit& hit = hits[hit_rays[k]];
      if (jets[k].value >= 0.0 && jets[k].value < hit.value) {
        hit.point = candidates[k];
        hit.value = jets[k].value;
      }
    }
  }
  return hits;
}

}  // namespace

RayHit sphere_trace(const ScalarField& field, const ScalingParams& p, const Vec3& origin, const Vec3& direction,
                    const RenderSettings& settings, std::vector<TraceStep>* steps_out) {
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw std::invalid_argument("ray direction must be unit length");
  if (steps_out) steps_out->clear();
  return trace_impl(field, p, {origin}, {direction}, settings, steps_out)[0];
}

std::vector<RayHit> trace_rays(const ScalarField& field, const ScalingParams& p, const std::vector<Vec3>& origins,
                               const std::vector<Vec3>& directions, const RenderSettings& settings) {
  return trace_impl(field, p, origins, directions, settings, nullptr);
}

SurfaceNormal surface_normal(const Jet2& jet, const Vec3& view_direction) {
  SurfaceNormal out;
  const EigenDecomp3 eig = symmetric_eig3(jet.hessian);
  Vec3 n;
  if (!eig.degenerate) {
    n = eig.principal();
  } else if (jet.gradient.norm() > 1e-6) {
    n = jet.gradient.normalized();
    out.fallback = true;
  } else {
    return out;
  }
  if (n.dot(view_direction) > 0.0) n = -n;
  out.normal = n;
  out.valid = true;
  return out;
}

SurfaceNormal surface_normal(const ScalarField& field, const Vec3& point, const Vec3& view_direction) {
  return surface_normal(field.jet(point, JetOrder::Hessian), view_direction);
}

Vec3 shade_linear(const Vec3& point, const Vec3& normal, const Vec3& to_viewer, const std::vector<PointLight>& lights,
                  const Material& material) {
  Vec3 c = material.ambient;
  for (const auto& light : lights) {
    const Vec3 l = (light.position - point).normalized();
    const double nl = normal.dot(l);
    if (nl <= 0.0) continue;
    const Vec3 h = (l + to_viewer).normalized();
    const double spec = std::pow(std::max(normal.dot(h), 0.0), material.shininess);
    c += light.intensity * (nl * material.diffuse + spec * material.specular);
  }
  return c;
}

Vec3 shade_blinn_phong(const Vec3& point, const Vec3& normal, const Vec3& to_viewer,
                       const std::vector<PointLight>& lights, const Material& material) {
  const Vec3 lin = shade_linear(point, normal, to_viewer, lights, material);
  Vec3 out;
  for (int k = 0; k < 3; ++k) out[k] = std::clamp(std::pow(std::max(lin[k], 0.0), 1.0 / 2.2), 0.0, 1.0);
  return out;
}

Image render(const ScalarField& field, const ScalingParams& p, const Camera& camera, const RenderSettings& settings,
             RenderReport* report) {
  camera.check();
  settings.check();
  const std::size_t count = static_cast<std::size_t>(camera.width) * camera.height;
  std::vector<Vec3> origins(count, camera.position), dirs(count);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) dirs[static_cast<std::size_t>(y) * camera.width + x] = camera.ray_direction(x, y);

  const std::vector<RayHit> hits = trace_rays(field, p, origins, dirs, settings);

  Image image;
  image.width = camera.width;
  image.height = camera.height;
  image.pixels.assign(count, settings.background);

  std::vector<std::size_t> hit_pixels;
  std::vector<Vec3> hit_points;
  RenderReport rep;
  rep.pixels = count;
  double steps = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    steps += hits[i].steps;
    if (!hits[i].hit) continue;
    hit_pixels.push_back(i);
    hit_points.push_back(hits[i].point);
  }
  rep.hits = hit_pixels.size();
  rep.mean_steps = count ? steps / static_cast<double>(count) : 0.0;

  std::vector<Jet2> jets(hit_points.size());
  field.evaluate(hit_points, JetOrder::Hessian, jets);
  for (std::size_t k = 0; k < hit_pixels.size(); ++k) {
    const std::size_t i = hit_pixels[k];
    const SurfaceNormal sn = surface_normal(jets[k], dirs[i]);
    if (!sn.valid) {
      ++rep.invalid_normals;
      image.pixels[i] = settings.invalid_color;
      continue;
    }
    if (sn.fallback) ++rep.fallback_normals;
    image.pixels[i] = shade_blinn_phong(hit_points[k], sn.normal, -dirs[i], settings.lights, settings.material);
  }
  if (report) *report = rep;
  return image;
}

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

void write_image(const Image& image, const std::filesystem::path& path) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw std::invalid_argument("image dimensions do not match its pixel buffer");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> bytes;
  bytes.reserve(image.pixels.size() * 3);
  for (const Vec3& px : image.pixels)
    for (int k = 0; k < 3; ++k) bytes.push_back(static_cast<char>(to_byte(px[k])));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w < 1 || h < 1 || maxval != 255) throw ParseError("not a P6 image with maxval 255");
  in.get();
  Image img;
  img.width = w;
  img.height = h;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw ParseError("image payload is truncated");
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = Vec3(bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]) / 255.0;
  return img;
}

double gaussian_from_jacobian(const Mat3& jacobian, const Vec3& normal) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = jacobian;
  m.block<3, 1>(0, 3) = normal;
  m.block<1, 3>(3, 0) = normal.transpose();
  return -m.determinant();
}

std::vector<CurvatureSample> surface_curvature(const ScalarField& field, const std::vector<Vec3>& points, double h,
                                               const Vec3* orientation) {
  if (!(h > 0.0)) throw std::invalid_argument("curvature step must be positive");
  const std::size_t n = points.size();
  std::vector<Vec3> stencil;
  stencil.reserve(7 * n);
  for (const Vec3& s : points) {
    stencil.push_back(s);
    for (int a = 0; a < 3; ++a) {
      stencil.push_back(s + h * Vec3::Unit(a));
      stencil.push_back(s - h * Vec3::Unit(a));
    }
  }
  std::vector<Jet2> jets(stencil.size());
  field.evaluate(stencil, JetOrder::Hessian, jets);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<CurvatureSample> out(n);
  parallel_for(n, [&](std::size_t i) {
    CurvatureSample& c = out[i];
    c.mean = c.gaussian = nan;
    const EigenDecomp3 center = symmetric_eig3(jets[7 * i].hessian);
    if (center.degenerate) return;
    Vec3 n0 = center.principal();
    if (orientation && n0.dot(*orientation) < 0.0) n0 = -n0;
    Mat3 jac;
    for (int a = 0; a < 3; ++a) {
      Vec3 side[2];
      for (int k = 0; k < 2; ++k) {
        const EigenDecomp3 e = symmetric_eig3(jets[7 * i + 1 + 2 * a + k].hessian);
        if (e.degenerate) return;
        side[k] = e.principal();
        if (side[k].dot(n0) < 0.0) side[k] = -side[k];
      }
      jac.col(a) = (side[0] - side[1]) / (2.0 * h);
    }
    const double mean = 0.5 * jac.trace();
    c.mean = orientation ? mean : std::abs(mean);
    c.gaussian = gaussian_from_jacobian(jac, n0);
    c.valid = true;
  });
  return out;
}

double mean_curvature(const ScalarField& field, const Vec3& point, double h, const Vec3* orientation) {
  return surface_curvature(field, {point}, h, orientation)[0].mean;
}

double gaussian_curvature(const ScalarField& field, const Vec3& point, double h) {
  return surface_curvature(field, {point}, h)[0].gaussian;
}

}  // namespace dudf
