#include "dudf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dudf {

void OrientedPointCloud::check() const {
  if (positions.empty()) throw std::invalid_argument("point cloud is empty");
  if (normals.size() != positions.size()) throw std::invalid_argument("point cloud has mismatched normal count");
  for (std::size_t i = 0; i < normals.size(); ++i)
    if (std::abs(normals[i].norm() - 1.0) > 1e-6)
      throw std::invalid_argument("normal " + std::to_string(i) + " is not unit length");
}

namespace {

Vec3 unit_normal(const Vec3& n, std::size_t line) {
  const double len = n.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw ParseError("zero or non-finite normal", line);
  return n / len;
}

OrientedPointCloud load_xyz(std::istream& in, bool require_normals) {
  OrientedPointCloud cloud;
  bool missing_normals = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("malformed number '" + tok + "'", line_no);
      }
    }
    if (values.empty()) continue;
    if (values.size() == 3 && require_normals) throw ParseError("point without normal", line_no);
    if (values.size() != 6 && values.size() != 3)
      throw ParseError("expected 6 values (x y z nx ny nz), got " + std::to_string(values.size()), line_no);
    cloud.positions.emplace_back(values[0], values[1], values[2]);
    if (values.size() == 6) cloud.normals.push_back(unit_normal(Vec3(values[3], values[4], values[5]), line_no));
    else missing_normals = true;
  }
  if (missing_normals) cloud.normals.clear();
  return cloud;
}

OrientedPointCloud load_obj(std::istream& in, bool require_normals) {
  OrientedPointCloud cloud;
  std::vector<std::size_t> normal_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v" || tag == "vn") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("malformed '" + tag + "' record", line_no);
      if (tag == "v") {
        cloud.positions.push_back(v);
      } else {
        cloud.normals.push_back(unit_normal(v, line_no));
      }
    }
  }
  if (cloud.normals.size() != cloud.positions.size() && !require_normals) {
    cloud.normals.clear();
    return cloud;
  }
  if (cloud.normals.size() != cloud.positions.size())
    throw ParseError("OBJ has " + std::to_string(cloud.positions.size()) + " 'v' records but " +
                     std::to_string(cloud.normals.size()) + " 'vn' records; every point needs a normal");
  return cloud;
}

OrientedPointCloud load_ply(std::istream& in, bool require_normals) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", line_no);

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
    bool has_list = false;
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (true) {
    if (!next_line()) throw ParseError("PLY header is not terminated by 'end_header'", line_no);
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end_header") break;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw ParseError("only ASCII PLY is supported (got '" + fmt + "')", line_no);
      ascii = true;
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw ParseError("malformed element record", line_no);
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_no);
      std::string type, name;
      ls >> type;
      if (type == "list") {
        elements.back().has_list = true;
        std::string t1, t2;
        ls >> t1 >> t2 >> name;
      } else {
        ls >> name;
      }
      elements.back().properties.push_back(name);
    }
  }
  if (!ascii) throw ParseError("PLY header lacks a format record");

  OrientedPointCloud cloud;
  bool found_vertex = false;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t k = 0; k < e.count; ++k)
        if (!next_line()) throw ParseError("PLY body ends inside element '" + e.name + "'", line_no);
      continue;
    }
    found_vertex = true;
    static const char* kNames[6] = {"x", "y", "z", "nx", "ny", "nz"};
    int column[6];
    bool with_normals = true;
    for (int k = 0; k < 6; ++k) {
      auto it = std::find(e.properties.begin(), e.properties.end(), kNames[k]);
      if (it == e.properties.end()) {
        if (k >= 3 && !require_normals) {
          with_normals = false;
          column[k] = 0;
          continue;
        }
        throw ParseError(std::string("PLY vertex element lacks property '") + kNames[k] + "'");
      }
      column[k] = static_cast<int>(it - e.properties.begin());
    }
    for (std::size_t k = 0; k < e.count; ++k) {
      if (!next_line()) throw ParseError("PLY body has fewer vertices than declared", line_no);
      std::istringstream ls(line);
      std::vector<double> vals;
      double v;
      while (ls >> v) vals.push_back(v);
      if (vals.size() < e.properties.size()) {
        std::string missing;
        for (int c = 0; c < 6; ++c)
          if (column[c] >= static_cast<int>(vals.size())) missing += (missing.empty() ? "" : ", ") + std::string(kNames[c]);
        throw ParseError("vertex record has " + std::to_string(vals.size()) + " values for " +
                             std::to_string(e.properties.size()) + " properties; missing property " + missing,
                         line_no);
      }
      cloud.positions.emplace_back(vals[column[0]], vals[column[1]], vals[column[2]]);
      if (with_normals)
        cloud.normals.push_back(unit_normal(Vec3(vals[column[3]], vals[column[4]], vals[column[5]]), line_no));
    }
  }
  if (!found_vertex) throw ParseError("PLY has no vertex element");
  return cloud;
}

}  // namespace

OrientedPointCloud load_cloud(const std::filesystem::path& path, CloudFormat format, bool require_normals) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  if (format == CloudFormat::Auto) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    format = ext == ".obj" ? CloudFormat::Obj : ext == ".ply" ? CloudFormat::Ply : CloudFormat::Xyz;
  }
  OrientedPointCloud cloud;
  switch (format) {
    case CloudFormat::Obj: cloud = load_obj(in, require_normals); break;
    case CloudFormat::Ply: cloud = load_ply(in, require_normals); break;
    default: cloud = load_xyz(in, require_normals); break;
  }
  if (cloud.positions.empty()) throw ParseError("'" + path.string() + "' contains no points");
  return cloud;
}

void save_cloud_xyz(const OrientedPointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  char buf[256];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Vec3& n = cloud.normals[i];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.x(), p.y(), p.z(), n.x(), n.y(), n.z());
    out << buf;
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

NormalizedCloud normalize_to_cube(const OrientedPointCloud& cloud, double margin) {
  if (cloud.positions.empty()) throw std::invalid_argument("normalize_to_cube: empty cloud");
  if (!(margin >= 0.0 && margin < 1.0)) throw std::invalid_argument("normalize_to_cube: margin must be in [0, 1)");
  Vec3 lo = cloud.positions.front(), hi = lo;
  for (const Vec3& p : cloud.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double longest = (hi - lo).maxCoeff();
  if (!(longest > 0.0)) throw std::invalid_argument("normalize_to_cube: degenerate cloud (all points identical)");

  NormalizedCloud out;
  out.to_cube.scale = 2.0 * (1.0 - margin) / longest;
  out.to_cube.translation = -out.to_cube.scale * 0.5 * (lo + hi);
  out.cloud.normals = cloud.normals;
  out.cloud.positions.reserve(cloud.size());
  for (const Vec3& p : cloud.positions) out.cloud.positions.push_back(out.to_cube.apply(p));
  return out;
}

SpatialIndex::SpatialIndex(std::vector<Vec3> points, std::vector<Vec3> normals)
    : points_(std::move(points)), normals_(std::move(normals)) {
  if (points_.empty()) throw std::invalid_argument("SpatialIndex: empty point set");
  if (!normals_.empty() && normals_.size() != points_.size())
    throw std::invalid_argument("SpatialIndex: normal count does not match point count");
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / 8 + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{-1, 0.0, begin, end, -1, -1});
  if (end - begin <= 8) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void SpatialIndex::search(std::int32_t node_id, const Vec3& q, std::size_t& best, double& best_d2) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t first = diff < 0.0 ? node.left : node.right;
  const std::int32_t second = diff < 0.0 ? node.right : node.left;
  search(first, q, best, best_d2);
  if (diff * diff <= best_d2) search(second, q, best, best_d2);
}

SpatialIndex::Neighbor SpatialIndex::nearest(const Vec3& q) const {
  std::size_t best = points_.size();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, q, best, best_d2);
  return {best, std::sqrt(best_d2)};
}

ApproxUdf approx_udf(const SpatialIndex& index, const Vec3& x) {
  const auto nn = index.nearest(x);
  ApproxUdf out;
  out.distance = nn.distance;
  out.point = index.points()[nn.index];
  if (!index.normals().empty()) out.normal = index.normals()[nn.index];
  return out;
}

TrainingBatch sample_batch(const OrientedPointCloud& cloud, const SpatialIndex& index, std::size_t n_total,
                           double sigma, std::uint64_t seed) {
  if (n_total == 0 || n_total % 3 != 0)
    throw std::invalid_argument("sample_batch: n_total must be a positive multiple of 3, got " + std::to_string(n_total));
  if (cloud.positions.empty()) throw std::invalid_argument("sample_batch: empty cloud");
  const std::size_t n = n_total / 3;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  std::normal_distribution<double> displacement(0.0, sigma);
  std::uniform_real_distribution<double> cube(-1.0, 1.0);
  auto inside = [](const Vec3& p) { return p.cwiseAbs().maxCoeff() <= 1.0; };

  TrainingBatch batch;
  batch.surface.reserve(n);
  batch.near.reserve(n);
  batch.far.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    batch.surface.push_back({cloud.positions[k], 0.0, cloud.normals[k]});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& parent = batch.surface[i].position;
    const Vec3& normal = *batch.surface[i].normal;
    Vec3 p = parent;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const Vec3 candidate = parent + displacement(rng) * normal;
      if (inside(candidate)) {
        p = candidate;
        break;
      }
    }
    batch.near.push_back({p, (p - parent).norm(), std::nullopt});
  }
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p;
    p << cube(rng), cube(rng), cube(rng);
    batch.far.push_back({p, index.nearest(p).distance, std::nullopt});
  }
  return batch;
}

OrientedPointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  mesh.check();
  if (mesh.triangles.empty()) throw std::invalid_argument("sample_mesh_surface: mesh has no triangles");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cdf[t] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_mesh_surface: mesh has zero area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  OrientedPointCloud out;
  out.positions.reserve(n);
  out.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = uni(rng) * total;
    std::size_t t = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    t = std::min(t, cdf.size() - 1);
    while (mesh.triangle_area(t) == 0.0) t = (t + 1) % cdf.size();
    const double su = std::sqrt(uni(rng));
    const double v = uni(rng);
    const auto& tri = mesh.triangles[t];
    out.positions.push_back((1.0 - su) * mesh.vertices[tri[0]] + su * (1.0 - v) * mesh.vertices[tri[1]] +
                            su * v * mesh.vertices[tri[2]]);
    out.normals.push_back(mesh.face_normal(t));
  }
  return out;
}

namespace {

void orthonormal_frame(const Vec3& n, Vec3& e1, Vec3& e2) {
  e1 = n.cross(std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).normalized();
  e2 = n.cross(e1);
}

}  // namespace

OrientedPointCloud sample_shape_surface(const AnalyticShape& shape, std::size_t n, std::uint64_t seed) {
  validate(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  OrientedPointCloud out;
  out.positions.reserve(n);
  out.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto* s = std::get_if<Sphere>(&shape)) {
      Vec3 dir;
      do {
        dir << gauss(rng), gauss(rng), gauss(rng);
      } while (dir.norm() < 1e-12);
      dir.normalize();
      out.positions.push_back(s->center + s->radius * dir);
      out.normals.push_back(dir);
    } else if (const auto* t = std::get_if<Torus>(&shape)) {
      Vec3 e1, e2;
      orthonormal_frame(t->axis, e1, e2);
      double theta = 0.0;
      const double bound = t->major_radius + t->minor_radius;
      do {
        theta = two_pi * uni(rng);
      } while (uni(rng) * bound > t->major_radius + t->minor_radius * std::cos(theta));
      const double psi = two_pi * uni(rng);
      const Vec3 radial = std::cos(psi) * e1 + std::sin(psi) * e2;
      const Vec3 normal = std::cos(theta) * radial + std::sin(theta) * t->axis;
      out.positions.push_back(t->center + t->major_radius * radial + t->minor_radius * normal);
      out.normals.push_back(normal);
    } else {
      const auto& d = std::get<OpenDisk>(shape);
      Vec3 e1, e2;
      orthonormal_frame(d.normal, e1, e2);
      const double rho = d.radius * std::sqrt(uni(rng));
      const double ang = two_pi * uni(rng);
      out.positions.push_back(d.center + rho * (std::cos(ang) * e1 + std::sin(ang) * e2));
      out.normals.push_back(d.normal);
    }
  }
  return out;
}

}  // namespace dudf
