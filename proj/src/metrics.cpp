#include "dudf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dudf {

namespace {

double directed_mean(const std::vector<Vec3>& from, const SpatialIndex& to, int order) {
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t i) {
    const double r = to.nearest(from[i]).distance;
    d[i] = order == 1 ? r : r * r;
  });
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(from.size());
}

std::vector<Vec3> unit_normals(const std::vector<Vec3>& normals, std::size_t& renormalized) {
  std::vector<Vec3> out(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double len = normals[i].norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw std::invalid_argument("normal_consistency: zero or non-finite normal");
    if (std::abs(len - 1.0) > 1e-3) ++renormalized;
    out[i] = normals[i] / len;
  }
  return out;
}

double directed_cosine(const std::vector<Vec3>& from_pos, const std::vector<Vec3>& from_n, const SpatialIndex& to,
                       const std::vector<Vec3>& to_n) {
  std::vector<double> c(from_pos.size());
  parallel_for(from_pos.size(), [&](std::size_t i) {
    c[i] = std::abs(from_n[i].dot(to_n[to.nearest(from_pos[i]).index]));
  });
  double sum = 0.0;
  for (double v : c) sum += v;
  return sum / static_cast<double>(from_pos.size());
}

}  // namespace

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b, int order) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty point set");
  if (order != 1 && order != 2) throw std::invalid_argument("chamfer: order must be 1 or 2");
  const SpatialIndex ia(a), ib(b);
  return 0.5 * (directed_mean(a, ib, order) + directed_mean(b, ia, order));
}

double normal_consistency(const OrientedPointCloud& a, const OrientedPointCloud& b, std::size_t* renormalized) {
  if (a.positions.empty() || b.positions.empty()) throw std::invalid_argument("normal_consistency: empty point set");
  if (a.normals.size() != a.positions.size() || b.normals.size() != b.positions.size())
    throw std::invalid_argument("normal_consistency: every point needs a normal");
  std::size_t fixed = 0;
  const std::vector<Vec3> na = unit_normals(a.normals, fixed), nb = unit_normals(b.normals, fixed);
  if (renormalized) *renormalized = fixed;
  const SpatialIndex ia(a.positions), ib(b.positions);
  const double ab = directed_cosine(a.positions, na, ib, nb);
  const double ba = directed_cosine(b.positions, nb, ia, na);
  return 1.0 - 0.5 * (ab + ba);
}

std::string MetricReport::to_text() const {
  char buf[128];
  std::string out;
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s=%.9g\n", key, v);
    out += buf;
  };
  line("l1cd_x1e3", l1cd_x1e3);
  line("l2cd_x1e3", l2cd_x1e3);
  if (has_nc) line("nc", nc);
  out += "mesh_samples=" + std::to_string(mesh_samples) + "\n";
  out += "reference_points=" + std::to_string(reference_points) + "\n";
  out += "grid_resolution=" + std::to_string(grid_resolution) + "\n";
  out += std::string("failed=") + (failed ? "1" : "0") + "\n";
  if (!message.empty()) out += "message=" + message + "\n";
  return out;
}

MetricReport evaluate_reconstruction(const TriangleMesh& mesh, const OrientedPointCloud& reference,
                                     std::size_t n_samples, std::uint64_t seed) {
  if (reference.positions.empty()) throw std::invalid_argument("evaluate_reconstruction: empty reference cloud");
  MetricReport r;
  r.reference_points = reference.size();
  r.has_nc = reference.normals.size() == reference.positions.size();
  if (mesh.empty()) {
    r.failed = true;
    r.l1cd_x1e3 = r.l2cd_x1e3 = std::numeric_limits<double>::infinity();
    r.nc = 1.0;
    r.message = "empty mesh";
    return r;
  }
  const OrientedPointCloud samples = sample_mesh_surface(mesh, n_samples, seed);
  r.mesh_samples = samples.size();
  r.l1cd_x1e3 = 1e3 * chamfer(samples.positions, reference.positions, 1);
  r.l2cd_x1e3 = 1e3 * chamfer(samples.positions, reference.positions, 2);
  if (r.has_nc)
    r.nc = normal_consistency(samples, reference);
  else
    r.message = "reference has no normals; nc omitted";
  return r;
}

void append_results_row(const std::filesystem::path& path, const std::string& id, double seconds,
                        const MetricReport& report) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open '" + path.string() + "' for appending");
  if (fresh) out << "# id time_s l1cd_x1e3 l2cd_x1e3 nc\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, " %.3f %.6g %.6g %.6g\n", seconds, report.l1cd_x1e3, report.l2cd_x1e3,
                report.has_nc ? report.nc : std::numeric_limits<double>::quiet_NaN());
  out << id << buf;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace dudf
