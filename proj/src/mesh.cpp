#include "dudf/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dudf {

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return 0.5 * (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]).norm();
}

Vec3 TriangleMesh::face_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3 n = (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

void TriangleMesh::check() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t)
    for (int idx : triangles[t])
      if (idx < 0 || idx >= n)
        throw std::invalid_argument("triangle " + std::to_string(t) + " references vertex " + std::to_string(idx));
  if (!normals.empty() && normals.size() != vertices.size())
    throw std::invalid_argument("vertex normal count does not match vertex count");
}

EdgeStats edge_stats(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  EdgeStats s;
  s.edges = count.size();
  for (const auto& [edge, c] : count) {
    if (c == 1) ++s.boundary;
    else if (c == 2) ++s.manifold;
    else ++s.non_manifold;
  }
  return s;
}

namespace {

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

int parse_face_index(const std::string& token, int vertex_count, std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw ParseError("bad face index '" + token + "'", line);
  }
  if (idx < 0) idx = vertex_count + idx + 1;  // relative indices
  if (idx < 1 || idx > vertex_count) throw ParseError("face index out of range: " + token, line);
  return idx - 1;
}

}  // namespace

void export_obj(const TriangleMesh& mesh, const std::filesystem::path& path, const VertexCurvature* curvature) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "# dudf mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles\n";
  for (const auto& v : mesh.vertices)
    out << "v " << format_g9(v.x()) << ' ' << format_g9(v.y()) << ' ' << format_g9(v.z()) << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (curvature) {
    for (double h : curvature->mean) out << "# vH " << format_g9(h) << '\n';
    for (double k : curvature->gaussian) out << "# vK " << format_g9(k) << '\n';
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

TriangleMesh import_obj(const std::filesystem::path& path, VertexCurvature* curvature) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("malformed vertex record", line_no);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_face_index(tok, static_cast<int>(mesh.vertices.size()), line_no));
      if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", line_no);
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
    } else if (tag == "#" && curvature) {
      std::string kind;
      double value = 0.0;
      if (ls >> kind >> value) {
        if (kind == "vH") curvature->mean.push_back(value);
        else if (kind == "vK") curvature->gaussian.push_back(value);
      }
    }
  }
  return mesh;
}

}  // namespace dudf
