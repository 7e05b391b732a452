#include "dudf/reconstruction.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace dudf {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr std::array<std::array<int, 2>, 12> kEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

// Corners of each face, counter-clockwise seen from outside the cube.
constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6},
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e)
    if ((kEdges[e][0] == a && kEdges[e][1] == b) || (kEdges[e][0] == b && kEdges[e][1] == a)) return e;
  return -1;
}

Vec3 corner_offset(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

Vec3 edge_midpoint(int e) { return 0.5 * (corner_offset(kEdges[e][0]) + corner_offset(kEdges[e][1])); }

// Traces the crossing polygon(s) of a configuration. On every face each run
// of positive corners contributes one segment from the edge where the run
// starts to the edge where it ends, so diagonal positive corners on a face
// stay separated. Segments chain into closed cycles that are fanned.
std::vector<std::array<int, 3>> triangulate_case(int config, bool flip) {
  std::array<int, 12> next;
  next.fill(-1);
  for (const auto& face : kFaces) {
    auto positive = [&](int k) { return (config >> face[k & 3]) & 1; };
    for (int k = 0; k < 4; ++k) {
      if (positive(k) || !positive(k + 1)) continue;
      const int enter = edge_between(face[k], face[(k + 1) & 3]);
      int m = k + 1;
      while (positive(m + 1)) ++m;
      next[enter] = edge_between(face[m & 3], face[(m + 1) & 3]);
    }
  }
  std::vector<std::array<int, 3>> tris;
  std::array<bool, 12> seen{};
  for (int start = 0; start < 12; ++start) {
    if (next[start] < 0 || seen[start]) continue;
    std::vector<int> cycle;
    for (int e = start; !seen[e]; e = next[e]) {
      seen[e] = true;
      cycle.push_back(e);
    }
    for (std::size_t k = 1; k + 1 < cycle.size(); ++k) {
      if (flip)
        tris.push_back({cycle[0], cycle[k + 1], cycle[k]});
      else
        tris.push_back({cycle[0], cycle[k], cycle[k + 1]});
    }
  }
  return tris;
}

std::vector<std::vector<std::array<int, 3>>> build_table() {
  // Orientation check on the single-corner case: the normal must face
  // corner 0.
  const auto probe = triangulate_case(1, false);
  const Vec3 a = edge_midpoint(probe[0][0]), b = edge_midpoint(probe[0][1]), c = edge_midpoint(probe[0][2]);
  const bool flip = (b - a).cross(c - a).dot(corner_offset(0) - a) < 0.0;
  std::vector<std::vector<std::array<int, 3>>> table(256);
  for (int config = 0; config < 256; ++config) table[config] = triangulate_case(config, flip);
  return table;
}

}  // namespace

const std::vector<std::array<int, 3>>& marching_cubes_case(int config) {
  static const auto table = build_table();
  if (config < 0 || config > 255) throw std::out_of_range("marching cubes configuration out of range");
  return table[config];
}

const std::array<std::array<int, 2>, 12>& cube_edges() { return kEdges; }

ScalarGrid evaluate_grid(const ScalarField& field, int resolution) {
  if (resolution < 8) throw std::invalid_argument("grid resolution must be at least 8");
  ScalarGrid grid;
  grid.resolution = resolution;
  grid.origin = Vec3::Constant(-1.0);
  grid.spacing = 2.0 / (resolution - 1);
  const std::size_t n = static_cast<std::size_t>(resolution);
  grid.values.resize(n * n * n);
  grid.gradients.resize(n * n * n);

  std::vector<Vec3> points(n * n);
  std::vector<Jet2> jets(n * n);
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) points[i + n * j] = grid.position(i, j, k);
    field.evaluate(points, JetOrder::Gradient, jets);
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const Jet2& jet = jets[i + n * j];
        if (!std::isfinite(jet.value) || !jet.gradient.allFinite())
          throw Error("non-finite field value at lattice (" + std::to_string(i) + ", " + std::to_string(j) + ", " +
                      std::to_string(k) + ")");
        const std::size_t idx = grid.index(i, j, k);
        grid.values[idx] = jet.value;
        grid.gradients[idx] = jet.gradient;
      }
  }
  return grid;
}

ScalarGrid recover_grid_distance(const ScalarGrid& grid, const ScalingParams& p, RecoveryWarnings* warnings,
                                 double negative_tolerance) {
  ScalarGrid out = grid;
  RecoveryWarnings w;
  for (double& v : out.values) {
    if (v < -negative_tolerance) {
      ++w.below_tolerance;
      w.most_negative = std::min(w.most_negative, v);
    }
    v = std::sqrt(std::max(v, 0.0) / p.alpha());
  }
  if (warnings) *warnings = w;
  return out;
}

namespace {

struct CellVertex {
  std::size_t key;  // lower lattice index * 3 + axis
  Vec3 position;
  std::size_t a, b;
};

struct SlabOutput {
  std::vector<std::array<CellVertex, 3>> triangles;
  std::size_t skipped = 0, crossed = 0, dropped = 0;
};

}  // namespace

TriangleMesh extract_mesh_gradient_mc(const ScalarGrid& grid, const MeshingOptions& options, MeshingStats* stats) {
  const int n = grid.resolution;
  if (n < 2 || grid.values.size() != static_cast<std::size_t>(n) * n * n)
    throw std::invalid_argument("grid values do not match its resolution");
  if (grid.gradients.size() != grid.values.size()) throw std::invalid_argument("grid carries no gradients");

  const double diagonal = std::sqrt(3.0) * grid.spacing;
  const double max_distance = options.drop_factor * grid.spacing;
  std::array<std::size_t, 8> corner_stride;
  for (int c = 0; c < 8; ++c) corner_stride[c] = grid.index(c & 1, (c >> 1) & 1, (c >> 2) & 1);

  std::vector<SlabOutput> slabs(static_cast<std::size_t>(n - 1));
  parallel_for(slabs.size(), [&](std::size_t slab) {
    SlabOutput& out = slabs[slab];
    const int k = static_cast<int>(slab);
    for (int j = 0; j + 1 < n; ++j)
      for (int i = 0; i + 1 < n; ++i) {
        const std::size_t base = grid.index(i, j, k);
        std::array<std::size_t, 8> idx;
        double min_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < 8; ++c) {
          idx[c] = base + corner_stride[c];
          min_d = std::min(min_d, grid.values[idx[c]]);
        }
        if (min_d > diagonal) {
          ++out.skipped;
          continue;
        }
        int config = 1;
        const Vec3& g0 = grid.gradients[idx[0]];
        for (int c = 1; c < 8; ++c)
          if (grid.gradients[idx[c]].dot(g0) >= 0.0) config |= 1 << c;
        if (config == 255) continue;
        ++out.crossed;

        for (const auto& tri : marching_cubes_case(config)) {
          std::array<CellVertex, 3> verts;
          bool keep = true;
          for (int v = 0; v < 3; ++v) {
            const int e = tri[v];
            std::size_t a = idx[kEdges[e][0]], b = idx[kEdges[e][1]];
            if (a > b) std::swap(a, b);
            const double va = grid.values[a] + options.value_floor;
            const double vb = grid.values[b] + options.value_floor;
            const double t = std::abs(va) / (std::abs(va) + std::abs(vb));
            const double d = (1.0 - t) * grid.values[a] + t * grid.values[b];
            if (d > max_distance) keep = false;
            const int axis = e / 4;
            const std::size_t ai = a % n, aj = (a / n) % n, ak = a / (static_cast<std::size_t>(n) * n);
            Vec3 pos = grid.position(static_cast<int>(ai), static_cast<int>(aj), static_cast<int>(ak));
            pos[axis] += t * grid.spacing;
            verts[v] = {a * 3 + static_cast<std::size_t>(axis), pos, a, b};
          }
          const double area2 = (verts[1].position - verts[0].position).cross(verts[2].position - verts[0].position).norm();
          if (!keep || 0.5 * area2 <= 1e-12) {
            ++out.dropped;
            continue;
          }
          out.triangles.push_back(verts);
        }
      }
  });

  TriangleMesh mesh;
  MeshingStats st;
  std::unordered_map<std::size_t, int> welded;
  for (const SlabOutput& slab : slabs) {
    st.cells_skipped += slab.skipped;
    st.cells_crossed += slab.crossed;
    st.triangles_dropped += slab.dropped;
    for (const auto& tri : slab.triangles) {
      std::array<int, 3> ids;
      for (int v = 0; v < 3; ++v) {
        auto [it, inserted] = welded.try_emplace(tri[v].key, static_cast<int>(mesh.vertices.size()));
        if (inserted) {
          mesh.vertices.push_back(tri[v].position);
          st.vertex_edges.push_back({tri[v].a, tri[v].b});
        }
        ids[v] = it->second;
      }
      mesh.triangles.push_back(ids);
    }
  }
  if (stats) *stats = std::move(st);
  return mesh;
}

void write_grid_dump(const ScalarGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  char header[256];
  std::snprintf(header, sizeof header, "%d %.17g %.17g %.17g %.17g\n", grid.resolution, grid.origin.x(),
                grid.origin.y(), grid.origin.z(), grid.spacing);
  out << header;
  out.write(reinterpret_cast<const char*>(grid.values.data()),
            static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

ScalarGrid read_grid_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  ScalarGrid grid;
  double ox, oy, oz;
  if (!(hs >> grid.resolution >> ox >> oy >> oz >> grid.spacing) || grid.resolution < 1)
    throw ParseError("bad grid dump header", 1);
  grid.origin = Vec3(ox, oy, oz);
  const std::size_t n = static_cast<std::size_t>(grid.resolution);
  grid.values.resize(n * n * n);
  in.read(reinterpret_cast<char*>(grid.values.data()), static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != grid.values.size() * sizeof(double))
    throw ParseError("grid dump is truncated");
  return grid;
}

}  // namespace dudf
