#include "dudf/reconstruction.hpp"

#include "fields.hpp"
#include "tempdir.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace dudf;
using dudf::testing::PlaneField;
using dudf::testing::random_unit;
using dudf::testing::TempDir;

namespace {

Vec3 corner(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

Vec3 edge_mid(int e) {
  const auto& edges = cube_edges();
  return 0.5 * (corner(edges[e][0]) + corner(edges[e][1]));
}

bool crosses(int config, int e) {
  const auto& edges = cube_edges();
  return ((config >> edges[e][0]) & 1) != ((config >> edges[e][1]) & 1);
}

// Both cube edges lie on one face when their four corners share a fixed
// coordinate.
bool share_face(int e0, int e1) {
  const auto& edges = cube_edges();
  for (int axis = 0; axis < 3; ++axis)
    for (int value = 0; value < 2; ++value) {
      bool all = true;
      for (int c : {edges[e0][0], edges[e0][1], edges[e1][0], edges[e1][1]}) all &= ((c >> axis) & 1) == value;
      if (all) return true;
    }
  return false;
}

struct Result {
  TriangleMesh mesh;
  EdgeStats edges;
};

Result run(const ScalarField& f, const ScalingParams& p, int n, MeshingStats* stats = nullptr,
           RecoveryWarnings* w = nullptr) {
  Result r;
  const ScalarGrid grid = recover_grid_distance(evaluate_grid(f, n), p, w);
  r.mesh = extract_mesh_gradient_mc(grid, {}, stats);
  r.edges = edge_stats(r.mesh);
  return r;
}

// A field whose value is NaN at one lattice vertex.
class PoisonedField final : public ScalarField {
 public:
  void evaluate(std::span<const Vec3> points, JetOrder, std::span<Jet2> out) const override {
    for (std::size_t i = 0; i < points.size(); ++i) {
      out[i] = Jet2{};
      out[i].value = (points[i] - Vec3(-1, -1, -1)).norm() < 1e-12 ? std::nan("") : 1.0;
    }
  }
};

}  // namespace

TEST_SUITE("reconstruction") {
  TEST_CASE("case table uses exactly the crossing edges") {
    CHECK(marching_cubes_case(0).empty());
    CHECK(marching_cubes_case(255).empty());
    for (int config = 1; config < 255; ++config) {
      std::set<int> used;
      for (const auto& tri : marching_cubes_case(config))
        for (int e : tri) used.insert(e);
      for (int e = 0; e < 12; ++e) CHECK(used.count(e) == static_cast<std::size_t>(crosses(config, e)));
    }
    CHECK_THROWS_AS(marching_cubes_case(256), std::out_of_range);
  }

  TEST_CASE("case polygons close along cube faces") {
    for (int config = 1; config < 255; ++config) {
      std::map<std::pair<int, int>, int> directed;
      for (const auto& tri : marching_cubes_case(config))
        for (int k = 0; k < 3; ++k) ++directed[{tri[k], tri[(k + 1) % 3]}];
      for (const auto& [edge, count] : directed) {
        const bool interior = directed.count({edge.second, edge.first}) > 0;
        if (!interior) CHECK(share_face(edge.first, edge.second));
        CHECK(count == 1);
      }
    }
  }

  TEST_CASE("case orientation faces the positive corners") {
    for (int c = 0; c < 8; ++c) {
      for (int config : {1 << c, 255 ^ (1 << c)}) {
        const auto& tris = marching_cubes_case(config);
        REQUIRE(tris.size() == 1);
        const Vec3 a = edge_mid(tris[0][0]), b = edge_mid(tris[0][1]), d = edge_mid(tris[0][2]);
        const Vec3 n = (b - a).cross(d - a);
        const double toward_corner = n.dot(corner(c) - a);
        if (config == (1 << c))
          CHECK(toward_corner > 0.0);
        else
          CHECK(toward_corner < 0.0);
      }
    }
  }

  TEST_CASE("grid sampling") {
    const AnalyticShape sphere = Sphere{};
    const ScalingParams p(100);
    const ScalarGrid g = evaluate_grid(AnalyticField(sphere, p), 8);
    CHECK(g.position(0, 0, 0) == Vec3(-1, -1, -1));
    CHECK(g.position(7, 7, 7).isApprox(Vec3(1, 1, 1)));
    CHECK(g.spacing == doctest::Approx(2.0 / 7));
    for (int k = 0; k < 8; ++k)
      for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) {
          const double d = analytic_udf(sphere, g.position(i, j, k)).distance;
          CHECK(g.values[g.index(i, j, k)] == doctest::Approx(scaled_distance(d, p)).epsilon(1e-14));
        }
    CHECK_THROWS_AS(evaluate_grid(AnalyticField(sphere, p), 7), std::invalid_argument);
    try {
      evaluate_grid(PoisonedField{}, 8);
      FAIL("expected a non-finite error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("(0, 0, 0)") != std::string::npos);
    }
  }

  TEST_CASE("grid and mesh do not depend on the worker count") {
    const AnalyticField f(Torus{}, ScalingParams(100));
    set_thread_count(1);
    const ScalarGrid a = evaluate_grid(f, 40);
    const TriangleMesh ma = extract_mesh_gradient_mc(recover_grid_distance(a, ScalingParams(100)));
    set_thread_count(4);
    const ScalarGrid b = evaluate_grid(f, 40);
    const TriangleMesh mb = extract_mesh_gradient_mc(recover_grid_distance(b, ScalingParams(100)));
    set_thread_count(0);
    CHECK(a.values == b.values);
    CHECK(ma.vertices == mb.vertices);
    CHECK(ma.triangles == mb.triangles);
  }

  TEST_CASE("distance recovery") {
    const ScalingParams p(100);
    ScalarGrid g;
    g.resolution = 1;
    g.values = {0.0, scaled_distance(0.004, p), -1e-5, -0.01, -0.5};
    g.gradients.assign(5, Vec3::UnitX());
    RecoveryWarnings w;
    const ScalarGrid r = recover_grid_distance(g, p, &w);
    CHECK(r.values[0] == 0.0);
    CHECK(r.values[1] == doctest::Approx(std::sqrt(0.004 * std::tanh(0.4) / 100)).epsilon(1e-14));
    // sqrt recovery underestimates at d = 0.004 by about 2.5 percent.
    CHECK(std::abs(r.values[1] - invert_scaled_distance(g.values[1], p)) / 0.004 < 0.026);
    CHECK(r.values[2] == 0.0);
    CHECK(r.values[3] == 0.0);
    CHECK(w.below_tolerance == 2);
    CHECK(w.most_negative == -0.5);
    CHECK(r.gradients == g.gradients);
    RecoveryWarnings quiet;
    recover_grid_distance(ScalarGrid{1, Vec3::Zero(), 1.0, {-1e-5}, {Vec3::Zero()}}, p, &quiet);
    CHECK(quiet.below_tolerance == 0);
  }

  TEST_CASE("plane mesh lies on the plane and is open") {
    const ScalingParams p(100);
    const Result r = run(PlaneField(100), p, 32);
    REQUIRE_FALSE(r.mesh.empty());
    double worst = 0.0;
    for (const Vec3& v : r.mesh.vertices) worst = std::max(worst, std::abs(v.z()));
    CHECK(worst < 1e-3);
    CHECK(r.edges.boundary > 0);
    CHECK(r.edges.non_manifold == 0);
  }

  TEST_CASE("sphere mesh is watertight and accurate") {
    const ScalingParams p(100);
    const int n = 64;
    const Result r = run(AnalyticField(Sphere{}, p), p, n);
    CHECK(r.edges.watertight());
    double err = 0.0;
    for (const Vec3& v : r.mesh.vertices) err += std::abs(v.norm() - 0.5);
    err /= static_cast<double>(r.mesh.vertices.size());
    CHECK(err < 0.5 * 2.0 / (n - 1));
  }

  TEST_CASE("closed shapes close and open shapes stay open") {
    const ScalingParams p(100);
    CHECK(run(AnalyticField(Torus{}, p), p, 128).edges.watertight());
    CHECK(run(AnalyticField(Sphere{}, p), p, 128).edges.watertight());
    const OpenDisk disk{};
    const int n = 64;
    const Result r = run(AnalyticField(disk, p), p, n);
    CHECK(r.edges.boundary > 0);
    const double spacing = 2.0 / (n - 1);
    for (const Vec3& v : r.mesh.vertices) {
      const Vec3 rel = v - disk.center;
      const double radial = (rel - rel.dot(disk.normal) * disk.normal).norm();
      CHECK(radial <= disk.radius + 3 * spacing);
    }
  }

  TEST_CASE("far from any surface nothing is emitted") {
    const ScalingParams p(100);
    MeshingStats stats;
    // sqrt recovery caps far distances near 0.16, so skipping needs cells
    // finer than that.
    run(AnalyticField(Sphere{Vec3(0.8, 0.8, 0.8), 0.1}, p), p, 64, &stats);
    CHECK(stats.cells_skipped > 0);
    CHECK(stats.cells_crossed > 0);
    ScalarGrid far;
    far.resolution = 8;
    far.spacing = 2.0 / 7;
    far.values.assign(512, 5.0);
    far.gradients.assign(512, Vec3::UnitX());
    CHECK(extract_mesh_gradient_mc(far).empty());
    far.gradients.clear();
    CHECK_THROWS_AS(extract_mesh_gradient_mc(far), std::invalid_argument);
  }

  TEST_CASE("single cell invariants over random gradients") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> small(0.0, 0.3);
    int cells_with_output = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      ScalarGrid g;
      g.resolution = 2;
      g.spacing = 1.0;
      g.origin = Vec3::Zero();
      for (int c = 0; c < 8; ++c) {
        g.values.push_back(small(rng));
        g.gradients.push_back(random_unit(rng));
      }
      MeshingStats s;
      extract_mesh_gradient_mc(g, {}, &s);
      std::set<std::array<std::size_t, 2>> crossing(s.vertex_edges.begin(), s.vertex_edges.end());
      cells_with_output += !crossing.empty();
      for (const auto& e : s.vertex_edges) {
        const double da = g.gradients[e[0]].dot(g.gradients[0]);
        const double db = g.gradients[e[1]].dot(g.gradients[0]);
        CHECK((da >= 0.0) != (db >= 0.0));
      }
      ScalarGrid neg = g;
      for (Vec3& v : neg.gradients) v = -v;
      MeshingStats sn;
      extract_mesh_gradient_mc(neg, {}, &sn);
      std::set<std::array<std::size_t, 2>> crossing_neg(sn.vertex_edges.begin(), sn.vertex_edges.end());
      CHECK(crossing == crossing_neg);
    }
    CHECK(cells_with_output > 1000);
  }

  TEST_CASE("vertices lie on edges with opposite pseudo-signs on a real grid") {
    const ScalingParams p(100);
    const int n = 48;
    const ScalarGrid grid = recover_grid_distance(evaluate_grid(AnalyticField(Torus{}, p), n), p);
    MeshingStats s;
    const TriangleMesh m = extract_mesh_gradient_mc(grid, {}, &s);
    REQUIRE(s.vertex_edges.size() == m.vertices.size());
    auto lattice = [n](std::size_t idx) {
      return std::array<int, 3>{static_cast<int>(idx % n), static_cast<int>(idx / n % n), static_cast<int>(idx / (n * n))};
    };
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      const auto [a, b] = s.vertex_edges[v];
      const auto la = lattice(a), lb = lattice(b);
      int axis = 0;
      while (la[axis] == lb[axis]) ++axis;
      REQUIRE(lb[axis] == la[axis] + 1);
      // Some cell sharing the edge must see opposite signs relative to its
      // own corner 0.
      bool opposite = false;
      for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj) {
          std::array<int, 3> c = la;
          c[(axis + 1) % 3] -= di;
          c[(axis + 2) % 3] -= dj;
          if (std::min({c[0], c[1], c[2]}) < 0 || std::max({c[0], c[1], c[2]}) > n - 2) continue;
          const Vec3& g0 = grid.gradients[grid.index(c[0], c[1], c[2])];
          opposite |= (grid.gradients[a].dot(g0) >= 0.0) != (grid.gradients[b].dot(g0) >= 0.0);
        }
      CHECK(opposite);
      const Vec3 pa = grid.position(la[0], la[1], la[2]), pb = grid.position(lb[0], lb[1], lb[2]);
      CHECK(((m.vertices[v] - pa).norm() + (m.vertices[v] - pb).norm()) == doctest::Approx(grid.spacing));
    }
  }

  TEST_CASE("grid dump round trip") {
    TempDir dir;
    const ScalarGrid g = evaluate_grid(AnalyticField(Sphere{}, ScalingParams(100)), 9);
    write_grid_dump(g, dir / "g.bin");
    const ScalarGrid back = read_grid_dump(dir / "g.bin");
    CHECK(back.resolution == 9);
    CHECK(back.origin == g.origin);
    CHECK(back.spacing == g.spacing);
    CHECK(back.values == g.values);
    CHECK(std::filesystem::file_size(dir / "g.bin") > 729 * 8);
    std::filesystem::resize_file(dir / "g.bin", std::filesystem::file_size(dir / "g.bin") - 8);
    CHECK_THROWS_AS(read_grid_dump(dir / "g.bin"), ParseError);
  }
}
