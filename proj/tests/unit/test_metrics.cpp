#include "dudf/metrics.hpp"

#include "fields.hpp"
#include "tempdir.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

using namespace dudf;
using dudf::testing::random_unit;
using dudf::testing::read_bytes;
using dudf::testing::TempDir;

namespace {

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b, int order) {
  auto one_way = [order](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double sum = 0.0;
    for (const Vec3& x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& y : to) best = std::min(best, (x - y).norm());
      sum += order == 1 ? best : best * best;
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(dudf::testing::random_in_cube(rng));
  return out;
}

OrientedPointCloud sphere_cloud(double r, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OrientedPointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 u = random_unit(rng);
    c.positions.push_back(r * u);
    c.normals.push_back(u);
  }
  return c;
}

// Icosahedron subdivided `levels` times, projected to the sphere of radius r.
TriangleMesh icosphere(int levels, double r) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      m.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
      return mid[key] = static_cast<int>(m.vertices.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& f : m.triangles) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  for (Vec3& v : m.vertices) v = r * v.normalized();
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("chamfer examples") {
    const std::vector<Vec3> origin{Vec3::Zero()}, up{Vec3(0, 0, 1)};
    CHECK(chamfer(origin, up, 1) == 1.0);
    CHECK(chamfer(origin, up, 2) == 1.0);
    const std::vector<Vec3> pair{Vec3::Zero(), Vec3(0, 0, 2)};
    CHECK(chamfer(pair, up, 1) == 1.0);
    CHECK(chamfer(pair, up, 2) == 1.0);
    CHECK(chamfer(pair, pair, 1) == 0.0);
    CHECK_THROWS_AS(chamfer({}, up, 1), std::invalid_argument);
    CHECK_THROWS_AS(chamfer(origin, up, 3), std::invalid_argument);
  }

  TEST_CASE("chamfer matches brute force, is symmetric and scales") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
      const auto a = random_points(rng, 300 + 50 * trial), b = random_points(rng, 200);
      for (int order : {1, 2}) {
        CHECK(chamfer(a, b, order) == doctest::Approx(brute_chamfer(a, b, order)).epsilon(1e-12));
        CHECK(chamfer(a, b, order) == chamfer(b, a, order));
      }
      const double c = 2.5;
      std::vector<Vec3> sa, sb;
      for (const Vec3& v : a) sa.push_back(c * v);
      for (const Vec3& v : b) sb.push_back(c * v);
      CHECK(chamfer(sa, sb, 1) == doctest::Approx(c * chamfer(a, b, 1)).epsilon(1e-12));
      CHECK(chamfer(sa, sb, 2) == doctest::Approx(c * c * chamfer(a, b, 2)).epsilon(1e-12));
    }
  }

  TEST_CASE("normal consistency examples") {
    const OrientedPointCloud a = sphere_cloud(0.5, 500, 2);
    CHECK(normal_consistency(a, a) == doctest::Approx(0.0).epsilon(1e-15));
    OrientedPointCloud flipped = a;
    for (Vec3& n : flipped.normals) n = -n;
    CHECK(normal_consistency(a, flipped) == doctest::Approx(0.0).epsilon(1e-15));
    OrientedPointCloud ortho = a;
    for (std::size_t i = 0; i < a.size(); ++i) ortho.normals[i] = a.normals[i].unitOrthogonal();
    CHECK(normal_consistency(a, ortho) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("normal consistency range, flip invariance and renormalization") {
    const OrientedPointCloud a = sphere_cloud(0.5, 400, 3);
    OrientedPointCloud b = sphere_cloud(0.5, 300, 4);
    std::mt19937_64 rng(5);
    for (Vec3& n : b.normals) n = random_unit(rng);
    const double nc = normal_consistency(a, b);
    CHECK(nc >= 0.0);
    CHECK(nc <= 1.0);
    OrientedPointCloud bf = b;
    for (Vec3& n : bf.normals) n = -n;
    CHECK(normal_consistency(a, bf) == doctest::Approx(nc).epsilon(1e-14));
    CHECK(normal_consistency(b, a) == doctest::Approx(nc).epsilon(1e-14));

    OrientedPointCloud scaled = b;
    scaled.normals[0] *= 1.5;
    scaled.normals[1] *= 1.0 + 1e-4;
    std::size_t renormalized = 0;
    CHECK(normal_consistency(a, scaled, &renormalized) == doctest::Approx(nc).epsilon(1e-6));
    CHECK(renormalized == 1);
  }

  TEST_CASE("self comparison is near zero") {
    const TriangleMesh m = icosphere(4, 0.5);
    const OrientedPointCloud ref = sample_mesh_surface(m, 20000, 7);
    const MetricReport r = evaluate_reconstruction(m, ref, 20000, 8);
    CHECK_FALSE(r.failed);
    CHECK(r.mesh_samples == 20000);
    CHECK(r.reference_points == 20000);
    // Mean spacing of 2e4 points on area pi is about 0.0125.
    CHECK(r.l1cd_x1e3 < 8.0);
    CHECK(r.nc < 1e-3);
  }

  TEST_CASE("a radial offset of 0.01 gives L1CD x 1e3 near 10") {
    const TriangleMesh m = icosphere(5, 0.5);
    const OrientedPointCloud ref = sphere_cloud(0.51, 200000, 9);
    const MetricReport r = evaluate_reconstruction(m, ref, 200000, 10);
    CHECK(r.l1cd_x1e3 == doctest::Approx(10.0).epsilon(0.05));
    CHECK(r.l2cd_x1e3 == doctest::Approx(0.1).epsilon(0.1));
    CHECK(r.nc < 1e-3);
  }

  TEST_CASE("evaluation is deterministic and handles degenerate input") {
    const TriangleMesh m = icosphere(2, 0.5);
    const OrientedPointCloud ref = sphere_cloud(0.5, 2000, 11);
    const MetricReport a = evaluate_reconstruction(m, ref, 3000, 12);
    const MetricReport b = evaluate_reconstruction(m, ref, 3000, 12);
    CHECK(a.to_text() == b.to_text());

    const MetricReport empty = evaluate_reconstruction(TriangleMesh{}, ref, 3000, 12);
    CHECK(empty.failed);
    CHECK(std::isinf(empty.l1cd_x1e3));
    CHECK(empty.nc == 1.0);

    OrientedPointCloud bare = ref;
    bare.normals.clear();
    const MetricReport no_nc = evaluate_reconstruction(m, bare, 3000, 12);
    CHECK_FALSE(no_nc.has_nc);
    CHECK(no_nc.to_text().find("nc=") == std::string::npos);
    CHECK_THROWS_AS(evaluate_reconstruction(m, OrientedPointCloud{}, 10, 0), std::invalid_argument);
  }

  TEST_CASE("results table") {
    TempDir dir;
    MetricReport r;
    r.l1cd_x1e3 = 1.5;
    r.l2cd_x1e3 = 0.25;
    r.nc = 0.02;
    append_results_row(dir / "t.txt", "run_a", 12.3456, r);
    append_results_row(dir / "t.txt", "run_b", 1.0, r);
    CHECK(read_bytes(dir / "t.txt") ==
          "# id time_s l1cd_x1e3 l2cd_x1e3 nc\nrun_a 12.346 1.5 0.25 0.02\nrun_b 1.000 1.5 0.25 0.02\n");
    const std::string text = r.to_text();
    CHECK(text.find("l1cd_x1e3=1.5\n") != std::string::npos);
    CHECK(text.find("failed=0\n") != std::string::npos);
  }
}
