#include "dudf/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<dudf::Vec3> to_points(const Points& m) {
  std::vector<dudf::Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Points from_points(const std::vector<dudf::Vec3>& pts) {
  Points m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

py::dict mesh_dict(const dudf::TriangleMesh& mesh) {
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> tris(static_cast<Eigen::Index>(mesh.triangles.size()), 3);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) tris(static_cast<Eigen::Index>(t), k) = mesh.triangles[t][k];
  py::dict d;
  d["vertices"] = from_points(mesh.vertices);
  d["triangles"] = tris;
  return d;
}

dudf::OrientedPointCloud to_cloud(const Points& positions, const Points& normals) {
  dudf::OrientedPointCloud c;
  c.positions = to_points(positions);
  c.normals = to_points(normals);
  return c;
}

py::dict report_dict(const dudf::MetricReport& r) {
  py::dict d;
  d["l1cd_x1e3"] = r.l1cd_x1e3;
  d["l2cd_x1e3"] = r.l2cd_x1e3;
  if (r.has_nc) d["nc"] = r.nc;
  d["mesh_samples"] = r.mesh_samples;
  d["reference_points"] = r.reference_points;
  d["grid_resolution"] = r.grid_resolution;
  d["failed"] = r.failed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural unsigned distance fields with hyperbolic scaling";

  m.def("set_thread_count", &dudf::set_thread_count, py::arg("n"));

  m.def("scaled_distance", [](double d, double alpha) { return dudf::scaled_distance(d, dudf::ScalingParams(alpha)); },
        py::arg("d"), py::arg("alpha") = 100.0);
  m.def("phi", [](double d, double alpha) { return dudf::phi(d, dudf::ScalingParams(alpha)); }, py::arg("d"),
        py::arg("alpha") = 100.0);
  m.def("invert_scaled_distance",
        [](double t, double alpha) { return dudf::invert_scaled_distance(t, dudf::ScalingParams(alpha)); },
        py::arg("t"), py::arg("alpha") = 100.0);
  m.def(
      "analytic_udf",
      [](const std::string& shape, const Points& x) {
        const dudf::AnalyticShape s = dudf::parse_shape(shape);
        Eigen::VectorXd d(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) d[i] = dudf::analytic_udf(s, x.row(i).transpose()).distance;
        return d;
      },
      py::arg("shape"), py::arg("points"));
  m.def(
      "sample_shape",
      [](const std::string& shape, std::size_t n, std::uint64_t seed) {
        const auto c = dudf::sample_shape_surface(dudf::parse_shape(shape), n, seed);
        return py::make_tuple(from_points(c.positions), from_points(c.normals));
      },
      py::arg("shape"), py::arg("n"), py::arg("seed") = 0);

  py::class_<dudf::SirenNetwork>(m, "Network")
      .def(py::init([](int hidden_layers, int width, double omega0, std::uint64_t seed) {
             return dudf::init_siren(hidden_layers, width, omega0, seed);
           }),
           py::arg("hidden_layers") = 4, py::arg("width") = 64, py::arg("omega0") = 30.0, py::arg("seed") = 0)
      .def_property_readonly("hidden_layers", &dudf::SirenNetwork::hidden_layers)
      .def_property_readonly("width", &dudf::SirenNetwork::width)
      .def_property_readonly("parameter_count", &dudf::SirenNetwork::parameter_count)
      .def(
          "values",
          [](const dudf::SirenNetwork& net, const Points& x) {
            const auto jets = dudf::evaluate_jets(net, to_points(x), dudf::JetOrder::Value);
            Eigen::VectorXd v(static_cast<Eigen::Index>(jets.size()));
            for (std::size_t i = 0; i < jets.size(); ++i) v[static_cast<Eigen::Index>(i)] = jets[i].value;
            return v;
          },
          py::arg("points"))
      .def(
          "gradients",
          [](const dudf::SirenNetwork& net, const Points& x) {
            const auto jets = dudf::evaluate_jets(net, to_points(x), dudf::JetOrder::Gradient);
            std::vector<dudf::Vec3> g;
            for (const auto& j : jets) g.push_back(j.gradient);
            return from_points(g);
          },
          py::arg("points"))
      .def(
          "hessian",
          [](const dudf::SirenNetwork& net, const Eigen::Vector3d& x) { return dudf::forward_jet(net, x).hessian_matrix(); },
          py::arg("point"));

  m.def(
      "save_checkpoint",
      [](const dudf::SirenNetwork& net, const std::filesystem::path& path, double alpha, std::uint64_t seed) {
        dudf::save_checkpoint({net, dudf::ScalingParams(alpha), seed}, path);
      },
      py::arg("network"), py::arg("path"), py::arg("alpha") = 100.0, py::arg("seed") = 0);
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        const auto ck = dudf::load_checkpoint(path);
        return py::make_tuple(ck.network, ck.alpha.alpha(), ck.seed);
      },
      py::arg("path"));

  m.def(
      "train",
      [](const std::string& config_text) {
        const dudf::RunConfig config = dudf::parse_run_config(config_text);
        const auto input = dudf::prepare_input(config);
        dudf::TrainResult r;
        {
          py::gil_scoped_release release;
          r = dudf::train(input.training.cloud, config.train);
        }
        std::vector<double> losses;
        for (const auto& rec : r.log) losses.push_back(rec.loss.total);
        return py::make_tuple(r.network, losses);
      },
      py::arg("config_text"), "Trains from configuration text; returns (network, per-iteration total loss).");

  m.def(
      "reconstruct",
      [](const dudf::SirenNetwork& net, double alpha, int resolution) {
        dudf::Reconstruction r;
        {
          py::gil_scoped_release release;
          r = dudf::reconstruct(dudf::NetworkField(net), dudf::ScalingParams(alpha), resolution);
        }
        py::dict d = mesh_dict(r.mesh);
        d["boundary_edges"] = r.edges.boundary;
        d["watertight"] = r.edges.watertight();
        return d;
      },
      py::arg("network"), py::arg("alpha") = 100.0, py::arg("resolution") = 128);
  m.def(
      "reconstruct_shape",
      [](const std::string& shape, double alpha, int resolution) {
        const dudf::AnalyticField field(dudf::parse_shape(shape), dudf::ScalingParams(alpha));
        const auto r = dudf::reconstruct(field, dudf::ScalingParams(alpha), resolution);
        py::dict d = mesh_dict(r.mesh);
        d["boundary_edges"] = r.edges.boundary;
        d["watertight"] = r.edges.watertight();
        return d;
      },
      py::arg("shape"), py::arg("alpha") = 100.0, py::arg("resolution") = 64);

  m.def(
      "render_shape",
      [](const std::string& shape, double alpha, int width, int height, const Eigen::Vector3d& position) {
        const dudf::AnalyticField field(dudf::parse_shape(shape), dudf::ScalingParams(alpha));
        dudf::Camera cam;
        cam.width = width;
        cam.height = height;
        cam.position = position;
        const dudf::Image img = dudf::render(field, dudf::ScalingParams(alpha), cam, dudf::RenderSettings{});
        py::array_t<std::uint8_t> out({height, width, 3});
        auto a = out.mutable_unchecked<3>();
        for (int y = 0; y < height; ++y)
          for (int x = 0; x < width; ++x)
            for (int k = 0; k < 3; ++k) a(y, x, k) = dudf::to_byte(img.at(x, y)[k]);
        return out;
      },
      py::arg("shape"), py::arg("alpha") = 100.0, py::arg("width") = 64, py::arg("height") = 64,
      py::arg("position") = Eigen::Vector3d(0.0, 0.0, 3.0));

  m.def(
      "chamfer", [](const Points& a, const Points& b, int order) { return dudf::chamfer(to_points(a), to_points(b), order); },
      py::arg("a"), py::arg("b"), py::arg("order") = 1);
  m.def(
      "normal_consistency",
      [](const Points& pa, const Points& na, const Points& pb, const Points& nb) {
        return dudf::normal_consistency(to_cloud(pa, na), to_cloud(pb, nb));
      },
      py::arg("positions_a"), py::arg("normals_a"), py::arg("positions_b"), py::arg("normals_b"));
  m.def(
      "evaluate_mesh",
      [](const Points& vertices, const Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>& triangles,
         const Points& ref_positions, const Points& ref_normals, std::size_t samples, std::uint64_t seed) {
        dudf::TriangleMesh mesh;
        mesh.vertices = to_points(vertices);
        for (Eigen::Index t = 0; t < triangles.rows(); ++t)
          mesh.triangles.push_back({triangles(t, 0), triangles(t, 1), triangles(t, 2)});
        mesh.check();
        return report_dict(dudf::evaluate_reconstruction(mesh, to_cloud(ref_positions, ref_normals), samples, seed));
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("reference_positions"), py::arg("reference_normals"),
      py::arg("samples") = 100000, py::arg("seed") = 0);
}
