#include "dudf/siren.hpp"

#include "fields.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dudf;
using dudf::testing::random_in_cube;

namespace {

double vec_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-6) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

Eigen::VectorXd jet_vector(const Jet2& j, JetOrder order) {
  Eigen::VectorXd v(jet_channels(order));
  v[0] = j.value;
  if (order != JetOrder::Value) v.segment<3>(1) = j.gradient;
  if (order == JetOrder::Hessian)
    for (int k = 0; k < 6; ++k) v[4 + k] = j.hessian[k];
  return v;
}

// Weighted sum of every jet channel over all points, with its adjoints.
struct LinearProbe {
  std::vector<std::vector<Eigen::VectorXd>> weights;
  JetOrder order;

  double operator()(const std::vector<std::vector<Jet2>>& jets, std::vector<std::vector<JetAdjoint>>& adj) const {
    double total = 0.0;
    for (std::size_t g = 0; g < jets.size(); ++g)
      for (std::size_t i = 0; i < jets[g].size(); ++i) {
        const Eigen::VectorXd& w = weights[g][i];
        total += w.dot(jet_vector(jets[g][i], order));
        adj[g][i].value = w[0];
        if (order != JetOrder::Value) adj[g][i].gradient = w.segment<3>(1);
        if (order == JetOrder::Hessian)
          for (int k = 0; k < 6; ++k) adj[g][i].hessian[k] = w[4 + k];
      }
    return total;
  }

  double value(const SirenNetwork& net, const std::vector<PointGroup>& groups) const {
    double total = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto jets = evaluate_jets(net, groups[g].points, order);
      for (std::size_t i = 0; i < jets.size(); ++i) total += weights[g][i].dot(jet_vector(jets[i], order));
    }
    return total;
  }
};

}  // namespace

TEST_SUITE("siren") {
  TEST_CASE("initialization layout and ranges") {
    const SirenNetwork net = init_siren(3, 16, 30.0, 7);
    REQUIRE(net.layers.size() == 4);
    CHECK(net.hidden_layers() == 3);
    CHECK(net.width() == 16);
    CHECK(net.parameter_count() == (16 * 3 + 16) + 2 * (16 * 16 + 16) + (16 + 1));
    CHECK(net.layers[0].weight.cwiseAbs().maxCoeff() <= 1.0 / 3.0);
    const double bound = std::sqrt(6.0 / 16) / 30.0;
    for (std::size_t l = 1; l < net.layers.size(); ++l) CHECK(net.layers[l].weight.cwiseAbs().maxCoeff() <= bound);
    for (const auto& l : net.layers) CHECK(l.bias.isZero());
    CHECK_NOTHROW(net.check());
    CHECK(flatten_parameters(init_siren(3, 16, 30.0, 7)) == flatten_parameters(net));
    CHECK(flatten_parameters(init_siren(3, 16, 30.0, 8)) != flatten_parameters(net));
    CHECK_THROWS_AS(init_siren(0, 16, 30.0, 0), std::invalid_argument);
  }

  TEST_CASE("flatten and assign round trip") {
    SirenNetwork net = init_siren(2, 8, 30.0, 1);
    std::vector<double> flat = flatten_parameters(net);
    // Weights are row-major, then the bias, layer by layer.
    CHECK(flat[1] == net.layers[0].weight(0, 1));
    CHECK(flat[3] == net.layers[0].weight(1, 0));
    for (double& v : flat) v *= 2.0;
    assign_parameters(net, flat);
    CHECK(flatten_parameters(net) == flat);
    flat.pop_back();
    CHECK_THROWS_AS(assign_parameters(net, flat), std::invalid_argument);
  }

  TEST_CASE("value channel is identical across orders and entry points") {
    const SirenNetwork net = init_siren(3, 32, 30.0, 3);
    std::mt19937_64 rng(3);
    std::vector<Vec3> pts;
    for (int i = 0; i < 300; ++i) pts.push_back(random_in_cube(rng));
    const auto v = evaluate_jets(net, pts, JetOrder::Value);
    const auto g = evaluate_jets(net, pts, JetOrder::Gradient);
    const auto h = evaluate_jets(net, pts, JetOrder::Hessian);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(v[i].value == g[i].value);
      CHECK(v[i].value == h[i].value);
      CHECK((g[i].gradient - h[i].gradient).norm() == 0.0);
      CHECK(forward(net, pts[i]) == forward_jet(net, pts[i]).value);
    }
  }

  TEST_CASE("jets match central differences over random networks") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> layers(1, 4), width(4, 48);
    int failures_g = 0, failures_h = 0, total = 0;
    for (int n = 0; n < 60; ++n) {
      const SirenNetwork net = init_siren(layers(rng), width(rng), 30.0, rng());
      for (int k = 0; k < 20; ++k, ++total) {
        const Vec3 x = random_in_cube(rng);
        const Jet2 jet = forward_jet(net, x);
        const double h = 1e-5;
        Vec3 fd_g;
        Mat3 fd_h;
        for (int a = 0; a < 3; ++a) {
          const Vec3 e = h * Vec3::Unit(a);
          fd_g[a] = (forward(net, x + e) - forward(net, x - e)) / (2 * h);
          fd_h.col(a) = (forward_jet(net, x + e).gradient - forward_jet(net, x - e).gradient) / (2 * h);
        }
        if (vec_rel_error(jet.gradient, fd_g) >= 1e-6) ++failures_g;
        const Mat3 hm = jet.hessian_matrix();
        if ((hm - fd_h).norm() / std::max({hm.norm(), fd_h.norm(), 1e-6}) >= 1e-4) ++failures_h;
      }
    }
    CHECK(total >= 1000);
    CHECK(failures_g == 0);
    CHECK(failures_h == 0);
  }

  TEST_CASE("parameter gradients match finite differences for every order") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> normal;
    for (JetOrder order : {JetOrder::Value, JetOrder::Gradient, JetOrder::Hessian}) {
      SirenNetwork net = init_siren(2, 8, 30.0, 5);
      std::vector<PointGroup> groups(2);
      LinearProbe probe{{}, order};
      probe.weights.resize(2);
      for (int g = 0; g < 2; ++g) {
        groups[g].order = order;
        for (int i = 0; i < 7 + g * 300; ++i) {
          groups[g].points.push_back(random_in_cube(rng));
          Eigen::VectorXd w(jet_channels(order));
          for (int c = 0; c < w.size(); ++c) w[c] = normal(rng);
          probe.weights[g].push_back(w);
        }
      }
      const LossGradient lg = loss_gradients(net, groups, std::cref(probe));
      CHECK(lg.loss == doctest::Approx(probe.value(net, groups)).epsilon(1e-12));
      const std::vector<double> analytic = flatten_gradients(lg.gradients);
      std::vector<double> params = flatten_parameters(net);
      int bad = 0;
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double h = 1e-6, keep = params[k];
        params[k] = keep + h;
        assign_parameters(net, params);
        const double up = probe.value(net, groups);
        params[k] = keep - h;
        assign_parameters(net, params);
        const double down = probe.value(net, groups);
        params[k] = keep;
        assign_parameters(net, params);
        const double fd = (up - down) / (2 * h);
        if (std::abs(fd - analytic[k]) > 1e-4 * std::max(std::abs(fd), 1e-2)) ++bad;
      }
      CHECK(bad == 0);
    }
  }

  TEST_CASE("loss gradients do not depend on the worker count") {
    const SirenNetwork net = init_siren(3, 16, 30.0, 2);
    std::mt19937_64 rng(5);
    std::vector<PointGroup> groups(1);
    groups[0].order = JetOrder::Hessian;
    LinearProbe probe{{{}}, JetOrder::Hessian};
    for (int i = 0; i < 1500; ++i) {
      groups[0].points.push_back(random_in_cube(rng));
      probe.weights[0].push_back(Eigen::VectorXd::Random(10));
    }
    set_thread_count(1);
    const auto a = flatten_gradients(loss_gradients(net, groups, std::cref(probe)).gradients);
    set_thread_count(5);
    const auto b = flatten_gradients(loss_gradients(net, groups, std::cref(probe)).gradients);
    set_thread_count(0);
    CHECK(a == b);
  }

  TEST_CASE("parameter gradient arithmetic") {
    const SirenNetwork net = init_siren(2, 4, 30.0, 0);
    ParameterGradients g = ParameterGradients::zeros_like(net);
    CHECK(g.squared_norm() == 0.0);
    g.layers[0].bias[0] = 3.0;
    g.layers[1].weight(0, 0) = 4.0;
    CHECK(g.squared_norm() == 25.0);
    g *= 2.0;
    ParameterGradients h = g;
    h += g;
    CHECK(h.squared_norm() == doctest::Approx(400.0));
    CHECK(h.all_finite());
    h.layers[2].bias[0] = std::nan("");
    CHECK_FALSE(h.all_finite());
  }
}
