#include "dudf/field.hpp"

#include <stdexcept>

namespace dudf {

double ScalarField::value(const Vec3& x) const { return jet(x, JetOrder::Value).value; }

Jet2 ScalarField::jet(const Vec3& x, JetOrder order) const {
  Jet2 out;
  evaluate(std::span<const Vec3>(&x, 1), order, std::span<Jet2>(&out, 1));
  return out;
}

std::vector<Jet2> ScalarField::jets(const std::vector<Vec3>& points, JetOrder order) const {
  std::vector<Jet2> out(points.size());
  evaluate(points, order, out);
  return out;
}

void NetworkField::evaluate(std::span<const Vec3> points, JetOrder order, std::span<Jet2> out) const {
  if (points.size() != out.size()) throw std::invalid_argument("NetworkField: size mismatch");
  if (points.size() == 1) {
    Eigen::Matrix3Xd p(3, 1);
    p.col(0) = points[0];
    const Eigen::MatrixXd r = forward_batch(net_, p, order);
    out[0].value = r(0, 0);
    if (r.rows() >= 4) out[0].gradient = r.block<3, 1>(1, 0);
    if (r.rows() == 10)
      for (int k = 0; k < 6; ++k) out[0].hessian[k] = r(4 + k, 0);
    return;
  }
  const std::vector<Jet2> res = evaluate_jets(net_, std::vector<Vec3>(points.begin(), points.end()), order);
  std::copy(res.begin(), res.end(), out.begin());
}

void AnalyticField::evaluate(std::span<const Vec3> points, JetOrder order, std::span<Jet2> out) const {
  if (points.size() != out.size()) throw std::invalid_argument("AnalyticField: size mismatch");
  parallel_for(points.size(), [&](std::size_t i) {
    Jet2 jet;
    switch (order) {
      case JetOrder::Value:
        jet.value = scaled_distance(analytic_udf(shape_, points[i]).distance, params_);
        break;
      case JetOrder::Gradient:
        jet.value = scaled_distance(analytic_udf(shape_, points[i]).distance, params_);
        jet.gradient = analytic_scaled_gradient(shape_, points[i], params_);
        break;
      case JetOrder::Hessian:
        jet = analytic_scaled_field(shape_, points[i], params_);
        break;
    }
    out[i] = jet;
  });
}

}  // namespace dudf
