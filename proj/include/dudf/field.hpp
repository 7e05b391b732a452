#pragma once

#include "dudf/field_math.hpp"
#include "dudf/siren.hpp"

#include <span>
#include <vector>

namespace dudf {

/// A scaled unsigned distance field that can be sampled with jets. Grid
/// evaluation, sphere tracing and curvature work against this interface so
/// the analytic oracles and trained networks share one code path.
class ScalarField {
 public:
  virtual ~ScalarField() = default;

  virtual void evaluate(std::span<const Vec3> points, JetOrder order, std::span<Jet2> out) const = 0;

  double value(const Vec3& x) const;
  Jet2 jet(const Vec3& x, JetOrder order = JetOrder::Hessian) const;
  std::vector<Jet2> jets(const std::vector<Vec3>& points, JetOrder order) const;
};

class NetworkField final : public ScalarField {
 public:
  explicit NetworkField(const SirenNetwork& net) : net_(net) {}
  void evaluate(std::span<const Vec3> points, JetOrder order, std::span<Jet2> out) const override;
  const SirenNetwork& network() const { return net_; }

 private:
  const SirenNetwork& net_;
};

/// t_S of an analytic shape; see analytic_scaled_field.
class AnalyticField final : public ScalarField {
 public:
  AnalyticField(AnalyticShape shape, ScalingParams params) : shape_(std::move(shape)), params_(params) {}
  void evaluate(std::span<const Vec3> points, JetOrder order, std::span<Jet2> out) const override;
  const AnalyticShape& shape() const { return shape_; }

 private:
  AnalyticShape shape_;
  ScalingParams params_;
};

}  // namespace dudf
