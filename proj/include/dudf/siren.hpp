#pragma once

#include "dudf/common.hpp"
#include "dudf/jet.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace dudf {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Sine-activated MLP from R^3 to R. Every layer but the last is followed by
/// sin(omega0 * .); the last layer is affine.
struct SirenNetwork {
  std::vector<DenseLayer> layers;
  double omega0 = 30.0;

  /// Number of sine layers.
  int hidden_layers() const { return static_cast<int>(layers.size()) - 1; }
  int width() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.rows()); }
  std::size_t parameter_count() const;

  /// Throws std::invalid_argument unless dims chain from 3 to 1 and all
  /// parameters are finite.
  void check() const;
};

/// Same shapes as the network's parameters.
struct ParameterGradients {
  std::vector<DenseLayer> layers;

  static ParameterGradients zeros_like(const SirenNetwork& net);
  ParameterGradients& operator+=(const ParameterGradients& other);
  ParameterGradients& operator*=(double c);
  double squared_norm() const;
  bool all_finite() const;
};

/// Parameters in checkpoint order: per layer, weights row-major then bias.
std::vector<double> flatten_parameters(const SirenNetwork& net);
void assign_parameters(SirenNetwork& net, const std::vector<double>& flat);
std::vector<double> flatten_gradients(const ParameterGradients& g);

/// First layer U(-1/3, 1/3); later layers U(+-sqrt(6/fan_in)/omega0); zero
/// biases. Deterministic for a fixed seed.
SirenNetwork init_siren(int hidden_layers, int width, double omega0, std::uint64_t seed);

/// Record of one batched forward pass, consumed by backward_batch.
struct JetTape {
  JetOrder order = JetOrder::Value;
  Eigen::Index batch = 0;
  std::vector<Eigen::MatrixXd> inputs;  // input of each affine layer, n_in x (C*B)
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each sine layer, n x (C*B)
  std::vector<Eigen::ArrayXXd> sine;    // sin(omega z) per sine layer, n x B
  std::vector<Eigen::ArrayXXd> cosine;  // cos(omega z) per sine layer, n x B
};

/// Evaluates the jets of `points` (3 x B). Returns a C x B matrix with rows
/// value, gradient x/y/z, Hessian xx, xy, xz, yy, yz, zz (truncated to the
/// order). Records intermediates into `tape` when given.
Eigen::MatrixXd forward_batch(const SirenNetwork& net, const Eigen::Matrix3Xd& points, JetOrder order,
                              JetTape* tape = nullptr);

/// Accumulates into `grads` the parameter gradient of sum(adjoint .* output),
/// where `adjoint` has the same C x B layout as forward_batch's result.
void backward_batch(const SirenNetwork& net, const JetTape& tape, const Eigen::MatrixXd& adjoint,
                    ParameterGradients& grads);

double forward(const SirenNetwork& net, const Vec3& x);
Jet2 forward_jet(const SirenNetwork& net, const Vec3& x);

struct PointGroup {
  std::vector<Vec3> points;
  JetOrder order = JetOrder::Value;
};

/// d(loss)/d(jet) for one point. Off-diagonal Hessian slots take the
/// derivative with respect to the shared unique entry.
struct JetAdjoint {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  SymmetricEntries hessian{};
};

/// A scalar loss over per-group jets. Must fill `adjoints` (pre-sized and
/// zeroed) and return the loss value.
using JetLoss = std::function<double(const std::vector<std::vector<Jet2>>& jets,
                                     std::vector<std::vector<JetAdjoint>>& adjoints)>;

struct LossGradient {
  double loss = 0.0;
  ParameterGradients gradients;
  std::vector<std::vector<Jet2>> jets;  // jets seen by the loss
};

/// Reverse accumulation of a jet-dependent loss. Points are processed in
/// fixed-size blocks whose partial gradients are summed in block order, so
/// the result does not depend on the worker count.
LossGradient loss_gradients(const SirenNetwork& net, const std::vector<PointGroup>& groups,
                            const JetLoss& loss);

/// Evaluates jets for many points in parallel blocks.
std::vector<Jet2> evaluate_jets(const SirenNetwork& net, const std::vector<Vec3>& points, JetOrder order);

}  // namespace dudf
