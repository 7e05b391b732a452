#include "dudf/siren.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dudf {

namespace {

constexpr Eigen::Index kBlockSize = 256;

Eigen::Matrix3Xd to_matrix(const std::vector<Vec3>& points, std::size_t begin, std::size_t end) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) m.col(static_cast<Eigen::Index>(i - begin)) = points[i];
  return m;
}

Jet2 jet_from_column(const Eigen::MatrixXd& out, Eigen::Index s) {
  Jet2 jet;
  jet.value = out(0, s);
  if (out.rows() >= 4) jet.gradient = out.block<3, 1>(1, s);
  if (out.rows() == 10)
    for (int p = 0; p < 6; ++p) jet.hessian[p] = out(4 + p, s);
  return jet;
}

}  // namespace

std::size_t SirenNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void SirenNetwork::check() const {
  if (layers.size() < 2) throw std::invalid_argument("network needs at least one sine layer");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw std::invalid_argument("omega0 must be positive");
  Eigen::Index in = 3;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.cols() != in || layer.bias.size() != layer.weight.rows() || layer.weight.rows() < 1)
      throw std::invalid_argument("layer " + std::to_string(l) + " dimensions do not chain");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw std::invalid_argument("layer " + std::to_string(l) + " has non-finite parameters");
    in = layer.weight.rows();
  }
  if (in != 1) throw std::invalid_argument("network output must be scalar");
}

ParameterGradients ParameterGradients::zeros_like(const SirenNetwork& net) {
  ParameterGradients g;
  g.layers.reserve(net.layers.size());
  for (const auto& l : net.layers)
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

ParameterGradients& ParameterGradients::operator+=(const ParameterGradients& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

ParameterGradients& ParameterGradients::operator*=(double c) {
  for (auto& l : layers) {
    l.weight *= c;
    l.bias *= c;
  }
  return *this;
}

double ParameterGradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

bool ParameterGradients::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

namespace {

template <class Layers>
std::vector<double> flatten_layers(const Layers& layers) {
  std::vector<double> flat;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat.push_back(l.bias(r));
  }
  return flat;
}

}  // namespace

std::vector<double> flatten_parameters(const SirenNetwork& net) { return flatten_layers(net.layers); }

std::vector<double> flatten_gradients(const ParameterGradients& g) { return flatten_layers(g.layers); }

void assign_parameters(SirenNetwork& net, const std::vector<double>& flat) {
  if (flat.size() != net.parameter_count())
    throw std::invalid_argument("parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                                std::to_string(net.parameter_count()));
  std::size_t k = 0;
  for (auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat[k++];
  }
}

SirenNetwork init_siren(int hidden_layers, int width, double omega0, std::uint64_t seed) {
  if (hidden_layers < 1 || width < 1) throw std::invalid_argument("init_siren: sizes must be positive");
  if (!(omega0 > 0.0)) throw std::invalid_argument("init_siren: omega0 must be positive");

  std::mt19937_64 rng(seed);
  SirenNetwork net;
  net.omega0 = omega0;
  auto make_layer = [&](int out, int in, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    return layer;
  };

  net.layers.push_back(make_layer(width, 3, 1.0 / 3.0));
  const double hidden_bound = std::sqrt(6.0 / width) / omega0;
  for (int l = 1; l < hidden_layers; ++l) net.layers.push_back(make_layer(width, width, hidden_bound));
  net.layers.push_back(make_layer(1, width, hidden_bound));
  return net;
}

// Channel c of a batch of B points occupies columns [c*B, (c+1)*B). Channels
// are value, three gradient components, then the six unique Hessian entries.
Eigen::MatrixXd forward_batch(const SirenNetwork& net, const Eigen::Matrix3Xd& points, JetOrder order,
                              JetTape* tape) {
  const int channels = jet_channels(order);
  const Eigen::Index B = points.cols();
  const double w = net.omega0;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, channels * B);
  a.leftCols(B) = points;
  if (channels > 1)
    for (int i = 0; i < 3; ++i) a.block(i, (1 + i) * B, 1, B).setOnes();

  if (tape) {
    tape->order = order;
    tape->batch = B;
    tape->inputs.clear();
    tape->pre.clear();
    tape->sine.clear();
    tape->cosine.clear();
  }

  const std::size_t L = net.layers.size();
  for (std::size_t l = 0;; ++l) {
    const DenseLayer& layer = net.layers[l];
    const Eigen::Index n = layer.weight.rows();
    Eigen::MatrixXd z(n, channels * B);
    z.leftCols(B).noalias() = layer.weight * a.leftCols(B);
    z.leftCols(B).colwise() += layer.bias;
    if (channels > 1) z.rightCols((channels - 1) * B).noalias() = layer.weight * a.rightCols((channels - 1) * B);
    if (tape) tape->inputs.push_back(std::move(a));

    if (l + 1 == L) {
      Eigen::MatrixXd out(channels, B);
      for (int c = 0; c < channels; ++c) out.row(c) = z.block(0, c * B, 1, B);
      return out;
    }

    Eigen::ArrayXXd s = (w * z.leftCols(B).array()).sin();
    Eigen::ArrayXXd co = (w * z.leftCols(B).array()).cos();
    Eigen::MatrixXd next(n, channels * B);
    next.leftCols(B) = s.matrix();
    if (channels > 1) {
      const Eigen::ArrayXXd wc = w * co;
      for (int i = 0; i < 3; ++i)
        next.block(0, (1 + i) * B, n, B) = (wc * z.block(0, (1 + i) * B, n, B).array()).matrix();
      if (channels == 10) {
        const Eigen::ArrayXXd ws2 = (w * w) * s;
        for (int p = 0; p < 6; ++p) {
          const auto [i, j] = kSymmetricPairs[p];
          next.block(0, (4 + p) * B, n, B) =
              (wc * z.block(0, (4 + p) * B, n, B).array() -
               ws2 * z.block(0, (1 + i) * B, n, B).array() * z.block(0, (1 + j) * B, n, B).array())
                  .matrix();
        }
      }
    }
    if (tape) {
      tape->pre.push_back(std::move(z));
      tape->sine.push_back(std::move(s));
      tape->cosine.push_back(std::move(co));
    }
    a = std::move(next);
  }
}

void backward_batch(const SirenNetwork& net, const JetTape& tape, const Eigen::MatrixXd& adjoint,
                    ParameterGradients& grads) {
  const int channels = jet_channels(tape.order);
  const Eigen::Index B = tape.batch;
  const double w = net.omega0;
  if (adjoint.rows() != channels || adjoint.cols() != B)
    throw std::invalid_argument("backward_batch: adjoint shape does not match the tape");

  Eigen::MatrixXd zbar(1, channels * B);
  for (int c = 0; c < channels; ++c) zbar.block(0, c * B, 1, B) = adjoint.row(c);

  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& a = tape.inputs[l];
    grads.layers[l].weight.noalias() += zbar * a.transpose();
    grads.layers[l].bias += zbar.leftCols(B).rowwise().sum();
    if (l == 0) break;

    const Eigen::MatrixXd abar = net.layers[l].weight.transpose() * zbar;
    const Eigen::MatrixXd& z = tape.pre[l - 1];
    const Eigen::ArrayXXd& s = tape.sine[l - 1];
    const Eigen::ArrayXXd& co = tape.cosine[l - 1];
    const Eigen::Index n = z.rows();
    auto ob = [&](int c) { return abar.block(0, c * B, n, B).array(); };
    auto zb = [&](int c) { return z.block(0, c * B, n, B).array(); };

    Eigen::MatrixXd next(n, channels * B);
    const Eigen::ArrayXXd wc = w * co;
    Eigen::ArrayXXd value_bar = wc * ob(0);
    if (channels > 1) {
      const Eigen::ArrayXXd ws2 = (w * w) * s;
      value_bar -= ws2 * (ob(1) * zb(1) + ob(2) * zb(2) + ob(3) * zb(3));

      Eigen::ArrayXXd grad_bar[3] = {wc * ob(1), wc * ob(2), wc * ob(3)};
      if (channels == 10) {
        Eigen::ArrayXXd hz = Eigen::ArrayXXd::Zero(n, B);
        Eigen::ArrayXXd hgg = Eigen::ArrayXXd::Zero(n, B);
        Eigen::ArrayXXd cross[3] = {Eigen::ArrayXXd::Zero(n, B), Eigen::ArrayXXd::Zero(n, B),
                                    Eigen::ArrayXXd::Zero(n, B)};
        for (int p = 0; p < 6; ++p) {
          const auto [i, j] = kSymmetricPairs[p];
          const auto h = ob(4 + p);
          hz += h * zb(4 + p);
          hgg += h * zb(1 + i) * zb(1 + j);
          cross[i] += h * zb(1 + j);
          cross[j] += h * zb(1 + i);
          next.block(0, (4 + p) * B, n, B) = (wc * h).matrix();
        }
        value_bar -= ws2 * hz + (w * w * w) * co * hgg;
        for (int i = 0; i < 3; ++i) grad_bar[i] -= ws2 * cross[i];
      }
      for (int i = 0; i < 3; ++i) next.block(0, (1 + i) * B, n, B) = grad_bar[i].matrix();
    }
    next.leftCols(B) = value_bar.matrix();
    zbar = std::move(next);
  }
}

double forward(const SirenNetwork& net, const Vec3& x) {
  Eigen::Matrix3Xd p(3, 1);
  p.col(0) = x;
  return forward_batch(net, p, JetOrder::Value)(0, 0);
}

Jet2 forward_jet(const SirenNetwork& net, const Vec3& x) {
  Eigen::Matrix3Xd p(3, 1);
  p.col(0) = x;
  return jet_from_column(forward_batch(net, p, JetOrder::Hessian), 0);
}

std::vector<Jet2> evaluate_jets(const SirenNetwork& net, const std::vector<Vec3>& points, JetOrder order) {
  std::vector<Jet2> out(points.size());
  const std::size_t blocks = (points.size() + kBlockSize - 1) / kBlockSize;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * kBlockSize;
    const std::size_t end = std::min(points.size(), begin + kBlockSize);
    const Eigen::MatrixXd res = forward_batch(net, to_matrix(points, begin, end), order);
    for (std::size_t i = begin; i < end; ++i) out[i] = jet_from_column(res, static_cast<Eigen::Index>(i - begin));
  });
  return out;
}

LossGradient loss_gradients(const SirenNetwork& net, const std::vector<PointGroup>& groups,
                            const JetLoss& loss) {
  struct Block {
    std::size_t group, begin, end;
  };
  std::vector<Block> blocks;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t b = 0; b < groups[g].points.size(); b += kBlockSize)
      blocks.push_back({g, b, std::min(groups[g].points.size(), b + kBlockSize)});

  LossGradient result;
  result.jets.resize(groups.size());
  std::vector<std::vector<JetAdjoint>> adjoints(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    result.jets[g].resize(groups[g].points.size());
    adjoints[g].assign(groups[g].points.size(), JetAdjoint{});
  }

  std::vector<JetTape> tapes(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t k) {
    const Block& blk = blocks[k];
    const PointGroup& group = groups[blk.group];
    const Eigen::MatrixXd out = forward_batch(net, to_matrix(group.points, blk.begin, blk.end), group.order, &tapes[k]);
    for (std::size_t i = blk.begin; i < blk.end; ++i)
      result.jets[blk.group][i] = jet_from_column(out, static_cast<Eigen::Index>(i - blk.begin));
  });

  result.loss = loss(result.jets, adjoints);

  std::vector<ParameterGradients> partial(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t k) {
    const Block& blk = blocks[k];
    const int channels = jet_channels(groups[blk.group].order);
    Eigen::MatrixXd adj(channels, static_cast<Eigen::Index>(blk.end - blk.begin));
    for (std::size_t i = blk.begin; i < blk.end; ++i) {
      const JetAdjoint& a = adjoints[blk.group][i];
      const auto s = static_cast<Eigen::Index>(i - blk.begin);
      adj(0, s) = a.value;
      if (channels >= 4) adj.block<3, 1>(1, s) = a.gradient;
      if (channels == 10)
        for (int p = 0; p < 6; ++p) adj(4 + p, s) = a.hessian[p];
    }
    partial[k] = ParameterGradients::zeros_like(net);
    backward_batch(net, tapes[k], adj, partial[k]);
    tapes[k] = JetTape{};
  });

  result.gradients = ParameterGradients::zeros_like(net);
  for (const auto& p : partial) result.gradients += p;
  return result;
}

}  // namespace dudf
