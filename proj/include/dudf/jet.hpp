#pragma once

#include "dudf/common.hpp"

#include <array>

namespace dudf {

/// Unique entries of a symmetric 3x3 matrix in the order xx, xy, xz, yy, yz, zz.
using SymmetricEntries = std::array<double, 6>;

inline constexpr std::array<std::array<int, 2>, 6> kSymmetricPairs{
    {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

inline Mat3 to_matrix(const SymmetricEntries& h) {
  Mat3 m;
  m << h[0], h[1], h[2],
       h[1], h[3], h[4],
       h[2], h[4], h[5];
  return m;
}

/// Averages the off-diagonal pairs of `m`.
inline SymmetricEntries to_entries(const Mat3& m) {
  return {m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
          m(1, 1), 0.5 * (m(1, 2) + m(2, 1)), m(2, 2)};
}

/// Value, input gradient and input Hessian of a scalar field at one point.
/// The Hessian is stored by its six unique entries, so it is symmetric by
/// construction.
struct Jet2 {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  SymmetricEntries hessian{};

  Mat3 hessian_matrix() const { return to_matrix(hessian); }
};

/// How much of a Jet2 an evaluation fills in.
enum class JetOrder { Value = 0, Gradient = 1, Hessian = 2 };

/// Channels carried per point for an order: 1, 4 or 10.
constexpr int jet_channels(JetOrder order) {
  switch (order) {
    case JetOrder::Value: return 1;
    case JetOrder::Gradient: return 4;
    case JetOrder::Hessian: return 10;
  }
  return 1;
}

}  // namespace dudf
